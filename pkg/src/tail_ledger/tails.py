"""Tail statistics of a frequency distribution.

The central quantity is the posterior-mean frequency of an element observed
``ell`` times in a dataset of size ``n``,

    tau_ell = E[alpha^(ell+1) (1-alpha)^(n-ell)] / E[alpha^ell (1-alpha)^(n-ell)],

which is also the per-example generalization cost of not fitting such an
element.  Interval weights and singleton counts quantify how much of the
distribution lives in the tail, and the closed-form bounds relate tau_1 to
those weights.  All kernels are evaluated in log space: for n around 5e4 the
direct product alpha^ell (1-alpha)^(n-ell) underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GapConditionError, NumericDegeneracyError
from .priors import FrequencyPrior, FrequencySampleSet, marginal_samples, plugin_samples


def log_kernel(values: np.ndarray, ell: int, n: int) -> np.ndarray:
    """log(alpha^ell (1-alpha)^(n-ell)) elementwise; -inf where the product is 0."""
    out = ell * np.log(values)
    if n > ell:
        with np.errstate(divide="ignore"):
            out = out + (n - ell) * np.log1p(-values)
    return out


def expectation_ratio(values: np.ndarray, weights: np.ndarray, ell: int, n: int) -> float:
    """E[alpha * k(alpha)] / E[k(alpha)] for the kernel above, via a shared log shift."""
    logk = log_kernel(values, ell, n)
    shift = logk.max()
    if not np.isfinite(shift):
        raise NumericDegeneracyError(
            f"kernel alpha^{ell}(1-alpha)^{n - ell} vanished on the whole sample set")
    kernel = np.exp(logk - shift)
    denominator = float(np.dot(weights, kernel))
    if denominator <= 0.0:
        raise NumericDegeneracyError(
            f"denominator E[alpha^{ell}(1-alpha)^{n - ell}] underflowed to 0")
    return float(np.dot(weights, values * kernel)) / denominator


def tau(samples: FrequencySampleSet, ell: int, n: int) -> float:
    """Expected posterior frequency of an element seen ``ell`` >= 1 times out of ``n``."""
    if not 1 <= ell <= n:
        raise ValueError(f"need 1 <= ell <= n, got ell={ell}, n={n}")
    return expectation_ratio(samples.values, samples.weights, ell, n)


def tau_plugin(prior: FrequencyPrior, ell: int, n: int) -> float:
    """tau with expectations over the prior entries instead of the marginal."""
    if not 1 <= ell <= n:
        raise ValueError(f"need 1 <= ell <= n, got ell={ell}, n={n}")
    s = plugin_samples(prior)
    return expectation_ratio(s.values, s.weights, ell, n)


def weight(samples: FrequencySampleSet, lo: float, hi: float, domain_size: int) -> float:
    """Expected distribution mass contributed by frequencies in [lo, hi]."""
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError(f"need 0 <= lo <= hi <= 1, got [{lo}, {hi}]")
    mask = (samples.values >= lo) & (samples.values <= hi)
    return domain_size * float(np.dot(samples.weights[mask], samples.values[mask]))


def weight_plugin(prior: FrequencyPrior, lo: float, hi: float) -> float:
    """Interval weight computed directly on the prior entries."""
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError(f"need 0 <= lo <= hi <= 1, got [{lo}, {hi}]")
    entries = prior.entries
    mask = (entries >= lo) & (entries <= hi)
    return float(entries[mask].sum())


def singleton_expectation(samples: FrequencySampleSet, n: int, domain_size: int) -> float:
    """Expected number of dataset points that appear exactly once."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    logk = log_kernel(samples.values, 1, n)
    return n * domain_size * float(np.dot(samples.weights, np.exp(logk)))


def singleton_expectation_plugin(prior: FrequencyPrior, n: int) -> float:
    """Expected singleton count with expectations over the prior entries."""
    return singleton_expectation(plugin_samples(prior), n, prior.n_entries)


# "Sufficiently large n" in the tau_1 lower bounds, operationalized: for
# n >= 100, alpha^2 (1-alpha)^(n-1) >= alpha/(5n) holds on [1/(3n), 2/n].
TAU1_BOUND_MIN_N = 100


def tau1_lower_bound(samples: FrequencySampleSet, n: int, domain_size: int) -> float:
    """Lower bound on tau_1: weight of the frequency band [1/(3n), 2/n] over 5n."""
    if n < TAU1_BOUND_MIN_N:
        raise ValueError(f"bound requires n >= {TAU1_BOUND_MIN_N}, got {n}")
    return weight(samples, 1.0 / (3 * n), 2.0 / n, domain_size) / (5.0 * n)


def tau1_lower_bound_plugin(prior: FrequencyPrior, n: int) -> float:
    """Prior-side variant: weight of [1/(2n), 1/n] over 7n; needs a flat prior.

    Valid when no single prior entry exceeds 1/200, which keeps the marginal
    close to the prior itself.
    """
    if n < TAU1_BOUND_MIN_N:
        raise ValueError(f"bound requires n >= {TAU1_BOUND_MIN_N}, got {n}")
    if prior.pi_max > 1.0 / 200:
        raise ValueError(
            f"bound requires max prior entry <= 1/200, got {prior.pi_max!r}")
    return weight_plugin(prior, 1.0 / (2 * n), 1.0 / n) / (7.0 * n)


def tau1_no_middle_upper(samples: FrequencySampleSet, n: int, theta: float,
                         domain_size: int) -> float:
    """Upper bound tau_1 <= 2*theta for priors with no mass just above theta.

    Requires theta <= 1/(2n) and an empty frequency band (theta, t/n] where
    t = ln(1/(theta*beta)) + 2 and beta is the weight of [0, theta].
    """
    if not 0.0 < theta <= 1.0 / (2 * n):
        raise ValueError(f"need 0 < theta <= 1/(2n) = {1.0 / (2 * n)!r}, got {theta!r}")
    beta = weight(samples, 0.0, theta, domain_size)
    if beta <= 0.0:
        raise GapConditionError(
            f"no frequency mass at or below theta={theta!r}; the bound needs beta > 0")
    t = math.log(1.0 / (theta * beta)) + 2.0
    mask = (samples.values > theta) & (samples.values <= t / n)
    gap_mass = domain_size * float(np.dot(samples.weights[mask], samples.values[mask]))
    if gap_mass > 0.0:
        raise GapConditionError(
            f"frequency band ({theta!r}, {t / n!r}] carries weight {gap_mass!r}; "
            "the bound requires it to be empty")
    return 2.0 * theta


@dataclass(frozen=True)
class RelatePriorsResult:
    lhs: float   # interval weight under the marginal (Monte Carlo)
    rhs: float   # concentration-based lower bound computed from the prior
    delta: float


def relate_priors_check(prior: FrequencyPrior, lo: float, hi: float, gamma: float,
                        replicates: int = 100, seed: int = 0,
                        domain_size: int | None = None) -> RelatePriorsResult:
    """Compare an interval weight under the marginal against its prior-side bound.

    The marginal-side weight (lhs) should dominate the bound (rhs), which
    rescales the interval to account for the random normalization factor and
    discounts by the Bernstein-style failure probability delta.
    """
    if not 0.0 < lo < hi < 1.0:
        raise ValueError(f"need 0 < lo < hi < 1, got [{lo}, {hi}]")
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    n_dom = prior.n_entries if domain_size is None else domain_size
    samples = marginal_samples(prior, n_dom, replicates, seed)
    lhs = weight(samples, lo, hi, n_dom)

    var = prior.variance
    delta = 2.0 * math.exp(-gamma ** 2 /
                           (2.0 * (n_dom - 1) * var + 2.0 * gamma * prior.pi_max / 3.0))
    base = 1.0 - 1.0 / n_dom
    lo_den = base + lo - gamma
    hi_den = base + hi + gamma
    mapped_lo = lo / lo_den if lo_den > 0.0 else 0.0
    mapped_hi = min(hi / hi_den, 1.0)
    rhs = (1.0 - delta) / hi_den * weight_plugin(prior, mapped_lo, mapped_hi)
    return RelatePriorsResult(lhs=lhs, rhs=rhs, delta=delta)


@dataclass
class TailReport:
    """Bundle of tail statistics for one (prior, n) configuration."""

    n: int
    method: str  # pi-plug-in | pihat-mc | pihat-exact
    tau: dict[int, float] = field(default_factory=dict)
    singleton_expectation: float | None = None
    weights: dict[tuple[float, float], float] = field(default_factory=dict)

    def to_csv(self, path: str | Path) -> None:
        lines = ["quantity,ell_or_interval,value,method"]
        for ell in sorted(self.tau):
            lines.append(f"tau,{ell},{self.tau[ell]!r},{self.method}")
        if self.singleton_expectation is not None:
            lines.append(f"singleton_expectation,,{self.singleton_expectation!r},{self.method}")
        for (lo, hi) in sorted(self.weights):
            lines.append(f"weight,[{lo!r};{hi!r}],{self.weights[(lo, hi)]!r},{self.method}")
        Path(path).write_text("\n".join(lines) + "\n")


def tail_report(samples: FrequencySampleSet, n: int, domain_size: int,
                ells: list[int], intervals: list[tuple[float, float]] | None = None,
                method: str = "pihat-mc") -> TailReport:
    report = TailReport(n=n, method=method)
    for ell in ells:
        report.tau[ell] = tau(samples, ell, n)
    report.singleton_expectation = singleton_expectation(samples, n, domain_size)
    for lo, hi in intervals or []:
        report.weights[(lo, hi)] = weight(samples, lo, hi, domain_size)
    return report


def excess_error_bound(report: TailReport, errn_profile: dict[int, float]) -> float:
    """Sum of tau_ell times the expected unfit-point count at each multiplicity."""
    total = 0.0
    for ell, count in errn_profile.items():
        if not 1 <= ell <= report.n:
            raise ValueError(f"multiplicity {ell} outside [1, {report.n}]")
        if count < 0.0:
            raise ValueError(f"errn profile values must be >= 0, got {count} at ell={ell}")
        if ell not in report.tau:
            raise ValueError(f"report has no tau value for ell={ell}")
        total += report.tau[ell] * count
    return total
