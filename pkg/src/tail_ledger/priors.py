"""Frequency priors and the induced marginal frequency distribution.

A frequency prior is a list of N candidate frequencies summing to one.  A
random probability mass function over a domain is generated by drawing each
element's unnormalized frequency uniformly from the prior and normalizing.
The distribution of a single normalized coordinate under that process is the
marginal frequency distribution; it is represented here as a weighted sample
set, produced either by Monte Carlo pooling or by exact enumeration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ResourceLimitError
from .rng import derive_rng

SUM_TOL = 1e-9
# A user-supplied prior whose sum is off by more than this is rejected
# instead of silently renormalized.
FILE_SUM_TOL = 1e-6

ENUMERATION_BUDGET = 10**7


@dataclass(frozen=True)
class FrequencyPrior:
    """An ordered list of candidate frequencies, strictly positive, summing to 1."""

    entries: np.ndarray
    name: str = ""

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float).copy()
        if entries.ndim != 1 or entries.size < 1:
            raise ValueError("prior must be a non-empty 1-D list of frequencies")
        if not np.all(np.isfinite(entries)):
            raise ValueError("prior entries must be finite")
        if np.any(entries <= 0.0) or np.any(entries > 1.0):
            raise ValueError("prior entries must lie in (0, 1]")
        if abs(entries.sum() - 1.0) > SUM_TOL:
            raise ValueError(
                f"prior entries must sum to 1 within {SUM_TOL:g}; got {entries.sum()!r}")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def n_entries(self) -> int:
        return int(self.entries.size)

    @property
    def pi_max(self) -> float:
        return float(self.entries.max())

    @property
    def variance(self) -> float:
        """Mean squared deviation of the entries from 1/N."""
        n = self.n_entries
        return float(np.mean((self.entries - 1.0 / n) ** 2))


def zipf_prior(n_entries: int) -> FrequencyPrior:
    """Prior with i-th entry proportional to 1/i."""
    if n_entries < 1:
        raise ValueError(f"n_entries must be >= 1, got {n_entries}")
    raw = 1.0 / np.arange(1, n_entries + 1)
    return FrequencyPrior(raw / raw.sum(), name=f"zipf:{n_entries}")


def degenerate_prior(n_entries: int) -> FrequencyPrior:
    """Prior with all entries equal to 1/N."""
    if n_entries < 1:
        raise ValueError(f"n_entries must be >= 1, got {n_entries}")
    return FrequencyPrior(np.full(n_entries, 1.0 / n_entries), name=f"uniform:{n_entries}")


def load_prior_file(path: str | Path, name: str = "") -> FrequencyPrior:
    """Read a prior from a text file, one decimal frequency per line.

    Lines starting with ``#`` and blank lines are ignored.  Sums within
    1e-6 of 1 are renormalized; larger deviations are rejected.
    """
    path = Path(path)
    values = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            values.append(float(stripped))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: not a decimal frequency: {stripped!r}")
    if not values:
        raise ValueError(f"{path}: no frequencies found")
    entries = np.asarray(values, dtype=float)
    if np.any(entries <= 0.0):
        bad = int(np.flatnonzero(entries <= 0.0)[0])
        raise ValueError(f"{path}: entry {bad + 1} is not strictly positive")
    total = entries.sum()
    if abs(total - 1.0) > FILE_SUM_TOL:
        raise ValueError(
            f"{path}: frequencies sum to {total!r}, more than {FILE_SUM_TOL:g} away from 1")
    return FrequencyPrior(entries / total, name=name or path.name)


@dataclass(frozen=True)
class FrequencySampleSet:
    """Weighted support of (an approximation to) the marginal frequency distribution."""

    values: np.ndarray
    weights: np.ndarray
    provenance: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).copy()
        weights = np.asarray(self.weights, dtype=float).copy()
        if values.shape != weights.shape or values.ndim != 1 or values.size == 0:
            raise ValueError("values and weights must be matching non-empty 1-D arrays")
        if np.any(values <= 0.0) or np.any(values > 1.0):
            raise ValueError("sample values must lie in (0, 1]")
        if np.any(weights < 0.0) or abs(weights.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"weights must be non-negative and sum to 1 within {SUM_TOL:g}")
        values.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @property
    def is_exact(self) -> bool:
        return self.provenance == "exact"

    def mean(self) -> float:
        return float(np.dot(self.values, self.weights))

    def to_csv(self, path: str | Path) -> None:
        lines = ["alpha,weight"]
        lines += [f"{a!r},{w!r}" for a, w in zip(self.values, self.weights)]
        Path(path).write_text("\n".join(lines) + "\n")


def plugin_samples(prior: FrequencyPrior) -> FrequencySampleSet:
    """The prior itself viewed as a sample set (uniform weights on its entries)."""
    n = prior.n_entries
    return FrequencySampleSet(prior.entries, np.full(n, 1.0 / n), provenance="plug-in")


def sample_frequency_vector(prior: FrequencyPrior, domain_size: int,
                            seed: int | np.random.Generator) -> np.ndarray:
    """Draw a normalized frequency vector: one uniform prior entry per element."""
    if domain_size < 1:
        raise ValueError(f"domain_size must be >= 1, got {domain_size}")
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(seed)
    draws = prior.entries[rng.integers(0, prior.n_entries, size=domain_size)]
    return draws / draws.sum()


def marginal_samples(prior: FrequencyPrior, domain_size: int, replicates: int,
                     seed: int) -> FrequencySampleSet:
    """Monte Carlo sample set for the marginal frequency distribution.

    All coordinates of each sampled vector are pooled: the coordinates are
    exchangeable, and every downstream quantity is an expectation that is
    linear in the single-coordinate marginal, so pooling is unbiased and
    cuts the number of vector draws by a factor of ``domain_size``.
    """
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    pools = [sample_frequency_vector(prior, domain_size, derive_rng(seed, rep))
             for rep in range(replicates)]
    values = np.concatenate(pools)
    weights = np.full(values.size, 1.0 / values.size)
    return FrequencySampleSet(
        values, weights,
        provenance=f"monte-carlo(replicates={replicates}, seed={seed})")


def exact_marginal(prior: FrequencyPrior, domain_size: int) -> FrequencySampleSet:
    """Exact marginal frequency distribution by enumerating all assignments.

    Enumerates every assignment of distinct prior entries to the
    ``domain_size`` elements; feasible only for small domains.  Distinct
    values are detected by exact equality of the input entries.
    """
    if domain_size < 1:
        raise ValueError(f"domain_size must be >= 1, got {domain_size}")
    distinct, counts = np.unique(prior.entries, return_counts=True)
    k = distinct.size
    if k ** domain_size > ENUMERATION_BUDGET:
        raise ResourceLimitError(
            f"{k}^{domain_size} assignments exceed the enumeration budget "
            f"of {ENUMERATION_BUDGET}")
    probs = counts / prior.n_entries
    support: dict[float, float] = {}
    for combo in itertools.product(range(k), repeat=domain_size):
        vals = distinct[list(combo)]
        p = float(np.prod(probs[list(combo)]))
        total = vals.sum()
        for v in vals:
            alpha = float(v / total)
            support[alpha] = support.get(alpha, 0.0) + p / domain_size
    alphas = np.array(sorted(support))
    weights = np.array([support[a] for a in alphas])
    return FrequencySampleSet(alphas, weights / weights.sum(), provenance="exact")
