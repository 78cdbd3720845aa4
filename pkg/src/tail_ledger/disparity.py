"""Closed-form costs of limiting memorization, and per-subgroup disparity.

All quantities are exact sums over the prior entries (log-space powers):
the optimal error, the excess-error floor forced by capping memorization at
gamma, and the floor forced by label-private prediction.  The disparity
report evaluates these per subgroup of a mixed population, exposing how the
same cap hits subgroups with longer-tailed priors or fewer samples harder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .priors import FrequencyPrior, FrequencySampleSet, marginal_samples, plugin_samples
from .tails import expectation_ratio, log_kernel


def _plugin_or_mc(prior: FrequencyPrior, mc_replicates: int, seed: int) -> FrequencySampleSet:
    if mc_replicates <= 0:
        return plugin_samples(prior)
    return marginal_samples(prior, prior.n_entries, mc_replicates, seed)


def opt_error(prior: FrequencyPrior, n: int, m: int,
              mc_replicates: int = 0, seed: int = 0) -> float:
    """Expected error of the optimal learner: mass never sampled, times 1 - 1/m."""
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    samples = _plugin_or_mc(prior, mc_replicates, seed)
    never = prior.n_entries * float(
        np.dot(samples.weights, np.exp(log_kernel(samples.values, 0, n) +
                                       np.log(samples.values))))
    return (1.0 - 1.0 / m) * never


def _tau1_singletons_conf(prior: FrequencyPrior, n: int, kappa: float,
                          mc_replicates: int, seed: int) -> float:
    samples = _plugin_or_mc(prior, mc_replicates, seed)
    tau1 = expectation_ratio(samples.values, samples.weights, 1, n)
    singletons = n * prior.n_entries * float(
        np.dot(samples.weights, np.exp(log_kernel(samples.values, 1, n))))
    return tau1 * singletons * kappa


def memorization_cost(prior: FrequencyPrior, n: int, m: int, gamma: float,
                      kappa: float = 1.0, mc_replicates: int = 0,
                      seed: int = 0) -> float:
    """Excess-error floor for learners whose memorization scores are <= gamma."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    if not 0.0 <= kappa <= 1.0:
        raise ValueError(f"kappa must be in [0, 1], got {kappa}")
    slack = max(0.0, 1.0 - 1.0 / m - gamma)
    if slack == 0.0:
        return 0.0
    return _tau1_singletons_conf(prior, n, kappa, mc_replicates, seed) * slack


def privacy_cost(prior: FrequencyPrior, n: int, m: int, eps: float,
                 delta: float = 0.0, kappa: float = 1.0,
                 mc_replicates: int = 0, seed: int = 0) -> float:
    """Excess-error floor for (eps, delta) label-private prediction."""
    if eps < 0.0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must be in [0, 1], got {delta}")
    if not 0.0 <= kappa <= 1.0:
        raise ValueError(f"kappa must be in [0, 1], got {kappa}")
    slack = max(0.0, 1.0 - math.exp(eps) / m - delta)
    if slack == 0.0:
        return 0.0
    return _tau1_singletons_conf(prior, n, kappa, mc_replicates, seed) * slack


@dataclass(frozen=True)
class SubgroupSpec:
    prior: FrequencyPrior
    n: int
    m: int
    mixing_weight: float
    name: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.m < 2:
            raise ValueError(f"m must be >= 2, got {self.m}")
        if not 0.0 <= self.mixing_weight <= 1.0:
            raise ValueError(f"mixing_weight must be in [0, 1], got {self.mixing_weight}")


@dataclass(frozen=True)
class SubgroupRow:
    name: str
    mixing_weight: float
    opt: float
    cost: float


@dataclass(frozen=True)
class DisparityReport:
    rows: tuple[SubgroupRow, ...]
    params: dict

    def cost_ratio(self, i: int, j: int) -> float:
        """Ratio of subgroup i's cost to subgroup j's."""
        if self.rows[j].cost == 0.0:
            raise ValueError("reference subgroup has zero cost")
        return self.rows[i].cost / self.rows[j].cost

    def to_csv(self) -> str:
        params = ";".join(f"{k}={v!r}" for k, v in sorted(self.params.items()))
        lines = ["subgroup,opt,cost,params"]
        for row in self.rows:
            lines.append(f"{row.name},{row.opt!r},{row.cost!r},{params}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        lines = [f"{'subgroup':<16}{'weight':>8}{'opt':>10}{'cost':>10}"]
        for row in self.rows:
            lines.append(f"{row.name:<16}{row.mixing_weight:>8.4f}"
                         f"{row.opt:>10.4f}{row.cost:>10.4f}")
        return "\n".join(lines) + "\n"


def disparity_report(subgroups: list[SubgroupSpec], gamma: float | None = None,
                     eps: float | None = None, delta: float = 0.0,
                     kappa: float = 1.0, mc_replicates: int = 0,
                     seed: int = 0) -> DisparityReport:
    """Per-subgroup optimal error and cost under one shared cap.

    Exactly one of ``gamma`` (memorization cap) or ``eps`` (privacy budget)
    must be given; each subgroup is evaluated with its own prior and n.
    """
    if (gamma is None) == (eps is None):
        raise ValueError("give exactly one of gamma or eps")
    if not subgroups:
        raise ValueError("need at least one subgroup")
    total = sum(s.mixing_weight for s in subgroups)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"mixing weights must sum to 1, got {total!r}")
    rows = []
    for i, s in enumerate(subgroups):
        opt = opt_error(s.prior, s.n, s.m, mc_replicates, seed)
        if gamma is not None:
            cost = memorization_cost(s.prior, s.n, s.m, gamma, kappa,
                                     mc_replicates, seed)
        else:
            cost = privacy_cost(s.prior, s.n, s.m, eps, delta, kappa,
                                mc_replicates, seed)
        rows.append(SubgroupRow(name=s.name or f"subgroup_{i}",
                                mixing_weight=s.mixing_weight, opt=opt, cost=cost))
    params = {"kappa": kappa, "mc_replicates": mc_replicates}
    if gamma is not None:
        params["gamma"] = gamma
    else:
        params["eps"] = eps
        params["delta"] = delta
    return DisparityReport(rows=tuple(rows), params=params)
