"""Simulated learners over discrete instances, and their stability metrics.

Every learner here is defined by the exact probability distribution of its
prediction at a query point, so error rates, memorization scores, and
leave-one-out stability are computed in closed form from those pmfs rather
than by sampling predictors.  The two ``verify_*`` routines check the
excess-error decomposition and the memorization/generalization-gap identity,
by Monte Carlo at scale and by full enumeration on tiny domains.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .discrete import Dataset, DiscreteInstance, LabelPriorSpec, sample_instance
from .errors import UnsupportedPriorError
from .priors import FrequencyPrior, FrequencySampleSet, exact_marginal
from .rng import derive_rng
from .tails import expectation_ratio

MEMORIZER = "bayes-optimal-memorizer"
GAMMA_LIMITED = "gamma-limited"
RR_LABEL_PRIVATE = "rr-label-private"
NO_FIT = "no-fit"
FIT_AT_LEAST = "fit-multiplicity-at-least"


@dataclass(frozen=True)
class Learner:
    kind: str
    label_prior: LabelPriorSpec
    gamma: float | None = None
    eps: float | None = None
    delta: float | None = None
    min_multiplicity: int | None = None

    def __post_init__(self):
        if self.kind not in (MEMORIZER, GAMMA_LIMITED, RR_LABEL_PRIVATE, NO_FIT,
                             FIT_AT_LEAST):
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if self.kind == GAMMA_LIMITED and not (self.gamma is not None
                                               and 0.0 <= self.gamma <= 1.0):
            raise ValueError("gamma-limited learner needs gamma in [0, 1]")
        if self.kind == RR_LABEL_PRIVATE:
            if self.eps is None or self.eps < 0.0:
                raise ValueError("rr-label-private learner needs eps >= 0")
            if self.delta is None:
                object.__setattr__(self, "delta", 0.0)
        if self.kind == FIT_AT_LEAST and (self.min_multiplicity is None
                                          or self.min_multiplicity < 1):
            raise ValueError("fit-multiplicity-at-least learner needs a threshold >= 1")


def memorizer(label_prior: LabelPriorSpec) -> Learner:
    return Learner(MEMORIZER, label_prior)


def no_fit(label_prior: LabelPriorSpec) -> Learner:
    return Learner(NO_FIT, label_prior)


def gamma_limited(label_prior: LabelPriorSpec, gamma: float) -> Learner:
    return Learner(GAMMA_LIMITED, label_prior, gamma=gamma)


def rr_label_private(label_prior: LabelPriorSpec, eps: float, delta: float = 0.0) -> Learner:
    return Learner(RR_LABEL_PRIVATE, label_prior, eps=eps, delta=delta)


def fit_multiplicity_at_least(label_prior: LabelPriorSpec, k: int) -> Learner:
    return Learner(FIT_AT_LEAST, label_prior, min_multiplicity=k)


def rr_stay_probability(eps: float, m: int) -> float:
    """Randomized-response probability of keeping the input label."""
    return math.exp(eps) / (math.exp(eps) + m - 1)


def off_sample_pmf(label_prior: LabelPriorSpec) -> np.ndarray:
    """Prediction pmf away from the data: uniform over the prior's modes."""
    dist = label_prior.label_distribution()
    modes = np.isclose(dist, dist.max())
    return modes / modes.sum()


def _pmf_rows(learner: Learner, counts: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Prediction pmfs for points with the given multiplicities and observed labels.

    ``labels`` may be -1 where ``counts`` is 0 (unseen points).
    """
    m = learner.label_prior.num_classes
    k = counts.size
    off = off_sample_pmf(learner.label_prior)
    onehot = np.zeros((k, m))
    onehot[np.arange(k), np.clip(labels, 0, m - 1)] = 1.0

    if learner.kind == NO_FIT:
        return np.tile(off, (k, 1))
    if learner.kind == MEMORIZER:
        fit = counts > 0
    elif learner.kind == FIT_AT_LEAST:
        fit = counts >= learner.min_multiplicity
    elif learner.kind == GAMMA_LIMITED:
        # Mixing with the own leave-one-out prediction, unrolled over the
        # multiplicity: a point seen c times is fit with weight 1-(1-gamma)^c.
        w = 1.0 - (1.0 - learner.gamma) ** np.maximum(counts, 0)
        return w[:, None] * onehot + (1.0 - w)[:, None] * off
    elif learner.kind == RR_LABEL_PRIVATE:
        fit = counts > 0
        base = np.where(fit[:, None], onehot, off)
        stay = rr_stay_probability(learner.eps, m)
        return stay * base + (1.0 - stay) / (m - 1) * (1.0 - base)
    return np.where(fit[:, None], onehot, np.tile(off, (k, 1)))


def prediction_matrix(learner: Learner, dataset: Dataset, xs: np.ndarray) -> np.ndarray:
    """Rows of prediction pmfs at the given query points."""
    xs = np.asarray(xs, dtype=np.int64)
    if xs.size and (xs.min() < 0 or xs.max() >= dataset.domain_size):
        raise ValueError("query point outside the domain")
    return _pmf_rows(learner, dataset.counts[xs], dataset.label_of[xs])


def prediction_distribution(learner: Learner, dataset: Dataset, x: int) -> np.ndarray:
    if not 0 <= x < dataset.domain_size:
        raise ValueError(f"query point {x} outside [0, {dataset.domain_size})")
    return prediction_matrix(learner, dataset, np.array([x]))[0]


def errn(learner: Learner, dataset: Dataset, ell: int) -> float:
    """Expected miss count on points of multiplicity ``ell``, discounted by ell.

    Exact: the per-point miss probability is read off the prediction pmf.
    """
    if not 1 <= ell <= dataset.n:
        raise ValueError(f"need 1 <= ell <= n, got ell={ell}")
    idx = np.flatnonzero(dataset.counts[dataset.points] == ell)
    if idx.size == 0:
        return 0.0
    rows = prediction_matrix(learner, dataset, dataset.points[idx])
    hit = rows[np.arange(idx.size), dataset.labels[idx]]
    return float(np.sum(1.0 - hit)) / ell


def empirical_error(learner: Learner, dataset: Dataset) -> float:
    """Expected fraction of dataset examples the learner mislabels."""
    rows = prediction_matrix(learner, dataset, dataset.points)
    hit = rows[np.arange(dataset.n), dataset.labels]
    return float(np.mean(1.0 - hit))


def generalization_error(learner: Learner, instance: DiscreteInstance,
                         against_observed: bool = False) -> float:
    """Exact error over the domain, against the true (or observed) labeling."""
    dataset = instance.dataset
    rows = _pmf_rows(learner, dataset.counts, dataset.label_of)
    target = instance.observed_labels if against_observed else instance.true_labels
    hit = rows[np.arange(instance.domain_size), target]
    return float(np.dot(instance.pmf, 1.0 - hit))


def mem_score(learner: Learner, dataset: Dataset, i: int) -> float:
    """Change in the probability of the observed label when example i is removed."""
    if not 0 <= i < dataset.n:
        raise ValueError(f"index {i} outside [0, {dataset.n})")
    x, y = int(dataset.points[i]), int(dataset.labels[i])
    c = int(dataset.counts[x])
    with_i = _pmf_rows(learner, np.array([c]), np.array([y]))[0, y]
    without_i = _pmf_rows(learner, np.array([c - 1]), np.array([y]))[0, y]
    return float(with_i - without_i)


def mem_scores(learner: Learner, dataset: Dataset) -> np.ndarray:
    """Memorization score for every dataset index at once."""
    counts = dataset.counts[dataset.points]
    rows = _pmf_rows(learner, counts, dataset.labels)
    rows_rm = _pmf_rows(learner, counts - 1, dataset.labels)
    idx = np.arange(dataset.n)
    return rows[idx, dataset.labels] - rows_rm[idx, dataset.labels]


def loo_stability(learner: Learner, instance: DiscreteInstance) -> float:
    """Average absolute leave-one-out change of the fit probability."""
    return float(np.mean(np.abs(mem_scores(learner, instance.dataset))))


def conf_margin(dataset: Dataset, i: int, label_prior: LabelPriorSpec) -> float:
    """Posterior advantage of the observed label of a singleton, clipped at 0.

    Under the iid-uniform prior with noise kappa the posterior puts
    kappa + (1-kappa)/m on the observed label and (1-kappa)/m elsewhere, so
    the margin is exactly kappa.
    """
    if label_prior.kind != "iid-uniform":
        raise UnsupportedPriorError(
            "confidence margin has a closed form only for the iid-uniform prior")
    x = int(dataset.points[i])
    if dataset.counts[x] != 1:
        raise ValueError(f"example {i} is not a singleton (multiplicity {dataset.counts[x]})")
    kappa = label_prior.noise_kappa
    m = label_prior.num_classes
    top = kappa + (1.0 - kappa) / m
    runner_up = (1.0 - kappa) / m
    return max(0.0, top - runner_up)


# ---------------------------------------------------------------------------
# Decomposition checks


@dataclass(frozen=True)
class MainBoundResult:
    lhs_excess: float
    rhs_sum: float
    gap: float
    gap_se: float


def verify_main_bound(prior: FrequencyPrior, label_prior: LabelPriorSpec, n: int,
                      learner: Learner, samples: FrequencySampleSet,
                      num_instances: int, seed: int,
                      domain_size: int | None = None) -> MainBoundResult:
    """Monte Carlo check of excess error >= sum of tau_ell * errn(ell).

    The optimum is measured by running the fitting learner, not by a separate
    formula.  Noiseless label priors only: the equality form of the
    decomposition assumes the observed labels are correct.
    """
    if label_prior.noise_kappa != 1.0:
        raise ValueError("the decomposition check requires a noiseless label prior")
    opt_learner = memorizer(label_prior)
    tau_cache: dict[int, float] = {}
    gaps, lhs_vals, rhs_vals = [], [], []
    for rep in range(num_instances):
        inst = sample_instance(prior, label_prior, n,
                               seed=int(derive_rng(seed, rep).integers(2**63)),
                               domain_size=domain_size)
        lhs = generalization_error(learner, inst) - generalization_error(opt_learner, inst)
        rhs = 0.0
        for ell in np.unique(inst.dataset.counts[inst.dataset.points]):
            ell = int(ell)
            if ell not in tau_cache:
                tau_cache[ell] = expectation_ratio(samples.values, samples.weights, ell, n)
            rhs += tau_cache[ell] * errn(learner, inst.dataset, ell)
        lhs_vals.append(lhs)
        rhs_vals.append(rhs)
        gaps.append(lhs - rhs)
    gaps = np.asarray(gaps)
    gap_se = float(gaps.std(ddof=1) / math.sqrt(len(gaps))) if len(gaps) > 1 else 0.0
    return MainBoundResult(lhs_excess=float(np.mean(lhs_vals)),
                           rhs_sum=float(np.mean(rhs_vals)),
                           gap=float(gaps.mean()), gap_se=gap_se)


def verify_main_bound_exact(prior: FrequencyPrior, label_prior: LabelPriorSpec,
                            n: int, learner: Learner,
                            domain_size: int) -> MainBoundResult:
    """Full-enumeration version of the decomposition check on a tiny domain.

    Enumerates every frequency assignment, labeling, and point sequence.
    For learners whose off-sample prediction matches the optimal rule the
    decomposition is an exact identity (gap 0).
    """
    if label_prior.noise_kappa != 1.0 or label_prior.kind != "iid-uniform":
        raise ValueError("exact check supports the noiseless iid-uniform prior only")
    m = label_prior.num_classes
    opt_learner = memorizer(label_prior)
    samples = exact_marginal(prior, domain_size)
    taus = {ell: expectation_ratio(samples.values, samples.weights, ell, n)
            for ell in range(1, n + 1)}

    distinct, counts = np.unique(prior.entries, return_counts=True)
    entry_probs = counts / prior.n_entries
    label_prob = (1.0 / m) ** domain_size
    aerr, aopt, rhs = 0.0, 0.0, 0.0
    for combo in itertools.product(range(len(distinct)), repeat=domain_size):
        vals = distinct[list(combo)]
        pmf = vals / vals.sum()
        p_assign = float(np.prod(entry_probs[list(combo)]))
        for f in itertools.product(range(m), repeat=domain_size):
            f = np.asarray(f)
            for seq in itertools.product(range(domain_size), repeat=n):
                seq = np.asarray(seq)
                p = p_assign * label_prob * float(np.prod(pmf[seq]))
                ds = Dataset(points=seq, labels=f[seq],
                             domain_size=domain_size, num_classes=m)
                for lrn, acc in ((learner, "aerr"), (opt_learner, "aopt")):
                    rows = _pmf_rows(lrn, ds.counts, ds.label_of)
                    err = float(np.dot(pmf, 1.0 - rows[np.arange(domain_size), f]))
                    if acc == "aerr":
                        aerr += p * err
                    else:
                        aopt += p * err
                for ell in np.unique(ds.counts[ds.points]):
                    rhs += p * taus[int(ell)] * errn(learner, ds, int(ell))
    return MainBoundResult(lhs_excess=aerr - aopt, rhs_sum=rhs,
                           gap=aerr - aopt - rhs, gap_se=0.0)


@dataclass(frozen=True)
class MemGapResult:
    avg_mem: float
    emp_gap: float
    se: float


def verify_mem_gap_identity(learner: Learner, instance: DiscreteInstance,
                            mc_reps: int, seed: int) -> MemGapResult:
    """MC check that average memorization equals the expected generalization gap.

    Holds for the fixed data distribution defined by the instance's pmf and
    observed labeling; the generalization term uses datasets of size n-1.
    """
    pmf, labels = instance.pmf, instance.observed_labels
    n, n_dom, m = instance.n, instance.domain_size, instance.label_prior.num_classes
    diffs = []
    for rep in range(mc_reps):
        rng = derive_rng(seed, rep)
        pts = rng.choice(n_dom, size=n, p=pmf)
        ds = Dataset(points=pts, labels=labels[pts], domain_size=n_dom, num_classes=m)
        avg_mem = float(np.mean(mem_scores(learner, ds)))
        emp = empirical_error(learner, ds)
        ds_small = Dataset(points=pts[:n - 1], labels=labels[pts[:n - 1]],
                           domain_size=n_dom, num_classes=m)
        rows = _pmf_rows(learner, ds_small.counts, ds_small.label_of)
        gen = float(np.dot(pmf, 1.0 - rows[np.arange(n_dom), labels]))
        diffs.append((avg_mem, emp - gen))
    diffs = np.asarray(diffs)
    delta = diffs[:, 0] - diffs[:, 1]
    se = float(delta.std(ddof=1) / math.sqrt(mc_reps)) if mc_reps > 1 else 0.0
    return MemGapResult(avg_mem=float(diffs[:, 0].mean()),
                        emp_gap=float(diffs[:, 1].mean()), se=se)


def verify_mem_gap_exact(learner: Learner, pmf: np.ndarray, labels: np.ndarray,
                         n: int, num_classes: int) -> MemGapResult:
    """Exact version of the identity by enumerating all datasets of size n."""
    pmf = np.asarray(pmf, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    n_dom = pmf.size
    avg_mem, emp = 0.0, 0.0
    for seq in itertools.product(range(n_dom), repeat=n):
        seq = np.asarray(seq)
        p = float(np.prod(pmf[seq]))
        ds = Dataset(points=seq, labels=labels[seq],
                     domain_size=n_dom, num_classes=num_classes)
        avg_mem += p * float(np.mean(mem_scores(learner, ds)))
        emp += p * empirical_error(learner, ds)
    gen = 0.0
    for seq in itertools.product(range(n_dom), repeat=n - 1):
        seq = np.asarray(seq, dtype=np.int64)
        p = float(np.prod(pmf[seq])) if seq.size else 1.0
        ds = Dataset(points=seq, labels=labels[seq],
                     domain_size=n_dom, num_classes=num_classes)
        rows = _pmf_rows(learner, ds.counts, ds.label_of)
        gen += p * float(np.dot(pmf, 1.0 - rows[np.arange(n_dom), labels]))
    return MemGapResult(avg_mem=avg_mem, emp_gap=emp - gen, se=0.0)


@dataclass
class MetricReport:
    """Per-instance metric bundle, exportable as CSV."""

    err: float
    errn: dict[int, float]
    mem: list[float]
    loostab: float
    conf: list[float]

    def to_csv(self, path) -> None:
        from pathlib import Path
        lines = ["metric,index_or_ell,value"]
        lines.append(f"err,,{self.err!r}")
        for ell in sorted(self.errn):
            lines.append(f"errn,{ell},{self.errn[ell]!r}")
        for i, v in enumerate(self.mem):
            lines.append(f"mem,{i},{v!r}")
        lines.append(f"loostab,,{self.loostab!r}")
        for i, v in enumerate(self.conf):
            lines.append(f"conf,{i},{v!r}")
        Path(path).write_text("\n".join(lines) + "\n")


def metric_report(learner: Learner, instance: DiscreteInstance) -> MetricReport:
    ds = instance.dataset
    per_ell = {int(ell): errn(learner, ds, int(ell))
               for ell in np.unique(ds.counts[ds.points])}
    mems = mem_scores(learner, ds).tolist()
    confs = []
    if instance.label_prior.kind == "iid-uniform":
        for i in range(ds.n):
            if ds.counts[ds.points[i]] == 1:
                confs.append(conf_margin(ds, i, instance.label_prior))
    return MetricReport(err=generalization_error(learner, instance), errn=per_ell,
                        mem=mems, loostab=loo_stability(learner, instance), conf=confs)
