"""Sampling of complete discrete learning instances and posterior oracles.

An instance is one draw of the full generative process: a random pmf over an
unstructured domain, an independently drawn labeling, an optionally noised
observed labeling, and an i.i.d. dataset.  The brute-force enumerators at the
bottom are deliberately naive; they serve as ground truth for the posterior
frequency formula and the dataset-probability factorization.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ResourceLimitError
from .priors import FrequencyPrior, FrequencySampleSet, sample_frequency_vector
from .rng import derive_rng
from .tails import expectation_ratio

BRUTE_FORCE_BUDGET = 10**8


@dataclass(frozen=True)
class LabelPriorSpec:
    """Label prior: class count, per-point label distribution, and label noise.

    ``noise_kappa`` is the probability that the observed label is kept; with
    probability ``1 - noise_kappa`` it is replaced by a uniform draw over all
    classes (including the true one).
    """

    num_classes: int
    kind: str = "iid-uniform"
    noise_kappa: float = 1.0
    table: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.kind not in ("iid-uniform", "explicit-table"):
            raise ValueError(f"unknown label prior kind {self.kind!r}")
        if not 0.0 <= self.noise_kappa <= 1.0:
            raise ValueError(f"noise_kappa must be in [0, 1], got {self.noise_kappa}")
        if self.kind == "explicit-table":
            if self.table is None or len(self.table) != self.num_classes:
                raise ValueError("explicit-table prior needs a table of length num_classes")
            arr = np.asarray(self.table, dtype=float)
            if np.any(arr < 0.0) or arr.sum() <= 0.0:
                raise ValueError("table entries must be non-negative with positive sum")
            object.__setattr__(self, "table", tuple(arr / arr.sum()))
        elif self.table is not None:
            raise ValueError("iid-uniform prior takes no table")

    def label_distribution(self) -> np.ndarray:
        if self.kind == "iid-uniform":
            return np.full(self.num_classes, 1.0 / self.num_classes)
        return np.asarray(self.table, dtype=float)


@dataclass(frozen=True)
class Dataset:
    """The part of an instance a learner sees: sampled points and observed labels."""

    points: np.ndarray
    labels: np.ndarray
    domain_size: int
    num_classes: int

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.int64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if points.shape != labels.shape or points.ndim != 1:
            raise ValueError("points and labels must be matching 1-D arrays")
        if points.size and (points.min() < 0 or points.max() >= self.domain_size):
            raise ValueError("points outside the domain")
        points.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return int(self.points.size)

    @cached_property
    def counts(self) -> np.ndarray:
        c = np.bincount(self.points, minlength=self.domain_size)
        c.flags.writeable = False
        return c

    @cached_property
    def label_of(self) -> np.ndarray:
        """Observed label per domain element; -1 where unseen."""
        lab = np.full(self.domain_size, -1, dtype=np.int64)
        lab[self.points] = self.labels
        lab.flags.writeable = False
        return lab

    def multiplicity_points(self, ell: int) -> np.ndarray:
        """Domain elements that appear exactly ``ell`` times."""
        return np.flatnonzero(self.counts == ell)


@dataclass(frozen=True)
class DiscreteInstance:
    """One sampled learning problem: pmf, labelings, and dataset."""

    pmf: np.ndarray
    true_labels: np.ndarray
    observed_labels: np.ndarray
    dataset: Dataset
    label_prior: LabelPriorSpec
    seed: int

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        if abs(pmf.sum() - 1.0) > 1e-9:
            raise ValueError("instance pmf must sum to 1")
        if np.any(self.dataset.labels != self.observed_labels[self.dataset.points]):
            raise ValueError("dataset labels must agree with the observed labeling")

    @property
    def domain_size(self) -> int:
        return int(self.pmf.size)

    @property
    def n(self) -> int:
        return self.dataset.n

    def to_json(self, path: str | Path | None = None) -> str:
        doc = {
            "N": self.domain_size,
            "n": self.n,
            "m": self.label_prior.num_classes,
            "seed": self.seed,
            "D": [float(p) for p in self.pmf],
            "f": [int(v) for v in self.true_labels],
            "f_tilde": [int(v) for v in self.observed_labels],
            "S": [[int(x), int(y)] for x, y in zip(self.dataset.points, self.dataset.labels)],
        }
        text = json.dumps(doc, sort_keys=False, separators=(",", ":"))
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


def sample_instance(prior: FrequencyPrior, label_prior: LabelPriorSpec, n: int,
                    seed: int, domain_size: int | None = None) -> DiscreteInstance:
    """Draw (pmf, labeling, noisy labeling, dataset) from the generative process."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    n_dom = prior.n_entries if domain_size is None else domain_size
    rng = derive_rng(seed)
    pmf = sample_frequency_vector(prior, n_dom, rng)
    m = label_prior.num_classes
    true_labels = rng.choice(m, size=n_dom, p=label_prior.label_distribution())
    resample = rng.random(n_dom) > label_prior.noise_kappa
    observed = np.where(resample, rng.integers(0, m, size=n_dom), true_labels)
    points = rng.choice(n_dom, size=n, p=pmf)
    dataset = Dataset(points=points, labels=observed[points],
                      domain_size=n_dom, num_classes=m)
    return DiscreteInstance(pmf=pmf, true_labels=true_labels, observed_labels=observed,
                            dataset=dataset, label_prior=label_prior, seed=seed)


def posterior_mean_frequency(samples: FrequencySampleSet, ell: int, n: int) -> float:
    """Expected frequency of an element observed ``ell`` times (``ell = 0`` allowed)."""
    if not 0 <= ell <= n:
        raise ValueError(f"need 0 <= ell <= n, got ell={ell}, n={n}")
    return expectation_ratio(samples.values, samples.weights, ell, n)


def _assignments(prior: FrequencyPrior, domain_size: int, n: int):
    """Yield (normalized pmf, probability) over all prior-entry assignments."""
    distinct, counts = np.unique(prior.entries, return_counts=True)
    k = distinct.size
    if k ** domain_size * max(domain_size, 1) ** n > BRUTE_FORCE_BUDGET:
        raise ResourceLimitError(
            f"{k}^{domain_size} * {domain_size}^{n} exceeds the brute-force budget "
            f"of {BRUTE_FORCE_BUDGET}")
    probs = counts / prior.n_entries
    for combo in itertools.product(range(k), repeat=domain_size):
        vals = distinct[list(combo)]
        yield vals / vals.sum(), float(np.prod(probs[list(combo)]))


def sequence_probability(prior: FrequencyPrior, domain_size: int,
                         sequence: list[int]) -> float:
    """Exact probability of observing the given point sequence, by enumeration."""
    total = 0.0
    for pmf, p in _assignments(prior, domain_size, len(sequence)):
        total += p * float(np.prod(pmf[list(sequence)]))
    return total


def count_probability(prior: FrequencyPrior, domain_size: int, ell: int, n: int,
                      query_point: int = 0) -> float:
    """Exact probability that ``query_point`` appears exactly ``ell`` times in
    ``n`` draws, by summing sequence probabilities."""
    if not 0 <= ell <= n:
        raise ValueError(f"need 0 <= ell <= n, got ell={ell}")
    total = 0.0
    for seq in itertools.product(range(domain_size), repeat=n):
        if seq.count(query_point) == ell:
            total += sequence_probability(prior, domain_size, list(seq))
    return total


def count_conditional_posterior(prior: FrequencyPrior, domain_size: int, ell: int,
                                n: int, query_point: int = 0) -> float:
    """Exact posterior mean frequency of ``query_point`` given it appears
    exactly ``ell`` times, averaging the per-sequence posterior over all
    sequences with that count."""
    if not 0 <= ell <= n:
        raise ValueError(f"need 0 <= ell <= n, got ell={ell}")
    numerator = 0.0
    denominator = 0.0
    for seq in itertools.product(range(domain_size), repeat=n):
        if seq.count(query_point) != ell:
            continue
        p = sequence_probability(prior, domain_size, list(seq))
        numerator += p * brute_force_posterior(prior, domain_size, list(seq), query_point)
        denominator += p
    if denominator <= 0.0:
        raise ValueError("conditioning event has probability zero")
    return numerator / denominator


def brute_force_posterior(prior: FrequencyPrior, domain_size: int,
                          observed_sequence: list[int], query_point: int) -> float:
    """Exact posterior mean frequency of ``query_point`` given the sequence."""
    if not 0 <= query_point < domain_size:
        raise ValueError(f"query point {query_point} outside the domain")
    numerator = 0.0
    denominator = 0.0
    for pmf, p in _assignments(prior, domain_size, len(observed_sequence)):
        likelihood = p * float(np.prod(pmf[list(observed_sequence)]))
        numerator += likelihood * pmf[query_point]
        denominator += likelihood
    if denominator <= 0.0:
        raise ValueError("observed sequence has probability zero under the prior")
    return numerator / denominator
