"""Spherical subpopulation mixtures and linear max-margin models.

A mixture instance places one unit-norm center per subpopulation on the
sphere in R^d, draws a random mixing pmf over subpopulations, and samples
points as center plus a spherically symmetric offset of norm at most 1.
The independence certificate measures how geometrically distinguishable the
subpopulations are; on certified instances an explicit linear construction
separates each class with margin tau/(2 sqrt(n)), and the trained model is
required to achieve at least half of that.  Coupling measures how strongly
a model's prediction at a training point transfers to fresh draws from the
same subpopulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .discrete import LabelPriorSpec
from .errors import SeparationFailureError
from .priors import FrequencyPrior, FrequencySampleSet, sample_frequency_vector
from .rng import derive_rng
from .tails import expectation_ratio

ORTH_TOL = 1e-9


@dataclass(frozen=True)
class MixtureInstance:
    """One sampled mixture problem: geometry, labeling, and dataset."""

    dimension: int
    centers: np.ndarray        # (N, d) unit rows
    coefficients: np.ndarray   # pmf over subpopulations
    labels: np.ndarray         # (N,) class per subpopulation
    points: np.ndarray         # (n, d)
    tags: np.ndarray           # (n,) subpopulation id per point
    point_labels: np.ndarray   # (n,)
    radius_scale: float
    label_prior: LabelPriorSpec
    seed: int
    fresh_points: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        norms = np.linalg.norm(self.centers, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("centers must have unit norm")
        if abs(self.coefficients.sum() - 1.0) > 1e-9:
            raise ValueError("coefficients must sum to 1")
        offsets = self.points - self.centers[self.tags]
        if np.any(np.linalg.norm(offsets, axis=1) > 1.0 + 1e-9):
            raise ValueError("every point must lie within distance 1 of its center")

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @property
    def num_subpops(self) -> int:
        return int(self.centers.shape[0])

    def tag_counts(self) -> np.ndarray:
        return np.bincount(self.tags, minlength=self.num_subpops)

    def sample_from(self, tag: int, rng: np.random.Generator, size: int) -> np.ndarray:
        """Fresh draws from the given subpopulation's distribution."""
        return self.centers[tag] + _ball_offsets(rng, size, self.dimension,
                                                 self.radius_scale)

    def to_csv(self, path: str | Path) -> None:
        header = "subpop,label," + ",".join(f"coord_{j}" for j in range(self.dimension))
        lines = [header]
        for tag, lab, x in zip(self.tags, self.point_labels, self.points):
            coords = ",".join(repr(float(v)) for v in x)
            lines.append(f"{int(tag)},{int(lab)},{coords}")
        Path(path).write_text("\n".join(lines) + "\n")


def _ball_offsets(rng: np.random.Generator, size: int, d: int,
                  radius_scale: float) -> np.ndarray:
    """Spherically symmetric offsets: uniform direction, uniform radius."""
    dirs = rng.normal(size=(size, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius_scale * rng.random(size)
    return radii[:, None] * dirs


def sample_mixture_instance(prior: FrequencyPrior, d: int, num_subpops: int,
                            label_prior: LabelPriorSpec, n: int,
                            fresh_per_subpop: int, seed: int,
                            radius_scale: float = 1.0) -> MixtureInstance:
    """Draw centers, mixing pmf, labels, dataset, and held-out fresh draws.

    ``radius_scale`` shrinks the offset radius (still uniform) to produce
    clustered geometries; 1.0 is the full unit ball.
    """
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    if not 0.0 < radius_scale <= 1.0:
        raise ValueError(f"radius_scale must be in (0, 1], got {radius_scale}")
    rng = derive_rng(seed)
    centers = rng.normal(size=(num_subpops, d))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    coefficients = sample_frequency_vector(prior, num_subpops, rng)
    labels = rng.choice(label_prior.num_classes, size=num_subpops,
                        p=label_prior.label_distribution())
    tags = rng.choice(num_subpops, size=n, p=coefficients)
    points = centers[tags] + _ball_offsets(rng, n, d, radius_scale)
    fresh: dict[int, np.ndarray] = {}
    if fresh_per_subpop > 0:
        for tag in np.unique(tags):
            fresh[int(tag)] = centers[tag] + _ball_offsets(rng, fresh_per_subpop,
                                                           d, radius_scale)
    return MixtureInstance(dimension=d, centers=centers, coefficients=coefficients,
                           labels=labels, points=points, tags=tags,
                           point_labels=labels[tags], radius_scale=radius_scale,
                           label_prior=label_prior, seed=seed, fresh_points=fresh)


def orthonormal_basis(vectors: np.ndarray, tol: float = ORTH_TOL) -> np.ndarray:
    """Gram-Schmidt with one re-orthogonalization pass; drops in-span vectors."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    basis = np.empty((0, vectors.shape[1]))
    for v in vectors:
        w = v.copy()
        for _ in range(2):
            if basis.shape[0]:
                w -= basis.T @ (basis @ w)
        norm = np.linalg.norm(w)
        if norm > tol:
            basis = np.vstack([basis, w / norm])
    return basis


@dataclass(frozen=True)
class IndependenceCertificate:
    tau_measured: float
    theta_measured: float

    def satisfied(self, tau: float, theta: float) -> bool:
        return self.tau_measured >= tau and self.theta_measured <= theta


def independence_certificate(points: np.ndarray, tags: np.ndarray,
                             tau: float | None = None,
                             theta: float | None = None) -> IndependenceCertificate:
    """Measure subpopulation separation: intra alignment and cross-span leakage.

    tau_measured is the minimum normalized inner product between two points
    of the same subpopulation (1.0 when no subpopulation repeats).
    theta_measured is the largest norm of the projection of a unit-normalized
    point onto the span of all points from other subpopulations.
    """
    points = np.asarray(points, dtype=float)
    tags = np.asarray(tags, dtype=np.int64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise ValueError("need a non-empty 2-D point array")
    if not np.all(np.isfinite(points)):
        raise ValueError("points must have finite coordinates")
    unit = points / np.linalg.norm(points, axis=1, keepdims=True)

    tau_measured = 1.0
    for tag in np.unique(tags):
        group = unit[tags == tag]
        if group.shape[0] >= 2:
            inner = group @ group.T
            idx = np.triu_indices(group.shape[0], k=1)
            tau_measured = min(tau_measured, float(inner[idx].min()))

    theta_measured = 0.0
    for tag in np.unique(tags):
        others = points[tags != tag]
        if others.shape[0] == 0:
            continue
        basis = orthonormal_basis(others)
        if basis.shape[0] == 0:
            continue
        proj = unit[tags == tag] @ basis.T
        theta_measured = max(theta_measured, float(np.sqrt((proj ** 2).sum(axis=1)).max()))
    theta_measured = min(theta_measured, 1.0)
    return IndependenceCertificate(tau_measured=tau_measured,
                                   theta_measured=theta_measured)


@dataclass(frozen=True)
class MarginResult:
    w: np.ndarray
    margin: float
    coefficients: np.ndarray  # over the dataset vectors; w = coefficients @ points


def reference_margin_construction(points: np.ndarray, tags: np.ndarray,
                                  point_labels: np.ndarray, k: int) -> MarginResult:
    """Explicit separator for class k vs rest: signed sum of one unit-normalized
    representative per subpopulation.  Margin is measured over all points."""
    points = np.asarray(points, dtype=float)
    tags = np.asarray(tags, dtype=np.int64)
    point_labels = np.asarray(point_labels, dtype=np.int64)
    if points.shape[0] < 1:
        raise ValueError("need at least one point")
    n = points.shape[0]
    norms = np.linalg.norm(points, axis=1)
    unit = points / norms[:, None]
    signs = np.where(point_labels == k, 1.0, -1.0)

    coeff = np.zeros(n)
    for tag in np.unique(tags):
        rep = int(np.flatnonzero(tags == tag)[0])
        coeff[rep] = signs[rep] / norms[rep]
    w = coeff @ points
    w_norm = np.linalg.norm(w)
    if w_norm <= ORTH_TOL:
        raise SeparationFailureError(f"class {k}: reference direction vanished")
    margin = float((signs * (unit @ w)).min() / w_norm)
    return MarginResult(w=w / w_norm, margin=margin, coefficients=coeff / w_norm)


def _min_norm_direction(signed_unit: np.ndarray, tolerance: float,
                        max_iters: int = 2000) -> np.ndarray:
    """Frank-Wolfe minimum-norm point in the convex hull of the signed unit
    points, solved in Gram space.  Returns hull coefficients."""
    n = signed_unit.shape[0]
    gram = signed_unit @ signed_unit.T
    c = np.full(n, 1.0 / n)
    value = float(c @ gram @ c)
    for _ in range(max_iters):
        grad = gram @ c
        j = int(np.argmin(grad))
        diff = c.copy()
        diff[j] -= 1.0
        denom = float(diff @ gram @ diff)
        if denom <= 0.0:
            break
        step = float(diff @ gram @ c) / denom
        step = min(max(step, 0.0), 1.0)
        c = c - step * diff
        new_value = float(c @ gram @ c)
        if value - new_value <= tolerance * max(value, 1e-30):
            value = new_value
            break
        value = new_value
    return c


@dataclass(frozen=True)
class LinearModel:
    """One-vs-rest linear classifiers constrained to the span of the data."""

    weights: np.ndarray        # (m, d) unit rows
    coefficients: np.ndarray   # (m, n); weights = coefficients @ points
    margins: np.ndarray        # (m,)
    points: np.ndarray

    def __post_init__(self):
        norms = np.linalg.norm(self.weights, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("weight vectors must have unit norm")
        recon = self.coefficients @ self.points
        if float(np.abs(recon - self.weights).max()) > 1e-7:
            raise ValueError("weights must reconstruct from their span coefficients")

    @property
    def num_classes(self) -> int:
        return int(self.weights.shape[0])

    def predict_pmf(self, x: np.ndarray) -> np.ndarray:
        """Uniform over the top-scoring positive classes; uniform over all
        classes when no score is positive."""
        scores = self.weights @ np.asarray(x, dtype=float)
        positive = scores > 0.0
        m = self.num_classes
        if not positive.any():
            return np.full(m, 1.0 / m)
        best = scores[positive].max()
        winners = positive & np.isclose(scores, best, rtol=0.0, atol=1e-12)
        return winners / winners.sum()


def train_approx_max_margin(points: np.ndarray, tags: np.ndarray,
                            point_labels: np.ndarray, num_classes: int,
                            tolerance: float = 1e-10) -> LinearModel:
    """Hard-margin one-vs-rest training via minimum-norm-point iteration.

    The iterative solution is compared against the explicit per-subpopulation
    construction and the better margin wins, so the trained model is never
    worse than the reference.  Non-separable classes raise a separation
    failure naming the class.
    """
    points = np.asarray(points, dtype=float)
    tags = np.asarray(tags, dtype=np.int64)
    point_labels = np.asarray(point_labels, dtype=np.int64)
    n = points.shape[0]
    norms = np.linalg.norm(points, axis=1)
    unit = points / norms[:, None]

    weights, coeffs, margins = [], [], []
    for k in range(num_classes):
        signs = np.where(point_labels == k, 1.0, -1.0)
        signed_unit = signs[:, None] * unit
        c = _min_norm_direction(signed_unit, tolerance)
        w = c @ signed_unit
        w_norm = np.linalg.norm(w)
        solver_margin = -np.inf
        if w_norm > ORTH_TOL:
            solver_margin = float((signed_unit @ w).min() / w_norm)
        try:
            ref = reference_margin_construction(points, tags, point_labels, k)
        except SeparationFailureError:
            ref = None
        if ref is not None and ref.margin > solver_margin:
            w_hat, coeff, margin = ref.w, ref.coefficients, ref.margin
        else:
            w_hat = w / w_norm
            coeff = (c * signs / norms) / w_norm
            margin = solver_margin
        if margin <= 0.0:
            raise SeparationFailureError(
                f"class {k} is not linearly separable from the rest "
                f"(best margin {margin!r})")
        weights.append(w_hat)
        coeffs.append(coeff)
        margins.append(margin)
    return LinearModel(weights=np.asarray(weights), coefficients=np.asarray(coeffs),
                       margins=np.asarray(margins), points=points)


PredictFn = Callable[[np.ndarray], np.ndarray]


def one_nearest_neighbor(points: np.ndarray, point_labels: np.ndarray,
                         num_classes: int) -> PredictFn:
    """Deterministic 1-NN predictor returning a one-hot pmf."""
    points = np.asarray(points, dtype=float)
    point_labels = np.asarray(point_labels, dtype=np.int64)

    def predict(x: np.ndarray) -> np.ndarray:
        d2 = ((points - np.asarray(x, dtype=float)) ** 2).sum(axis=1)
        pmf = np.zeros(num_classes)
        pmf[point_labels[int(np.argmin(d2))]] = 1.0
        return pmf

    return predict


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())


def coupling_estimate(predict: PredictFn, instance: MixtureInstance, ell: int,
                      mc: int, seed: int = 0) -> float:
    """1 minus the worst TV between the prediction at a multiplicity-ell
    training point and the mean prediction over fresh same-subpopulation draws."""
    if ell < 1:
        raise ValueError(f"ell must be >= 1, got {ell}")
    counts = instance.tag_counts()
    idx = np.flatnonzero(counts[instance.tags] == ell)
    if idx.size == 0:
        return 1.0
    worst = 0.0
    for i in idx:
        tag = int(instance.tags[i])
        fresh = instance.fresh_points.get(tag)
        if fresh is None or fresh.shape[0] == 0:
            raise ValueError(f"no fresh points recorded for subpopulation {tag}")
        use = fresh[:mc] if mc and mc < fresh.shape[0] else fresh
        p_train = predict(instance.points[i])
        p_fresh = np.mean([predict(x) for x in use], axis=0)
        worst = max(worst, total_variation(p_train, p_fresh))
    return 1.0 - worst


@dataclass(frozen=True)
class PopulationsBoundResult:
    lhs_excess: float
    rhs_sum: float
    gap: float
    gap_se: float


def verify_populations_bound(instance_generator: Callable[[int], MixtureInstance],
                             fit: Callable[[MixtureInstance], PredictFn],
                             samples: FrequencySampleSet, num_instances: int,
                             coupling_mc: int, test_points_per_subpop: int,
                             seed: int) -> PopulationsBoundResult:
    """MC check of excess error >= sum over ell of lambda_ell tau_ell errn(ell).

    Errors are measured against a 1-NN reference on held-out draws from every
    subpopulation; multiplicities are counted at the subpopulation level.
    """
    gaps, lhs_vals, rhs_vals = [], [], []
    for rep in range(num_instances):
        inst = instance_generator(rep)
        predict = fit(inst)
        ref = one_nearest_neighbor(inst.points, inst.point_labels,
                                   inst.label_prior.num_classes)
        rng = derive_rng(seed, rep)
        err_a = err_ref = 0.0
        for tag in range(inst.num_subpops):
            coef = float(inst.coefficients[tag])
            if coef == 0.0:
                continue
            lab = int(inst.labels[tag])
            draws = inst.sample_from(tag, rng, test_points_per_subpop)
            miss_a = np.mean([1.0 - predict(x)[lab] for x in draws])
            miss_r = np.mean([1.0 - ref(x)[lab] for x in draws])
            err_a += coef * float(miss_a)
            err_ref += coef * float(miss_r)
        lhs = err_a - err_ref

        counts = inst.tag_counts()
        rhs = 0.0
        for ell in np.unique(counts[inst.tags]):
            ell = int(ell)
            lam = coupling_estimate(predict, inst, ell, coupling_mc)
            tau_ell = expectation_ratio(samples.values, samples.weights, ell, inst.n)
            mask = counts[inst.tags] == ell
            miss = sum(1.0 - predict(inst.points[i])[inst.point_labels[i]]
                       for i in np.flatnonzero(mask))
            rhs += lam * tau_ell * miss / ell
        lhs_vals.append(lhs)
        rhs_vals.append(rhs)
        gaps.append(lhs - rhs)
    gaps = np.asarray(gaps)
    gap_se = float(gaps.std(ddof=1) / math.sqrt(len(gaps))) if len(gaps) > 1 else 0.0
    return PopulationsBoundResult(lhs_excess=float(np.mean(lhs_vals)),
                                  rhs_sum=float(np.mean(rhs_vals)),
                                  gap=float(gaps.mean()), gap_se=gap_se)
