"""End-to-end reproduction of the package's reference numbers.

Each row of the table recomputes one headline quantity or bound check from
scratch at its documented scale and compares it against the expected value
at the documented tolerance.  The table is the single acceptance artifact:
all numeric logic lives in the owning modules, this file only orchestrates
and formats.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from math import comb

import numpy as np

from . import discrete, disparity, learners, mixtures, tails
from .discrete import LabelPriorSpec
from .priors import (FrequencyPrior, exact_marginal, marginal_samples,
                     plugin_samples, zipf_prior)
from .rng import derive_rng

DEFAULT_SEED = 7


@dataclass(frozen=True)
class ReproduceRow:
    claim_id: str
    expected: str
    computed: str
    method: str
    tolerance: str
    passed: bool


@dataclass(frozen=True)
class ReproduceTable:
    rows: tuple[ReproduceRow, ...]

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def format(self) -> str:
        headers = ("claim id", "expected", "computed", "method", "tolerance", "status")
        cells = [headers] + [
            (r.claim_id, r.expected, r.computed, r.method, r.tolerance,
             "pass" if r.passed else "FAIL") for r in self.rows]
        widths = [max(len(row[c]) for row in cells) for c in range(len(headers))]
        lines = []
        for i, row in enumerate(cells):
            lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        status = "ALL ROWS PASS" if self.all_passed else "SOME ROWS FAILED"
        lines.append(status)
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["claim_id,expected,computed,method,tolerance,status"]
        for r in self.rows:
            lines.append(",".join([r.claim_id, r.expected, r.computed, r.method,
                                   r.tolerance, "pass" if r.passed else "FAIL"]))
        return "\n".join(lines) + "\n"


def _value_row(claim_id, expected, computed, tol, method) -> ReproduceRow:
    return ReproduceRow(claim_id=claim_id, expected=f"{expected:g}",
                        computed=f"{computed:.6g}", method=method,
                        tolerance=f"abs {tol:g}",
                        passed=abs(computed - expected) <= tol)


def _count_row(claim_id, hits, total, required, method) -> ReproduceRow:
    return ReproduceRow(claim_id=claim_id, expected=f">={required}/{total}",
                        computed=f"{hits}/{total}", method=method,
                        tolerance="count", passed=hits >= required)


def _bound_row(claim_id, computed, bound, method, note="<=") -> ReproduceRow:
    return ReproduceRow(claim_id=claim_id, expected=f"{note} {bound:g}",
                        computed=f"{computed:.3g}", method=method,
                        tolerance="bound", passed=computed <= bound)


# ---------------------------------------------------------------------------
# Row builders


def zipf_tail_rows(seed: int, replicates: int = 200) -> list[ReproduceRow]:
    """Headline Zipf statistics: tau_1 * n, singleton fraction, worst case."""
    n = 50000
    prior = zipf_prior(50000)
    samples = marginal_samples(prior, prior.n_entries, replicates, seed)
    tau1 = tails.tau(samples, 1, n)
    singles = tails.singleton_expectation(samples, n, prior.n_entries)
    worst = float(prior.entries.min()) * n
    return [
        _value_row("zipf-tau1-times-n", 0.47, tau1 * n, 0.03,
                   f"pihat-mc({replicates})"),
        _value_row("zipf-singleton-fraction", 0.17, singles / n, 0.01,
                   f"pihat-mc({replicates})"),
        _value_row("zipf-worst-case-loss", 0.09, worst, 0.005, "deterministic"),
    ]


def binary_example_rows(seed: int, num_instances: int = 40) -> list[ReproduceRow]:
    """Binary Zipf example: optimal error and the singleton-guesser's excess."""
    n = 50000
    prior = zipf_prior(50000)
    label_prior = LabelPriorSpec(num_classes=2)
    opt_learner = learners.memorizer(label_prior)
    guesser = learners.fit_multiplicity_at_least(label_prior, 2)
    opts, excesses = [], []
    for rep in range(num_instances):
        inst = discrete.sample_instance(
            prior, label_prior, n, seed=int(derive_rng(seed, 40, rep).integers(2**63)))
        opt = learners.generalization_error(opt_learner, inst)
        opts.append(opt)
        excesses.append(learners.generalization_error(guesser, inst) - opt)
    return [
        _value_row("binary-optimal-error", 0.085, float(np.mean(opts)), 0.005,
                   f"mc({num_instances} instances)"),
        _value_row("binary-singleton-guess-excess", 0.04, float(np.mean(excesses)),
                   0.005, f"mc({num_instances} instances)"),
    ]


def cost_table_rows() -> list[ReproduceRow]:
    """Closed-form cost table plus the privacy/memorization identity."""
    m, gamma = 10, 0.5
    cells = [
        ("cost-table-5000-50000", 5000, 50000, 0.018, 0.015),
        ("cost-table-5000-10000", 5000, 10000, 0.113, 0.035),
        ("cost-table-25000-50000", 25000, 50000, 0.107, 0.031),
    ]
    rows = []
    for claim, n_entries, n, opt_ref, cost_ref in cells:
        prior = zipf_prior(n_entries)
        rows.append(_value_row(f"{claim}-opt", opt_ref,
                               disparity.opt_error(prior, n, m), 0.002, "pi-plug-in"))
        rows.append(_value_row(f"{claim}-cost", cost_ref,
                               disparity.memorization_cost(prior, n, m, gamma),
                               0.002, "pi-plug-in"))
    prior = zipf_prior(5000)
    diff = abs(disparity.privacy_cost(prior, 50000, m, math.log(6), 0.0)
               - disparity.memorization_cost(prior, 50000, m, gamma))
    rows.append(_bound_row("privacy-equals-memorization", diff, 1e-12, "closed form"))
    return rows


def _oracle_grid() -> list[tuple[FrequencyPrior, int]]:
    return [
        (FrequencyPrior(np.array([0.6, 0.4])), 2),
        (FrequencyPrior(np.array([0.5, 0.3, 0.2])), 3),
        (FrequencyPrior(np.array([0.4, 0.3, 0.2, 0.1])), 4),
        (FrequencyPrior(np.array([0.7, 0.1, 0.1, 0.1])), 3),
    ]


def oracle_rows() -> list[ReproduceRow]:
    """Posterior formula vs sequence enumeration, and the count factorization."""
    worst_post = 0.0
    worst_fact = 0.0
    for prior, n_dom in _oracle_grid():
        samples = exact_marginal(prior, n_dom)
        for n in range(1, 5):
            for ell in range(0, n + 1):
                formula = discrete.posterior_mean_frequency(samples, ell, n)
                brute = discrete.count_conditional_posterior(prior, n_dom, ell, n)
                worst_post = max(worst_post, abs(formula - brute))
                prob = discrete.count_probability(prior, n_dom, ell, n)
                kernel = float(np.dot(samples.weights,
                                      np.exp(tails.log_kernel(samples.values, ell, n))))
                worst_fact = max(worst_fact, abs(prob - n_dom * comb(n, ell) * kernel))
    return [
        _bound_row("oracle-posterior-agreement", worst_post, 1e-9, "enumeration"),
        _bound_row("oracle-count-factorization", worst_fact, 1e-9, "enumeration"),
    ]


def decomposition_rows(seed: int, num_instances: int = 200) -> list[ReproduceRow]:
    """Excess-error decomposition: exact equality small, MC inequality large."""
    label2 = LabelPriorSpec(num_classes=2)
    exact = learners.verify_main_bound_exact(
        FrequencyPrior(np.array([0.5, 0.3, 0.2])), label2, n=3,
        learner=learners.no_fit(label2), domain_size=3)
    rows = [_bound_row("decomposition-exact-equality", abs(exact.gap), 1e-9,
                       "enumeration")]

    n = 1000
    prior = zipf_prior(1000)
    label10 = LabelPriorSpec(num_classes=10)
    samples = marginal_samples(prior, prior.n_entries, 200, seed)
    res = learners.verify_main_bound(prior, label10, n,
                                     learners.fit_multiplicity_at_least(label10, 2),
                                     samples, num_instances, seed)
    rows.append(ReproduceRow(
        claim_id="decomposition-mc-inequality",
        expected=">= -3 SE", computed=f"gap {res.gap:.3g} (SE {res.gap_se:.3g})",
        method=f"mc({num_instances} instances)", tolerance="3 SE",
        passed=res.gap >= -3.0 * res.gap_se))
    return rows


def memorization_identity_rows(seed: int, mc_reps: int = 400) -> list[ReproduceRow]:
    label2 = LabelPriorSpec(num_classes=2)
    label10 = LabelPriorSpec(num_classes=10)

    # fit-memo identity and the gamma cap over a small random corpus
    worst_fit_memo = 0.0
    worst_gamma_excess = -1.0
    gamma = 0.3
    for rep in range(50):
        inst = discrete.sample_instance(
            zipf_prior(50), label10, n=30,
            seed=int(derive_rng(seed, 80, rep).integers(2**63)))
        for lrn in (learners.memorizer(label10),
                    learners.gamma_limited(label10, gamma),
                    learners.rr_label_private(label10, math.log(3))):
            ds = inst.dataset
            rows_full = learners.prediction_matrix(lrn, ds, ds.points)
            scores = learners.mem_scores(lrn, ds)
            idx = np.arange(ds.n)
            miss_full = 1.0 - rows_full[idx, ds.labels]
            miss_removed = miss_full + scores
            counts = ds.counts[ds.points]
            rows_rm = learners._pmf_rows(lrn, counts - 1, ds.labels)
            direct = 1.0 - rows_rm[idx, ds.labels]
            worst_fit_memo = max(worst_fit_memo,
                                 float(np.abs(miss_removed - direct).max()))
            if lrn.kind == learners.GAMMA_LIMITED:
                worst_gamma_excess = max(worst_gamma_excess, float(scores.max()) - gamma)

    exact = learners.verify_mem_gap_exact(
        learners.memorizer(label2), pmf=np.array([0.6, 0.4]),
        labels=np.array([0, 1]), n=2, num_classes=2)
    rows = [
        _bound_row("fit-memo-identity", worst_fit_memo, 1e-12, "closed form"),
        _bound_row("mem2gap-exact", abs(exact.avg_mem - exact.emp_gap), 1e-12,
                   "enumeration"),
        _bound_row("gamma-cap", worst_gamma_excess, 1e-12, "closed form",
                   note="<= gamma +"),
    ]

    inst = discrete.sample_instance(zipf_prior(1000), label10, n=1000,
                                    seed=int(derive_rng(seed, 81).integers(2**63)))
    res = learners.verify_mem_gap_identity(learners.memorizer(label10), inst,
                                           mc_reps, seed)
    rows.append(ReproduceRow(
        claim_id="mem2gap-mc",
        expected="|diff| <= 3 SE",
        computed=f"diff {res.avg_mem - res.emp_gap:.3g} (SE {res.se:.3g})",
        method=f"mc({mc_reps})", tolerance="3 SE",
        passed=abs(res.avg_mem - res.emp_gap) <= 3.0 * res.se))
    return rows


def random_prior(rng: np.random.Generator) -> FrequencyPrior:
    """A random test prior: Dirichlet weights over a random support size."""
    n_entries = int(rng.integers(100, 1000))
    entries = rng.dirichlet(np.full(n_entries, rng.uniform(0.5, 3.0)))
    entries = np.maximum(entries, 1e-12)
    return FrequencyPrior(entries / entries.sum())


def make_gap_prior(rng: np.random.Generator, n: int = 1000) -> tuple[FrequencyPrior, float]:
    """A prior with one tiny entry and a hole above it, plus the theta to use.

    The heavy entries sit well above the forbidden band (theta, t/n], so the
    no-middle upper bound applies with theta just under 1/(2n).
    """
    theta = 0.9 / (2 * n)
    small = float(rng.uniform(5e-5, 1.5e-4))
    heavy_count = int(rng.integers(28, 38))
    heavy = (1.0 - small) / heavy_count
    entries = np.concatenate([[small], np.full(heavy_count, heavy)])
    return FrequencyPrior(entries), theta


def bound_suite_rows(seed: int, trials: int = 100) -> list[ReproduceRow]:
    n = 1000
    lower_hits = 0
    for t in range(trials):
        rng = derive_rng(seed, 90, t)
        prior = random_prior(rng)
        samples = marginal_samples(prior, prior.n_entries, 20,
                                   int(rng.integers(2**63)))
        if tails.tau1_lower_bound(samples, n, prior.n_entries) <= tails.tau(samples, 1, n):
            lower_hits += 1

    gap_hits = 0
    for t in range(20):
        rng = derive_rng(seed, 91, t)
        prior, theta = make_gap_prior(rng, n)
        samples = marginal_samples(prior, prior.n_entries, 50,
                                   int(rng.integers(2**63)))
        bound = tails.tau1_no_middle_upper(samples, n, theta, prior.n_entries)
        if tails.tau(samples, 1, n) <= bound:
            gap_hits += 1

    relate_hits = 0
    for t in range(trials):
        rng = derive_rng(seed, 92, t)
        prior = random_prior(rng)
        n_dom = prior.n_entries
        res = tails.relate_priors_check(prior, lo=0.5 / n_dom, hi=4.0 / n_dom,
                                        gamma=0.5, replicates=50,
                                        seed=int(rng.integers(2**63)))
        if res.lhs >= res.rhs:
            relate_hits += 1
    return [
        _count_row("tau1-lower-bound", lower_hits, trials, trials, "pihat-mc"),
        _count_row("no-middle-upper-bound", gap_hits, 20, 20, "pihat-mc"),
        _count_row("relate-priors", relate_hits, trials, trials, "pihat-mc"),
    ]


def coupling_rows(seed: int, num_seeds: int = 100, d: int = 10000,
                  n: int = 50) -> list[ReproduceRow]:
    """Spherical-model run: certificate rate, margin floors, coupling level."""
    prior = zipf_prior(500)
    label_prior = LabelPriorSpec(num_classes=2)
    cert_hits = solver_hits = ref_hits = 0
    lambda_min = 1.0
    for s in range(num_seeds):
        inst = mixtures.sample_mixture_instance(
            prior, d, 500, label_prior, n, fresh_per_subpop=20,
            seed=int(derive_rng(seed, 100, s).integers(2**63)))
        cert = mixtures.independence_certificate(inst.points, inst.tags)
        tau_m = cert.tau_measured
        if cert.satisfied(tau_m, tau_m ** 2 / (8.0 * math.sqrt(n))):
            cert_hits += 1
        model = mixtures.train_approx_max_margin(inst.points, inst.tags,
                                                 inst.point_labels, 2)
        if float(model.margins.min()) >= tau_m / (4.0 * math.sqrt(n)):
            solver_hits += 1
        ref_margin = min(
            mixtures.reference_margin_construction(inst.points, inst.tags,
                                                   inst.point_labels, k).margin
            for k in range(2))
        if ref_margin >= tau_m / (2.0 * math.sqrt(n)):
            ref_hits += 1
        lambda_min = min(lambda_min,
                         mixtures.coupling_estimate(model.predict_pmf, inst, 1, 20))
    return [
        _count_row("coupling-certificate", cert_hits, num_seeds,
                   math.ceil(0.95 * num_seeds), "mc"),
        _count_row("coupling-solver-margin", solver_hits, num_seeds, num_seeds, "mc"),
        _count_row("coupling-reference-margin", ref_hits, num_seeds, num_seeds, "mc"),
        ReproduceRow(claim_id="coupling-lambda1", expected=">= 0.95",
                     computed=f"{lambda_min:.4g}", method="mc", tolerance="bound",
                     passed=lambda_min >= 0.95),
    ]


def run_reproduction(seed: int = DEFAULT_SEED, coupling_seeds: int = 100,
                     rows_filter: list[str] | None = None) -> ReproduceTable:
    builders = [
        ("zipf", lambda: zipf_tail_rows(seed)),
        ("binary", lambda: binary_example_rows(seed)),
        ("cost-table", cost_table_rows),
        ("oracle", oracle_rows),
        ("decomposition", lambda: decomposition_rows(seed)),
        ("memorization", lambda: memorization_identity_rows(seed)),
        ("bounds", lambda: bound_suite_rows(seed)),
        ("coupling", lambda: coupling_rows(seed, num_seeds=coupling_seeds)),
    ]
    rows: list[ReproduceRow] = []
    for group, build in builders:
        if rows_filter and group not in rows_filter:
            continue
        rows.extend(build())
    return ReproduceTable(rows=tuple(rows))
