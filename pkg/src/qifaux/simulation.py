"""Synthetic data generators and the Monte Carlo study harness.

The bundled designs draw q = 3 repeated Gaussian responses per subject from

    E(Y_j | x) = beta_1 * x_j1 + beta_2 * x_2,

with a time-varying first covariate (multivariate normal with CS, AR(1) or
independent correlation), a time-constant Bernoulli(0.5) second covariate,
and a unit-variance response correlation matrix. Auxiliary information uses
either the two-group split on x_2 or the four-group split crossing the sign
of X_11 with x_2.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy import stats

from .auxiliary import AuxiliaryInfo, SubgroupPartition, estimate_phi
from .basis import CorrelationStructure, build_basis, correlation_matrix
from .errors import QifauxError, TooManyFailures
from .estimator import (
    ExtendedScoreConfig,
    FitOptions,
    fit,
    profile_test,
    wald_interval,
)
from .model import LongitudinalDataset, MarginalModelSpec

_ROLE_DATA = 0
_ROLE_HOLDOUT = 1

METHODS = ("qif", "gmmai2", "gmmai4")


class AuxMode(Enum):
    NONE = "none"
    TWO_GROUP = "two_group"
    FOUR_GROUP = "four_group"

    @classmethod
    def from_name(cls, name: str) -> "AuxMode":
        key = name.strip().lower()
        for mode in cls:
            if key == mode.value or key == mode.name.lower():
                return mode
        raise ValueError(f"unknown aux mode {name!r}")


class PhiSource(Enum):
    TRUE_VALUES = "true"
    HELD_OUT = "holdout"

    @classmethod
    def from_name(cls, name: str) -> "PhiSource":
        key = name.strip().lower()
        for src in cls:
            if key == src.value or key == src.name.lower():
                return src
        raise ValueError(f"unknown phi source {name!r}")


@dataclass(frozen=True)
class SimulationDesign:
    """Everything needed to reproduce one Monte Carlo study."""

    n: int
    beta_true: tuple = (0.5, -0.5)
    sigma_x_structure: CorrelationStructure = CorrelationStructure.COMPOUND_SYMMETRY
    rho_x: float = 0.5
    sigma_y_structure: CorrelationStructure = CorrelationStructure.COMPOUND_SYMMETRY
    rho_y: float = 0.5
    working: CorrelationStructure = CorrelationStructure.COMPOUND_SYMMETRY
    aux_mode: AuxMode = AuxMode.NONE
    phi_source: PhiSource = PhiSource.TRUE_VALUES
    held_out_m: int = 5000
    seed: int = 0
    replications: int = 500

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if len(self.beta_true) != 2:
            raise ValueError("bundled designs use a two-dimensional coefficient")
        for structure, rho in (
            (self.sigma_x_structure, self.rho_x),
            (self.sigma_y_structure, self.rho_y),
        ):
            corr = correlation_matrix(structure, 3, rho)
            if np.linalg.eigvalsh(corr).min() <= 0:
                raise ValueError(
                    f"{structure.value} correlation with rho={rho} is not positive definite"
                )

    @property
    def q(self) -> int:
        return 3

    @property
    def p(self) -> int:
        return 2


def replication_rng(seed: int, replication: int, role: int) -> np.random.Generator:
    """Counter-based stream for one (replication, role) cell.

    The Philox counter is keyed by the design seed with the role and
    replication index placed in the high counter words, so streams never
    overlap and draws cannot be reordered by parallel scheduling.
    """
    bit_gen = np.random.Philox(key=seed, counter=[0, 0, role, replication])
    return np.random.Generator(bit_gen)


def generate_dataset(design: SimulationDesign, rng: np.random.Generator) -> LongitudinalDataset:
    """One synthetic panel: n subjects, q = 3 observations, p = 2 covariates."""
    n, q = design.n, design.q
    chol_x = np.linalg.cholesky(
        correlation_matrix(design.sigma_x_structure, q, design.rho_x)
    )
    chol_y = np.linalg.cholesky(
        correlation_matrix(design.sigma_y_structure, q, design.rho_y)
    )
    x1 = rng.standard_normal((n, q)) @ chol_x.T
    x2 = rng.integers(0, 2, size=n).astype(float)
    b1, b2 = design.beta_true
    mu = b1 * x1 + b2 * x2[:, None]
    y = mu + rng.standard_normal((n, q)) @ chol_y.T
    covariates = np.empty((n, q, 2))
    covariates[:, :, 0] = x1
    covariates[:, :, 1] = x2[:, None]
    return LongitudinalDataset(y, covariates)


def two_group_partition() -> SubgroupPartition:
    """Split on the time-constant second covariate: x_2 = 1 vs x_2 = 0."""

    def assign(covariates):
        return 0 if covariates[0, 1] == 1.0 else 1

    def assign_batch(covariates):
        return np.where(covariates[:, 0, 1] == 1.0, 0, 1)

    return SubgroupPartition(2, assign, assign_batch, ("x2=1", "x2=0"))


def four_group_partition() -> SubgroupPartition:
    """Cross the sign of the first baseline covariate with x_2."""

    def assign(covariates):
        positive = covariates[0, 0] >= 0.0
        first = covariates[0, 1] == 1.0
        return (0 if positive else 1) if first else (2 if positive else 3)

    def assign_batch(covariates):
        negative = (covariates[:, 0, 0] < 0.0).astype(int)
        second = (covariates[:, 0, 1] != 1.0).astype(int)
        return negative + 2 * second

    labels = ("x11>=0,x2=1", "x11<0,x2=1", "x11>=0,x2=0", "x11<0,x2=0")
    return SubgroupPartition(4, assign, assign_batch, labels)


def build_two_group_aux(beta2: float = -0.5) -> AuxiliaryInfo:
    """Known subgroup means for the two-group split.

    Conditional on x_2 the response mean is (beta2 * x_2) in every
    component, so the targets are exact constants.
    """
    phi1 = np.full(3, beta2)
    phi2 = np.zeros(3)
    return AuxiliaryInfo(two_group_partition(), (phi1, phi2))


def analytic_four_group_phi(design: SimulationDesign) -> list[np.ndarray]:
    """Exact conditional means E(Y | Omega_k) for the four-group split.

    Conditioning on the sign of X_11 shifts each component of the baseline
    covariate by its correlation with X_11 times the half-normal mean
    sqrt(2/pi); the x_2 term adds beta_2 in the x_2 = 1 groups.
    """
    b1, b2 = design.beta_true
    half_normal_mean = math.sqrt(2.0 / math.pi)
    corr_row = correlation_matrix(design.sigma_x_structure, design.q, design.rho_x)[0]
    shift = b1 * half_normal_mean * corr_row
    return [
        shift + b2,
        -shift + b2,
        shift + 0.0,
        -shift + 0.0,
    ]


def build_four_group_aux(
    design: SimulationDesign,
    rng: np.random.Generator | None = None,
    phi_source: PhiSource | None = None,
) -> AuxiliaryInfo:
    """Four-group auxiliary information with analytic or estimated targets.

    Held-out estimation simulates an independent panel of ``held_out_m``
    subjects at the true coefficients (m >= 400 keeps roughly 100 subjects
    per cell) and averages the responses within each subgroup.
    """
    source = phi_source if phi_source is not None else design.phi_source
    partition = four_group_partition()
    if source is PhiSource.TRUE_VALUES:
        return AuxiliaryInfo(partition, tuple(analytic_four_group_phi(design)))
    if design.held_out_m < 400:
        raise ValueError("held-out estimation needs m >= 400")
    if rng is None:
        raise ValueError("held-out estimation needs an RNG stream")
    holdout = generate_dataset(replace(design, n=design.held_out_m), rng)
    phis, _ = estimate_phi(holdout, partition)
    return AuxiliaryInfo(partition, tuple(phis))


@dataclass(frozen=True)
class Hypothesis:
    """Point null on a subset of coefficients, tested by the profile statistic."""

    label: str
    indices: tuple
    values: tuple
    level: float = 0.05


@dataclass(frozen=True)
class MonteCarloSummary:
    """Aggregated per-coefficient performance over the replications."""

    method: str
    replications: int
    failures: int
    bias: np.ndarray
    sd: np.ndarray
    se: np.ndarray
    cp: np.ndarray
    re: np.ndarray | None = None
    baseline: str | None = None
    power: dict = field(default_factory=dict)
    statistics: dict = field(default_factory=dict)
    estimates: np.ndarray | None = None


def _method_aux_factory(method: str, design: SimulationDesign):
    """Returns a callable (replication -> AuxiliaryInfo | None)."""
    name = method.strip().lower()
    if name == "qif":
        return lambda r: None
    if name == "gmmai2":
        aux = build_two_group_aux(design.beta_true[1])
        return lambda r: aux
    if name == "gmmai4":
        if design.phi_source is PhiSource.TRUE_VALUES:
            aux = build_four_group_aux(design)
            return lambda r: aux
        return lambda r: build_four_group_aux(
            design, replication_rng(design.seed, r, _ROLE_HOLDOUT)
        )
    raise ValueError(f"unknown method {name!r}; expected one of {METHODS}")


def _one_replication(r, design, methods, aux_factories, basis, spec, hypotheses, options, level):
    dataset = generate_dataset(design, replication_rng(design.seed, r, _ROLE_DATA))
    beta0 = np.asarray(design.beta_true, dtype=float)
    record = {}
    for method in methods:
        config = ExtendedScoreConfig(spec, basis, aux_factories[method](r))
        try:
            result = fit(config, dataset, options=options)
            if not result.converged:
                record[method] = None
                continue
        except QifauxError:
            record[method] = None
            continue
        covered = np.zeros(dataset.p, dtype=bool)
        for j in range(dataset.p):
            lo, hi = wald_interval(result, j, level)
            covered[j] = lo <= beta0[j] <= hi
        tests = {}
        for hyp in hypotheses:
            try:
                outcome = profile_test(
                    config,
                    dataset,
                    hyp.indices,
                    hyp.values,
                    options=options,
                    unrestricted=result,
                )
            except QifauxError:
                tests[hyp.label] = None
                continue
            tests[hyp.label] = (outcome.statistic, outcome.p_value < hyp.level)
        record[method] = (result.beta_hat, result.se, covered, tests)
    return record


def run_monte_carlo(
    design: SimulationDesign,
    methods=("qif",),
    hypotheses=(),
    options: FitOptions | None = None,
    interval_level: float = 0.95,
    n_jobs: int = 1,
    max_failure_share: float = 0.05,
) -> dict:
    """Replicate the design and aggregate Bias/SD/SE/CP/RE and test power.

    Each replication draws a fresh panel from its own counter-based stream,
    fits every requested method, records 95% interval coverage and any
    profile tests, and failed replications (non-convergence or estimation
    errors) are excluded with their count reported on the summary. Raises
    TooManyFailures when a method loses more than ``max_failure_share`` of
    its replications.
    """
    methods = [m.strip().lower() for m in methods]
    if not methods:
        raise ValueError("need at least one method")
    options = options or FitOptions()
    hypotheses = tuple(hypotheses)
    spec = MarginalModelSpec.gaussian()
    basis = build_basis(design.working, design.q)
    aux_factories = {m: _method_aux_factory(m, design) for m in methods}
    reps = design.replications

    def work(r):
        return _one_replication(
            r, design, methods, aux_factories, basis, spec, hypotheses,
            options, interval_level,
        )

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            records = list(pool.map(work, range(reps)))
    else:
        records = [work(r) for r in range(reps)]

    beta0 = np.asarray(design.beta_true, dtype=float)
    summaries = {}
    for method in methods:
        rows = [records[r][method] for r in range(reps)]
        ok = [row for row in rows if row is not None]
        failures = reps - len(ok)
        if failures > max_failure_share * reps:
            raise TooManyFailures(
                f"{method}: {failures}/{reps} replications failed"
            )
        estimates = np.array([row[0] for row in ok])
        ses = np.array([row[1] for row in ok])
        covers = np.array([row[2] for row in ok])
        bias = estimates.mean(axis=0) - beta0
        sd = (
            estimates.std(axis=0, ddof=1)
            if len(ok) > 1
            else np.full(design.p, np.nan)
        )
        power = {}
        statistics = {}
        for hyp in hypotheses:
            outcomes = [row[3][hyp.label] for row in ok if row[3][hyp.label] is not None]
            if outcomes:
                stats_arr = np.array([o[0] for o in outcomes])
                power[hyp.label] = float(np.mean([o[1] for o in outcomes]))
                statistics[hyp.label] = stats_arr
            else:
                power[hyp.label] = float("nan")
                statistics[hyp.label] = np.zeros(0)
        summaries[method] = MonteCarloSummary(
            method=method,
            replications=len(ok),
            failures=failures,
            bias=bias,
            sd=sd,
            se=ses.mean(axis=0),
            cp=covers.mean(axis=0),
            power=power,
            statistics=statistics,
            estimates=estimates,
        )
    if "qif" in summaries:
        base_sd = summaries["qif"].sd
        for method, summary in summaries.items():
            summaries[method] = replace(
                summary, re=(base_sd / summary.sd) ** 2, baseline="qif"
            )
    return summaries


def qq_data(
    design: SimulationDesign,
    hypothesis: Hypothesis,
    method: str,
    replications: int | None = None,
    options: FitOptions | None = None,
) -> np.ndarray:
    """(R, 2) array pairing chi-square(1) quantiles with sorted statistics.

    Theoretical quantiles are taken at (i - 0.5) / R. The hypothesis must
    be true under the design for the pairs to be comparable.
    """
    if replications is not None:
        design = replace(design, replications=replications)
    summaries = run_monte_carlo(
        design, [method], hypotheses=[hypothesis], options=options
    )
    sample = np.sort(summaries[method.strip().lower()].statistics[hypothesis.label])
    r = sample.shape[0]
    grid = (np.arange(1, r + 1) - 0.5) / r
    theoretical = stats.chi2.ppf(grid, df=len(hypothesis.indices))
    return np.column_stack([theoretical, sample])
