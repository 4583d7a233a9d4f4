"""Premium-versus-protection simulation study.

Each replication draws errors from ``alpha * N(0, 1) + (1 - alpha) * N(loc, 1)``
(scaled by sigma) on a fixed design, fits every estimator by MAP under the
flat prior, and accumulates the two error measures. Premiums compare
estimators with the normal model in Scenario 0; protections compare them in
the contaminated scenarios.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimation import NmConfig, map_estimate, ols
from .exceptions import StructuralError
from .models import ErrorModel, Lptn, Normal, Student
from .regression import Dataset, Prior

log = logging.getLogger(__name__)

__all__ = [
    "Scenario",
    "SCENARIOS",
    "CASE_STUDY_BETA",
    "CASE_STUDY_SIGMA",
    "COVARIATE_MEANS",
    "COVARIATE_SDS",
    "case_study_design",
    "generate_replication",
    "error_measures",
    "EstimatorResult",
    "StudyReport",
    "premium_protection",
    "StudyConfig",
    "run_study",
    "default_estimators",
]

#: Generating coefficients and scale of the house-price example.
CASE_STUDY_BETA = np.array([508.88, 1.0, 1.0, 0.5])
CASE_STUDY_SIGMA = 40.0

# Covariate distributions for regenerated designs (sector value, living
# area, land area), centred on their stated sample means. The spreads are
# backed out of the reported posterior interval widths on the clean subsample,
# sd(beta_j) ~ sigma / (sqrt(n) * sd(x_j)), and rounded.
COVARIATE_MEANS = np.array([508.88, 200.0, 500.0])
COVARIATE_SDS = np.array([80.0, 45.0, 80.0])


@dataclass(frozen=True)
class Scenario:
    id: int
    alpha: float
    outlier_location: float
    leverage: bool

    def __post_init__(self):
        if self.alpha not in (1.0, 0.95, 0.90):
            raise ValueError(f"alpha must be 1.0, 0.95 or 0.90; got {self.alpha}")
        if self.leverage != (self.id in (3, 4)):
            raise ValueError("leverage points are used exactly in scenarios 3 and 4")


SCENARIOS = {
    0: Scenario(0, 1.0, 0.0, False),
    1: Scenario(1, 0.95, 7.0, False),
    2: Scenario(2, 0.90, 7.0, False),
    3: Scenario(3, 0.95, 3.0, True),
    4: Scenario(4, 0.90, 3.0, True),
}


def case_study_design(n: int, rng: np.random.Generator) -> np.ndarray:
    """Design with intercept and three covariates centred at their population means."""
    z = rng.normal(COVARIATE_MEANS, COVARIATE_SDS, size=(n, 3)) - COVARIATE_MEANS
    return np.column_stack([np.ones(n), z])


def generate_replication(
    scenario: Scenario,
    design: np.ndarray,
    true_beta,
    true_sigma: float,
    rng: np.random.Generator,
) -> tuple[Dataset, np.ndarray]:
    """Draw one response vector; returns the dataset and the outlier mask.

    In leverage scenarios each outlier's row gets one random covariate
    (never the intercept) set to 1.5 times that column's maximum over the
    original design.
    """
    x = np.array(design, dtype=float, copy=True)
    n, p = x.shape
    outlier = rng.random(n) >= scenario.alpha
    eps = rng.standard_normal(n) + np.where(outlier, scenario.outlier_location, 0.0)
    if scenario.leverage and np.any(outlier):
        col_max = design.max(axis=0)
        rows = np.flatnonzero(outlier)
        cols = rng.integers(1, p, size=rows.size)
        x[rows, cols] = 1.5 * col_max[cols]
    y = x @ np.asarray(true_beta, dtype=float) + true_sigma * eps
    return Dataset(x, y), outlier


def error_measures(estimates, true_beta, true_sigma: float, design) -> tuple[float, float]:
    """Root mean vertical hyperplane distance and root mean squared scale error.

    ``estimates`` is a sequence of ``(beta_hat, sigma_hat)`` pairs.
    """
    if len(estimates) == 0:
        raise ValueError("need at least one estimate")
    x = np.asarray(design, dtype=float)
    n = x.shape[0]
    xtx = x.T @ x
    db = np.array([np.asarray(b, dtype=float) - true_beta for b, _ in estimates])
    ds = np.array([float(s) - true_sigma for _, s in estimates])
    quad = np.einsum("ri,ij,rj->r", db, xtx, db) / n
    return math.sqrt(float(quad.mean())), math.sqrt(float(np.mean(ds * ds)))


@dataclass(frozen=True)
class EstimatorResult:
    estimator: str
    scenario: int
    n: int
    m_beta: float
    m_sigma: float
    replications: int
    failures: int = 0


@dataclass(frozen=True)
class StudyReport:
    """Error measures per (estimator, scenario, n) and the derived premiums/protections."""

    results: tuple[EstimatorResult, ...]
    baseline: str = "normal"
    premium: dict = field(default_factory=dict)
    protection: dict = field(default_factory=dict)

    def rows(self):
        yield [
            "estimator", "scenario", "n", "replications", "failures", "m_beta", "m_sigma",
            "premium_beta", "premium_sigma", "protection_beta", "protection_sigma",
        ]
        for r in self.results:
            prem = self.premium.get((r.estimator, r.n), (math.nan, math.nan))
            prot = self.protection.get((r.estimator, r.scenario, r.n), (math.nan, math.nan))
            yield [
                r.estimator, r.scenario, r.n, r.replications, r.failures, r.m_beta, r.m_sigma,
                *prem, *prot,
            ]


def premium_protection(results, baseline: str = "normal") -> StudyReport:
    """Relative increase in error on clean data and relative decrease on contaminated data."""
    results = tuple(results)
    table = {(r.estimator, r.scenario, r.n): r for r in results}
    premium, protection = {}, {}
    for r in results:
        base = table.get((baseline, r.scenario, r.n))
        if base is None:
            raise StructuralError(
                f"no {baseline!r} baseline for scenario {r.scenario}, n={r.n}"
            )
        if r.scenario == 0:
            premium[(r.estimator, r.n)] = (
                (r.m_beta - base.m_beta) / base.m_beta if base.m_beta else 0.0,
                (r.m_sigma - base.m_sigma) / base.m_sigma if base.m_sigma else 0.0,
            )
        else:
            protection[(r.estimator, r.scenario, r.n)] = (
                (base.m_beta - r.m_beta) / base.m_beta if base.m_beta else 0.0,
                (base.m_sigma - r.m_sigma) / base.m_sigma if base.m_sigma else 0.0,
            )
    return StudyReport(results, baseline, premium, protection)


def default_estimators() -> dict[str, ErrorModel]:
    models: dict[str, ErrorModel] = {"normal": Normal()}
    for rho in (0.80, 0.84, 0.90, 0.93, 0.95, 0.98):
        m = Lptn(rho)
        models[m.label] = m
    for df in (1, 2, 4, 6, 10):
        m = Student(df)
        models[m.label] = m
    return models


@dataclass(frozen=True)
class StudyConfig:
    scenarios: tuple[int, ...] = (0, 1, 2, 3, 4)
    estimators: dict = field(default_factory=default_estimators)
    sample_sizes: tuple[int, ...] = (50, 100)
    replications: int = 2000
    seed: int = 0
    true_beta: tuple[float, ...] = tuple(CASE_STUDY_BETA)
    true_sigma: float = CASE_STUDY_SIGMA
    workers: int = 1


def _fit(data: Dataset, model: ErrorModel, cfg: NmConfig):
    if isinstance(model, Normal):
        # The flat-prior normal MAP is least squares with sigma^2 = RSS / n.
        fit = ols(data)
        return fit.beta, math.sqrt(fit.rss / data.n)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = map_estimate(data, model, Prior.FLAT, cfg)
    return res.params.beta, res.params.sigma


def _replicate(args):
    scenario_id, design, true_beta, true_sigma, estimators, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    data, _ = generate_replication(SCENARIOS[scenario_id], design, true_beta, true_sigma, rng)
    cfg = NmConfig()
    out = {}
    for name, model in estimators.items():
        try:
            out[name] = _fit(data, model, cfg)
        except Exception as exc:  # noqa: BLE001 - failures are counted, not fatal
            log.warning("scenario %d: %s fit failed: %s", scenario_id, name, exc)
            out[name] = None
    return out


def run_study(config: StudyConfig) -> StudyReport:
    """Run every (scenario, n, replication) and fit every estimator.

    Deterministic given ``config.seed``: each (n, scenario, replication) gets
    its own spawned seed, and one design per n is shared by all scenarios and
    replications.
    """
    if "normal" not in config.estimators:
        raise StructuralError("the estimator set must include the 'normal' baseline")
    true_beta = np.asarray(config.true_beta, dtype=float)
    root = np.random.SeedSequence(config.seed)
    design_seeds, rep_seeds = root.spawn(2)
    results = []
    for n, dseed, rseed in zip(
        config.sample_sizes, design_seeds.spawn(len(config.sample_sizes)), rep_seeds.spawn(len(config.sample_sizes))
    ):
        design = case_study_design(n, np.random.default_rng(dseed))
        for scenario_id, sseed in zip(config.scenarios, rseed.spawn(len(config.scenarios))):
            jobs = [
                (scenario_id, design, true_beta, config.true_sigma, config.estimators, s)
                for s in sseed.spawn(config.replications)
            ]
            if config.workers > 1:
                with ProcessPoolExecutor(config.workers) as pool:
                    fits = list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (8 * config.workers))))
            else:
                fits = [_replicate(j) for j in jobs]
            for name in config.estimators:
                ok = [f[name] for f in fits if f[name] is not None]
                failures = len(fits) - len(ok)
                if not ok:
                    raise RuntimeError(f"every {name} fit failed in scenario {scenario_id}, n={n}")
                m_beta, m_sigma = error_measures(ok, true_beta, config.true_sigma, design)
                results.append(EstimatorResult(name, scenario_id, n, m_beta, m_sigma, len(ok), failures))
    return premium_protection(results)
