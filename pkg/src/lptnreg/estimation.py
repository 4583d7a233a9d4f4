"""Point estimates: OLS, MAP/MLE by Nelder-Mead, and the conjugate normal posterior."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg, optimize, stats

from .exceptions import ConvergenceWarning, DomainError, RankDeficiencyError, UnsupportedModelError
from .models import ErrorModel, Normal
from .regression import (
    Dataset,
    Parameters,
    Prior,
    center_covariates,
    make_log_target,
    uncenter_beta,
    validate_propriety,
)

__all__ = [
    "OlsFit",
    "ols",
    "NmConfig",
    "MapResult",
    "map_estimate",
    "mle_estimate",
    "ConjugatePosterior",
    "conjugate_posterior",
]


class OlsFit(NamedTuple):
    beta: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray

    @property
    def rss(self) -> float:
        return float(self.residuals @ self.residuals)


def _qr(x):
    q, r = linalg.qr(x, mode="economic")
    d = np.abs(np.diag(r))
    if d.size == 0 or d.min() <= max(x.shape) * np.finfo(float).eps * d.max():
        raise RankDeficiencyError("design matrix is rank deficient; X'X is singular")
    return q, r


def ols(data: Dataset) -> OlsFit:
    """Least squares through a thin QR factorization of the design."""
    q, r = _qr(data.x)
    beta = linalg.solve_triangular(r, q.T @ data.y)
    fitted = data.x @ beta
    return OlsFit(beta, fitted, data.y - fitted)


@dataclass(frozen=True)
class NmConfig:
    """Nelder-Mead settings. ``init=None`` starts from the least-squares fit."""

    max_evals: int = 50_000
    x_tol: float = 1e-8
    f_tol: float = 1e-10
    restarts: int = 3
    init: Parameters | None = None

    def __post_init__(self):
        if not (self.x_tol > 0 and self.f_tol > 0):
            raise DomainError("Nelder-Mead tolerances must be positive")
        if self.max_evals < 1 or self.restarts < 0:
            raise DomainError("max_evals must be >= 1 and restarts >= 0")


class MapResult(NamedTuple):
    params: Parameters
    value: float


def _simplex(x0, steps):
    sim = np.tile(x0, (x0.size + 1, 1))
    sim[1:] += np.diag(steps)
    return sim


def _nelder_mead(fun, starts, steps, cfg: NmConfig):
    """Minimize ``fun`` from each start, re-inflating the simplex up to ``cfg.restarts`` times.

    Returns ``(x, f, converged)`` for the best start; ties go to the earliest.
    """
    best = None
    for x0 in starts:
        x = np.asarray(x0, dtype=float)
        f = fun(x)
        budget = cfg.max_evals
        converged = False
        for _ in range(cfg.restarts + 1):
            res = optimize.minimize(
                fun,
                x,
                method="Nelder-Mead",
                options={
                    "initial_simplex": _simplex(x, steps),
                    "xatol": cfg.x_tol,
                    "fatol": cfg.f_tol,
                    "maxfev": budget,
                    "maxiter": budget,
                },
            )
            budget -= res.nfev
            improved = f - res.fun
            converged = bool(res.success)
            if res.fun <= f:
                x, f = res.x, float(res.fun)
            if not converged or budget <= 0 or improved <= cfg.f_tol:
                break
        if best is None or f < best[1]:
            best = (x, f, converged)
    return best


def map_estimate(
    data: Dataset,
    model: ErrorModel,
    prior: Prior = Prior.RECIPROCAL_SIGMA,
    cfg: NmConfig | None = None,
) -> MapResult:
    """Posterior mode over ``(beta, log sigma)``.

    The search runs on centered covariates and the result is reported on the
    original scale; centering only moves the intercept, so the objective value
    is unchanged. Starts from the least-squares fit with two scale guesses
    (residual standard deviation and a MAD-based robust one) unless
    ``cfg.init`` is given.
    """
    cfg = cfg or NmConfig()
    check = validate_propriety(data.n, data.p)
    if not check:
        raise DomainError(check.reason)
    centered, means = center_covariates(data)
    target = make_log_target(centered, model, prior)

    def neg(theta):
        if not -700.0 < theta[-1] < 700.0:
            return math.inf
        v = target(theta[:-1], math.exp(theta[-1]))
        return -v if math.isfinite(v) else math.inf

    fit = ols(centered)
    dof = max(data.n - data.p, 1)
    s = math.sqrt(fit.rss / dof) or 1.0
    mad = 1.4826 * float(np.median(np.abs(fit.residuals - np.median(fit.residuals))))
    if cfg.init is not None:
        b0 = np.asarray(cfg.init.beta, dtype=float).copy()
        b0[0] += b0[1:] @ means
        starts = [np.append(b0, math.log(cfg.init.sigma))]
    else:
        starts = [np.append(fit.beta, math.log(s))]
        if mad > 0 and abs(math.log(mad / s)) > 1e-3:
            starts.append(np.append(fit.beta, math.log(mad)))

    # Simplex edges on the scale of the least-squares standard errors.
    _, r = _qr(centered.x)
    rinv = linalg.solve_triangular(r, np.eye(data.p))
    se = s * np.sqrt(np.sum(rinv * rinv, axis=1))
    steps = np.append(np.maximum(se, 1e-8 * (1.0 + np.abs(fit.beta))), 0.1)

    x, f, converged = _nelder_mead(neg, starts, steps, cfg)
    if not converged:
        warnings.warn(
            f"Nelder-Mead used its budget of {cfg.max_evals} evaluations without meeting "
            "its tolerances; returning the best point found",
            ConvergenceWarning,
            stacklevel=2,
        )
    beta = uncenter_beta(x[:-1], means)
    return MapResult(Parameters(beta, math.exp(x[-1])), -f)


def mle_estimate(data: Dataset, model: ErrorModel, cfg: NmConfig | None = None) -> MapResult:
    """Maximum likelihood estimate, i.e. the MAP under the flat prior."""
    return map_estimate(data, model, Prior.FLAT, cfg)


@dataclass(frozen=True)
class ConjugatePosterior:
    """Closed-form posterior of the normal model under ``pi ∝ 1/sigma``.

    ``beta | sigma ~ N(mean, sigma^2 * cov_factor)`` and
    ``sigma^2 ~ Inverse-Gamma(shape, rate)``.
    """

    mean: np.ndarray
    cov_factor: np.ndarray
    shape: float
    rate: float

    @property
    def sigma2(self):
        """Frozen scipy distribution of ``sigma^2``."""
        return stats.invgamma(self.shape, scale=self.rate)

    @property
    def beta_marginal(self):
        """Multivariate t marginal of ``beta`` with ``2 * shape`` degrees of freedom."""
        df = 2.0 * self.shape
        return stats.multivariate_t(self.mean, self.rate / self.shape * self.cov_factor, df=df)

    def beta_sd(self) -> np.ndarray:
        """Marginal posterior standard deviations of ``beta`` (need ``shape > 1``)."""
        return np.sqrt(self.rate / (self.shape - 1.0) * np.diag(self.cov_factor))


def conjugate_posterior(
    data: Dataset, model: ErrorModel = Normal(), prior: Prior = Prior.RECIPROCAL_SIGMA
) -> ConjugatePosterior:
    if not isinstance(model, Normal):
        raise UnsupportedModelError("the conjugate posterior exists only for normal errors")
    if prior is not Prior.RECIPROCAL_SIGMA:
        raise UnsupportedModelError("the conjugate posterior is implemented for pi ∝ 1/sigma only")
    if data.n <= data.p:
        raise DomainError(f"need n > p, got n={data.n}, p={data.p}")
    fit = ols(data)
    _, r = _qr(data.x)
    rinv = linalg.solve_triangular(r, np.eye(data.p))
    return ConjugatePosterior(
        mean=fit.beta,
        cov_factor=rinv @ rinv.T,
        shape=0.5 * (data.n - data.p),
        rate=0.5 * fit.rss,
    )
