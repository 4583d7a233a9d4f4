"""Linear regression data, priors and the unnormalized log-posterior.

The model is ``y_i = x_i' beta + sigma * eps_i`` with ``eps_i ~ f`` and a
noninformative prior on ``(beta, sigma)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, ShapeError
from .models import ErrorModel

__all__ = [
    "Dataset",
    "Parameters",
    "Prior",
    "Check",
    "log_likelihood",
    "log_posterior",
    "validate_propriety",
    "center_covariates",
    "uncenter",
    "uncenter_beta",
]


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``x`` (first column all ones) and response ``y``."""

    x: np.ndarray
    y: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.array(self.x, dtype=float, copy=True)
        y = np.array(self.y, dtype=float, copy=True).reshape(-1)
        if x.ndim != 2:
            raise ShapeError(f"design matrix must be 2-D, got shape {x.shape}")
        n, p = x.shape
        if y.shape[0] != n:
            raise ShapeError(f"design has {n} rows but response has {y.shape[0]} entries")
        if p < 1 or n < p:
            raise ShapeError(f"need at least p={p} observations, got n={n}")
        if not np.all(x[:, 0] == 1.0):
            raise ShapeError("first column of the design matrix must be identically 1")
        if self.names is not None and len(self.names) != p:
            raise ShapeError(f"{len(self.names)} coefficient names for {p} columns")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_covariates(cls, covariates, y, names=None) -> "Dataset":
        """Build a dataset by prepending an intercept column to ``covariates``."""
        z = np.asarray(covariates, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        x = np.column_stack([np.ones(z.shape[0]), z])
        if names is not None:
            names = ("intercept", *names)
        return cls(x, y, names)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def coef_names(self) -> tuple[str, ...]:
        if self.names is not None:
            return self.names
        return tuple(f"beta{j + 1}" for j in range(self.p))

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.x[rows], self.y[rows], self.names)

    def drop(self, index: int) -> "Dataset":
        keep = np.ones(self.n, dtype=bool)
        keep[index] = False
        return self.subset(keep)

    def with_response(self, index: int, value: float) -> "Dataset":
        y = self.y.copy()
        y[index] = value
        return Dataset(self.x, y, self.names)

    def drop_column(self, j: int) -> "Dataset":
        """Remove coefficient column ``j`` (0-based); the intercept cannot be dropped."""
        if j == 0:
            raise DomainError("the intercept column cannot be removed")
        names = None if self.names is None else self.names[:j] + self.names[j + 1:]
        return Dataset(np.delete(self.x, j, axis=1), self.y, names)


@dataclass(frozen=True)
class Parameters:
    beta: np.ndarray
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float).reshape(-1))
        object.__setattr__(self, "sigma", float(self.sigma))
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")

    def as_vector(self) -> np.ndarray:
        """Unconstrained coordinates ``(beta, log sigma)``."""
        return np.append(self.beta, math.log(self.sigma))

    @classmethod
    def from_vector(cls, theta) -> "Parameters":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:-1], math.exp(theta[-1]))


class Prior(enum.Enum):
    """The two default noninformative priors on ``(beta, sigma)``."""

    RECIPROCAL_SIGMA = "recip-sigma"
    FLAT = "flat"

    def log_density(self, sigma):
        if self is Prior.RECIPROCAL_SIGMA:
            return -np.log(sigma)
        return np.zeros_like(np.asarray(sigma, dtype=float))

    @classmethod
    def parse(cls, text: str) -> "Prior":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise DomainError(f"unknown prior {text!r}; expected recip-sigma or flat") from None


@dataclass(frozen=True)
class Check:
    """Outcome of a structural condition check."""

    ok: bool
    reason: str = ""
    margin: float | None = None

    def __bool__(self) -> bool:
        return self.ok


def _check_dims(beta, data: Dataset):
    if beta.shape != (data.p,):
        raise ShapeError(f"beta has shape {beta.shape}, expected ({data.p},)")


def _loglik(beta, sigma, x, y, model: ErrorModel) -> float:
    z = (y - x @ beta) / sigma
    return float(np.sum(model.log_pdf(z)) - y.shape[0] * math.log(sigma))


def log_likelihood(theta: Parameters, data: Dataset, model: ErrorModel) -> float:
    """``sum_i log f((y_i - x_i'beta)/sigma) - n log sigma``."""
    _check_dims(theta.beta, data)
    return _loglik(theta.beta, theta.sigma, data.x, data.y, model)


def log_posterior(theta: Parameters, data: Dataset, model: ErrorModel, prior: Prior) -> float:
    """Unnormalized log-posterior (the marginal likelihood is omitted)."""
    _check_dims(theta.beta, data)
    if not theta.sigma > 0:
        return -math.inf
    return _loglik(theta.beta, theta.sigma, data.x, data.y, model) + float(
        prior.log_density(theta.sigma)
    )


def make_log_target(data: Dataset, model: ErrorModel, prior: Prior):
    """Return ``g(beta, sigma)`` evaluating :func:`log_posterior` without checks.

    This is the hot path for samplers and optimizers; ``sigma <= 0`` gives ``-inf``.
    """
    x, y = data.x, data.y
    n = data.n
    log_pdf = model.log_pdf
    recip = prior is Prior.RECIPROCAL_SIGMA

    def target(beta, sigma):
        if not sigma > 0:
            return -math.inf
        z = y - x @ beta
        z /= sigma
        log_sigma = math.log(sigma)
        val = float(np.sum(log_pdf(z))) - n * log_sigma
        return val - log_sigma if recip else val

    return target


def validate_propriety(n: int, p: int, moment_order: int = 0) -> Check:
    """Sufficient conditions for a proper posterior and finite moments.

    The posterior is proper when ``n > p + 1``; moments of order ``M`` of each
    ``beta_j`` and of ``sigma`` exist when ``n > p + 1 + M``.
    """
    if n <= p + 1:
        return Check(False, f"improper posterior: need n > p + 1 = {p + 1}, got n = {n}", n - p - 1)
    if n <= p + 1 + moment_order:
        return Check(
            False,
            f"moments of order {moment_order} may not exist: need n > {p + 1 + moment_order}, got n = {n}",
            n - p - 1 - moment_order,
        )
    return Check(True, "", n - p - 1 - moment_order)


def center_covariates(data: Dataset) -> tuple[Dataset, np.ndarray]:
    """Shift the non-intercept columns to mean zero.

    Returns the centered dataset and the column means (length ``p - 1``).
    """
    means = data.x[:, 1:].mean(axis=0)
    x = data.x.copy()
    x[:, 1:] -= means
    return Dataset(x, data.y, data.names), means


def uncenter(data: Dataset, means) -> Dataset:
    x = data.x.copy()
    x[:, 1:] += np.asarray(means, dtype=float)
    return Dataset(x, data.y, data.names)


def uncenter_beta(beta, means) -> np.ndarray:
    """Map coefficients fitted on centered covariates back to the original scale.

    Only the intercept changes: ``b1 = b1_c - sum_j mean_j * b_j``. Works on a
    single vector or on rows of a draws matrix.
    """
    beta = np.array(beta, dtype=float, copy=True)
    beta[..., 0] -= beta[..., 1:] @ np.asarray(means, dtype=float)
    return beta
