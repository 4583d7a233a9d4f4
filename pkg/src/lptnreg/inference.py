"""Posterior summaries, HPD intervals, prediction and outlier identification."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .models import ErrorModel
from .regression import Dataset
from .samplers import Chain

__all__ = [
    "hpd_interval",
    "ParameterSummary",
    "FitSummary",
    "summarize",
    "Prediction",
    "predict",
    "OutlierReport",
    "outlier_report",
]


def _check_level(level):
    if not 0 < level < 1:
        raise DomainError(f"credible level must lie in (0, 1); got {level}")


def hpd_interval(samples, level: float = 0.95) -> tuple[float, float]:
    """Shortest interval holding ``ceil(level * N)`` consecutive order statistics.

    Ties go to the window that starts first.
    """
    _check_level(level)
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    if x.size == 0:
        raise DomainError("cannot compute an HPD interval from zero draws")
    m = max(1, math.ceil(level * x.size))
    widths = x[m - 1:] - x[: x.size - m + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + m - 1])


@dataclass(frozen=True)
class ParameterSummary:
    name: str
    mean: float
    median: float
    lower: float
    upper: float


@dataclass(frozen=True)
class FitSummary:
    parameters: tuple[ParameterSummary, ...]
    level: float
    acceptance_rate: float
    draws: int

    def __getitem__(self, name: str) -> ParameterSummary:
        for s in self.parameters:
            if s.name == name:
                return s
        raise KeyError(name)


def summarize(chain: Chain, level: float = 0.95, names=None) -> FitSummary:
    """Per-coordinate mean, median and HPD interval for ``(beta, sigma)``."""
    _check_level(level)
    if len(chain) == 0:
        raise DomainError("cannot summarize an empty chain")
    p = chain.beta.shape[1]
    names = tuple(names) if names is not None else tuple(f"beta{j + 1}" for j in range(p))
    cols = [*chain.beta.T, chain.sigma]
    out = []
    for name, col in zip((*names, "sigma"), cols):
        lo, hi = hpd_interval(col, level)
        out.append(ParameterSummary(name, float(col.mean()), float(np.median(col)), lo, hi))
    return FitSummary(tuple(out), level, chain.acceptance_rate, len(chain))


@dataclass(frozen=True)
class Prediction:
    """Posterior predictive median and HPD interval; no mean is reported."""

    median: float
    lower: float
    upper: float
    level: float
    draws: np.ndarray


def predict(chain: Chain, x_new, model: ErrorModel, level: float = 0.95, seed: int = 0) -> Prediction:
    """Draw ``x_new' beta + sigma * eps`` once per retained posterior draw.

    Under LPTN errors the predictive mean does not exist, so only the median
    and an HPD interval are summarized.
    """
    if len(chain) == 0:
        raise DomainError("cannot predict from an empty chain")
    x_new = np.asarray(x_new, dtype=float).reshape(-1)
    if x_new.size != chain.beta.shape[1]:
        raise DomainError(f"x_new has {x_new.size} entries, expected {chain.beta.shape[1]}")
    rng = np.random.default_rng(seed)
    eps = model.sample(rng, len(chain))
    draws = chain.beta @ x_new + chain.sigma * eps
    lo, hi = hpd_interval(draws, level)
    return Prediction(float(np.median(draws)), lo, hi, level, draws)


@dataclass(frozen=True)
class OutlierReport:
    """Posterior means per observation; ``flag`` marks mean outlyingness below ``threshold``."""

    fitted: np.ndarray
    error: np.ndarray
    z: np.ndarray
    outlyingness: np.ndarray
    flag: np.ndarray
    threshold: float

    @property
    def flagged(self) -> np.ndarray:
        return np.flatnonzero(self.flag)


def outlier_report(
    chain: Chain, data: Dataset, model: ErrorModel, threshold: float = 0.01, chunk: int = 4096
) -> OutlierReport:
    """Average per-draw fitted values, errors, ``z_i`` and outlyingness over the chain.

    The outlyingness estimate is the posterior mean of ``rho(z_i)`` computed
    draw by draw, not ``rho`` of the mean ``z_i``.
    """
    if not 0.001 <= threshold <= 0.05:
        raise DomainError(f"flag threshold must lie in [0.001, 0.05]; got {threshold}")
    if len(chain) == 0:
        raise DomainError("cannot build an outlier report from an empty chain")
    # Raises UnsupportedModelError for Student errors before any work is done.
    model.outlyingness(0.0)
    n = data.n
    fitted = np.zeros(n)
    z_sum = np.zeros(n)
    rho_sum = np.zeros(n)
    for start in range(0, len(chain), chunk):
        b = chain.beta[start:start + chunk]
        s = chain.sigma[start:start + chunk]
        fit = b @ data.x.T
        z = (data.y - fit) / s[:, None]
        fitted += fit.sum(axis=0)
        z_sum += z.sum(axis=0)
        rho_sum += model.outlyingness(z).sum(axis=0)
    m = len(chain)
    fitted /= m
    rho = rho_sum / m
    return OutlierReport(
        fitted=fitted,
        error=data.y - fitted,
        z=z_sum / m,
        outlyingness=rho,
        flag=rho < threshold,
        threshold=threshold,
    )
