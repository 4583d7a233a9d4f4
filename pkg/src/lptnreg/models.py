"""Standardized error densities ``f`` for the regression errors."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import lptn
from .exceptions import DomainError, UnsupportedModelError

__all__ = ["ErrorModel", "Normal", "Student", "Lptn", "parse_model", "outlyingness"]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ErrorModel:
    """Base class: a symmetric standardized density with log-pdf and sampler."""

    name = "error-model"

    def log_pdf(self, z):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def outlyingness(self, z):
        raise UnsupportedModelError(
            f"outlyingness is only defined for the normal and LPTN models, not {self.label}"
        )

    @property
    def label(self) -> str:
        return self.name


@dataclass(frozen=True)
class Normal(ErrorModel):
    name = "normal"

    def log_pdf(self, z):
        z = np.asarray(z, dtype=float)
        return -0.5 * z * z - _LOG_SQRT_2PI

    def sample(self, rng, size=None):
        return rng.standard_normal(size)

    def outlyingness(self, z):
        return lptn.normal_outlyingness(z)


@dataclass(frozen=True)
class Student(ErrorModel):
    df: float
    name = "student"

    def __post_init__(self):
        if not (self.df > 0 and math.isfinite(self.df)):
            raise DomainError(f"Student degrees of freedom must be positive; got {self.df!r}")

    @property
    def label(self) -> str:
        return f"student:{self.df:g}"

    def log_pdf(self, z):
        z = np.asarray(z, dtype=float)
        nu = self.df
        const = gammaln(0.5 * (nu + 1.0)) - gammaln(0.5 * nu) - 0.5 * math.log(nu * math.pi)
        return const - 0.5 * (nu + 1.0) * np.log1p(z * z / nu)

    def sample(self, rng, size=None):
        return rng.standard_t(self.df, size)


@dataclass(frozen=True)
class Lptn(ErrorModel):
    rho: float
    params: lptn.LptnParams = field(init=False, repr=False, compare=False)
    name = "lptn"

    def __post_init__(self):
        object.__setattr__(self, "params", lptn.derive_params(self.rho))

    @property
    def label(self) -> str:
        return f"lptn:{self.rho:g}"

    def log_pdf(self, z):
        return lptn.lptn_log_pdf(z, self.params)

    def sample(self, rng, size=None):
        return lptn.lptn_sample(self.params, rng, size)

    def outlyingness(self, z):
        return lptn.lptn_outlyingness(z, self.params)


def outlyingness(z, model: ErrorModel):
    """``P(|eps| > |z|)`` for a fresh standardized error under ``model``."""
    return model.outlyingness(z)


def parse_model(text: str) -> ErrorModel:
    """Parse ``normal``, ``student:<df>`` or ``lptn:<rho>``."""
    kind, _, arg = text.strip().lower().partition(":")
    if kind == "normal" and not arg:
        return Normal()
    try:
        if kind == "student":
            return Student(float(arg))
        if kind == "lptn":
            return Lptn(float(arg))
    except ValueError as exc:
        raise DomainError(f"bad error model {text!r}: {exc}") from exc
    raise DomainError(f"unknown error model {text!r}; expected normal, student:<df> or lptn:<rho>")
