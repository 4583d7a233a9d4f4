"""The log-Pareto-tailed normal distribution, LPTN(rho).

The density is the standard normal on ``|z| <= tau`` and a log-Pareto tail
beyond, with ``tau`` and the tail exponent ``lam`` fixed by ``rho`` so that no
normalising constant is needed:

    f(z) = phi(z)                                           |z| <= tau
    f(z) = phi(tau) * tau/|z| * (log tau / log|z|)**(lam+1)  |z| >  tau

All functions accept scalars or arrays and return the same shape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .exceptions import DomainError

__all__ = [
    "RHO_MIN",
    "LptnParams",
    "derive_params",
    "lptn_pdf",
    "lptn_log_pdf",
    "lptn_cdf",
    "lptn_sf",
    "lptn_quantile",
    "lptn_sample",
    "lptn_outlyingness",
    "normal_outlyingness",
]

#: Lower end of the admissible open interval for rho, 2*Phi(1) - 1.
RHO_MIN = float(2.0 * ndtr(1.0) - 1.0)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LptnParams:
    """Central mass ``rho`` and the derived threshold ``tau`` and exponent ``lam``."""

    rho: float
    tau: float
    lam: float

    @property
    def tail_mass(self) -> float:
        """Mass of one tail, ``(1 - rho) / 2``."""
        return 0.5 * (1.0 - self.rho)

    @property
    def log_phi_tau(self) -> float:
        return -0.5 * self.tau * self.tau - _LOG_SQRT_2PI


def derive_params(rho: float) -> LptnParams:
    """Compute ``(tau, lam)`` for a central mass ``rho``.

    Raises
    ------
    DomainError
        If ``rho`` is not in the open interval ``(2*Phi(1) - 1, 1)``.
    """
    rho = float(rho)
    if not (RHO_MIN < rho < 1.0):
        raise DomainError(
            f"rho must lie in the open interval ({RHO_MIN:.6f}, 1); got {rho!r}"
        )
    tau = float(ndtri(0.5 * (1.0 + rho)))
    phi_tau = math.exp(-0.5 * tau * tau - _LOG_SQRT_2PI)
    lam = 2.0 / (1.0 - rho) * phi_tau * tau * math.log(tau)
    return LptnParams(rho=rho, tau=tau, lam=lam)


def _tail_log_pdf(a, p: LptnParams):
    # Valid for a > tau > 1 only, where both logs are well defined.
    log_a = np.log(a)
    return (
        p.log_phi_tau
        + math.log(p.tau)
        - log_a
        + (p.lam + 1.0) * (math.log(math.log(p.tau)) - np.log(log_a))
    )


def lptn_log_pdf(z, p: LptnParams):
    """Log density, evaluated in the log domain so it stays finite for huge ``|z|``."""
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    # Clamping at tau keeps the unused tail branch finite inside the core.
    tail = _tail_log_pdf(np.maximum(a, p.tau), p)
    out = np.where(a > p.tau, tail, -0.5 * z * z - _LOG_SQRT_2PI)
    return out if out.ndim else float(out)


def lptn_pdf(z, p: LptnParams):
    return np.exp(lptn_log_pdf(z, p))


def lptn_sf(z, p: LptnParams):
    """Survival function ``1 - F(z)``, accurate in the upper tail."""
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    # One-sided tail beyond |z|: normal part inside tau, log-Pareto part outside.
    upper = np.empty_like(a)
    core = a <= p.tau
    upper[core] = ndtr(-a[core])
    if not np.all(core):
        la = np.log(a[~core])
        upper[~core] = p.tail_mass * (math.log(p.tau) / la) ** p.lam
    out = np.where(z >= 0.0, upper, 1.0 - upper)
    return out if out.ndim else float(out)


def lptn_cdf(z, p: LptnParams):
    return lptn_sf(-np.asarray(z, dtype=float), p)


def lptn_quantile(u, p: LptnParams):
    """Inverse of :func:`lptn_cdf` for ``u`` in the open unit interval."""
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise DomainError("quantile level must lie in the open interval (0, 1)")
    hi = 0.5 * (1.0 + p.rho)
    lo = 0.5 * (1.0 - p.rho)
    out = np.empty_like(u)
    core = (u >= lo) & (u <= hi)
    out[core] = ndtri(u[core])
    tail = ~core
    if np.any(tail):
        # Mass beyond the quantile on its own side of zero.
        beyond = np.where(u[tail] > hi, 1.0 - u[tail], u[tail])
        with np.errstate(over="ignore"):
            mag = np.exp(math.log(p.tau) * (p.tail_mass / beyond) ** (1.0 / p.lam))
        out[tail] = np.where(u[tail] > hi, mag, -mag)
    return out if out.ndim else float(out)


def lptn_sample(p: LptnParams, rng: np.random.Generator, size=None):
    """Draw from LPTN(rho) by inversion.

    Draws beyond about ``1e308`` in magnitude overflow to ``inf``; this needs a
    uniform within ~1e-11 of 0 or 1.
    """
    u = rng.random(size)
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    return lptn_quantile(u, p)


def lptn_outlyingness(z, p: LptnParams):
    """Probability that a fresh LPTN error exceeds ``|z|`` in magnitude."""
    a = np.abs(np.asarray(z, dtype=float))
    tails = 2.0 * math.exp(p.log_phi_tau) * p.tau * math.log(p.tau) / p.lam
    out = np.empty_like(a)
    core = a <= p.tau
    out[core] = 2.0 * (ndtr(p.tau) - ndtr(a[core])) + tails
    if not np.all(core):
        out[~core] = tails * (math.log(p.tau) / np.log(a[~core])) ** p.lam
    return out if out.ndim else float(out)


def normal_outlyingness(z):
    a = np.abs(np.asarray(z, dtype=float))
    out = 2.0 * ndtr(-a)
    return out if out.ndim else float(out)
