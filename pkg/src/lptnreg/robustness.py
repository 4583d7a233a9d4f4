"""Empirical checks of whole robustness and of the LPTN scale efficiency.

* :func:`robustness_curve` slides one response along ``y = a + b * omega``
  and tracks posterior means against the fit without that observation.
* :func:`marginal_ratio_probe` integrates the marginal likelihoods of a tiny
  problem by brute force to watch ``m(y_n) / (f(y_out) m(y_k))`` approach 1.
* :func:`kl_sigma_star` finds the scale that a LPTN model converges to when
  the data are actually normal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import logsumexp, ndtr, roots_legendre

from .estimation import NmConfig, map_estimate
from .exceptions import DomainError, QuadratureError
from .lptn import LptnParams, derive_params
from .models import ErrorModel
from .regression import Check, Dataset, Parameters, Prior, make_log_target, validate_propriety
from .samplers import sample_posterior

__all__ = [
    "OutlierPath",
    "RobustnessCurve",
    "robustness_curve",
    "breakdown_check",
    "max_outliers",
    "kl_objective",
    "kl_sigma_star",
    "score_ratio",
    "beta_score_integral",
    "eta_score_integral",
    "log_marginal",
    "marginal_ratio_probe",
]


# ---------------------------------------------------------------------------
# Breakdown arithmetic
# ---------------------------------------------------------------------------

def breakdown_check(n: int, p: int, ell: int) -> Check:
    """Check ``ell <= n/2 - (p - 1/2)``; the margin is ``k - ell - 2(p - 1/2)``."""
    if not 0 <= ell <= n:
        raise DomainError(f"need 0 <= ell <= n, got ell={ell}, n={n}")
    k = n - ell
    margin = k - ell - 2.0 * (p - 0.5)
    if margin >= 0:
        return Check(True, "", margin)
    return Check(
        False,
        f"{ell} outliers exceed the breakdown bound n/2 - (p - 1/2) = {n / 2 - (p - 0.5):g}",
        margin,
    )


def max_outliers(n: int, p: int) -> int:
    return max(0, math.floor(n / 2 - (p - 0.5)))


# ---------------------------------------------------------------------------
# Outlier paths and robustness curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OutlierPath:
    """Observation ``index`` (0-based) takes the response ``a + b * omega``."""

    index: int
    a: float
    b: float
    omegas: tuple[float, ...]

    def __post_init__(self):
        omegas = tuple(float(w) for w in self.omegas)
        object.__setattr__(self, "omegas", omegas)
        if self.b == 0:
            raise DomainError("the outlier slope b must be nonzero")
        if any(w <= 0 for w in omegas) or any(w2 <= w1 for w1, w2 in zip(omegas, omegas[1:])):
            raise DomainError("omegas must be positive and strictly increasing")

    def response(self, omega: float) -> float:
        return self.a + self.b * omega


@dataclass(frozen=True)
class RobustnessCurve:
    """Posterior means/sds of ``(beta_1..beta_p, sigma)`` along an outlier path.

    ``mean`` and ``sd`` have one row per omega; ``reference_*`` come from the
    data without the moving observation.
    """

    omegas: np.ndarray
    responses: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    reference_mean: np.ndarray
    reference_sd: np.ndarray
    names: tuple[str, ...]

    def gap(self) -> np.ndarray:
        """``|E[. | y_n(omega)] - E[. | y_k]|`` per omega and coordinate."""
        return np.abs(self.mean - self.reference_mean)

    def standardized_gap(self) -> np.ndarray:
        return self.gap() / self.reference_sd

    def rows(self):
        header = ["omega", "y_out"]
        for name in self.names:
            header += [f"{name}_mean", f"{name}_sd", f"{name}_ref"]
        yield header
        for i, w in enumerate(self.omegas):
            row = [w, self.responses[i]]
            for j in range(len(self.names)):
                row += [self.mean[i, j], self.sd[i, j], self.reference_mean[j]]
            yield row


def _moments(chain):
    draws = chain.draws
    return draws.mean(axis=0), draws.std(axis=0, ddof=1)


def robustness_curve(
    data: Dataset,
    model: ErrorModel,
    prior: Prior,
    path: OutlierPath,
    iterations: int = 20_000,
    burn_in: int = 5_000,
    seed: int = 0,
) -> RobustnessCurve:
    """Refit the posterior for each omega on the path.

    Every refit uses the same seed so differences along the curve reflect the
    data rather than Monte Carlo noise, and the MAP search is warm-started at
    the previous omega's mode.
    """
    check = breakdown_check(data.n, data.p, 1)
    if not check:
        raise DomainError(check.reason)
    prop = validate_propriety(data.n - 1, data.p)
    if not prop:
        raise DomainError(f"nonoutlier subset: {prop.reason}")

    reduced = data.drop(path.index)
    ref_chain = sample_posterior(reduced, model, prior, iterations, burn_in, seed)
    ref_mean, ref_sd = _moments(ref_chain)

    means, sds, ys = [], [], []
    init: Parameters | None = None
    for omega in path.omegas:
        y_out = path.response(omega)
        moved = data.with_response(path.index, y_out)
        try:
            mode = map_estimate(moved, model, prior, NmConfig(init=init))
            # A warm start can sit in a worse basin than the default starts.
            if init is not None:
                cold = map_estimate(moved, model, prior)
                if cold.value > mode.value:
                    mode = cold
            init = mode.params
            chain = sample_posterior(moved, model, prior, iterations, burn_in, seed, initial=init)
        except Exception as exc:
            raise type(exc)(f"at omega={omega:g}: {exc}") from exc
        m, s = _moments(chain)
        means.append(m)
        sds.append(s)
        ys.append(y_out)

    return RobustnessCurve(
        omegas=np.asarray(path.omegas),
        responses=np.asarray(ys),
        mean=np.asarray(means),
        sd=np.asarray(sds),
        reference_mean=ref_mean,
        reference_sd=ref_sd,
        names=(*data.coef_names, "sigma"),
    )


# ---------------------------------------------------------------------------
# KL minimiser for sigma under normal data
# ---------------------------------------------------------------------------

def score_ratio(u, p: LptnParams):
    """``f'(u)/f(u)`` for LPTN, taking the normal branch at ``|u| = tau``."""
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = -np.sign(u) / a * (1.0 + (p.lam + 1.0) / np.log(a))
    out = np.where(a > p.tau, tail, -u)
    return out if out.ndim else float(out)


def _phi(z):
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def _tail_log_f(u, p: LptnParams):
    return (
        p.log_phi_tau
        + math.log(p.tau)
        - math.log(u)
        + (p.lam + 1.0) * (math.log(math.log(p.tau)) - math.log(math.log(u)))
    )


def kl_objective(eta: float, p: LptnParams) -> float:
    """``J(eta) = E_phi[log f(Z eta)] + log eta``.

    The centre ``|z| <= tau/eta`` is integrated in closed form; each tail by
    adaptive quadrature. Maximising ``J`` minimises the KL divergence from the
    normal truth to the LPTN model at ``sigma = sigma_0 / eta``.
    """
    c = p.tau / eta
    mass = 2.0 * ndtr(c) - 1.0
    second = mass - 2.0 * c * float(_phi(c))  # int_{-c}^{c} z^2 phi(z) dz
    centre = -0.5 * math.log(2.0 * math.pi) * mass - 0.5 * eta * eta * second
    tail, err = integrate.quad(
        lambda z: _tail_log_f(z * eta, p) * math.exp(-0.5 * z * z),
        c,
        math.inf,
        epsabs=1e-13,
        epsrel=1e-12,
        limit=200,
    )
    return centre + 2.0 * tail / math.sqrt(2.0 * math.pi) + math.log(eta)


def kl_sigma_star(rho: float, tol: float = 1e-6) -> float:
    """Ratio ``sigma* / sigma_0 = 1 / eta*`` for a LPTN(rho) fit to normal data.

    Golden-section search on ``log eta`` over ``[log 0.5, log 2]``.
    """
    p = derive_params(rho)
    lo, hi = math.log(0.5), math.log(2.0)
    res = optimize.minimize_scalar(
        lambda s: -kl_objective(math.exp(s), p),
        bracket=(lo, 0.0, hi),
        method="golden",
        tol=tol * 1e-3,
    )
    s = float(res.x)
    if not lo < s < hi:
        raise QuadratureError(f"KL maximiser for rho={rho} left the search interval [0.5, 2]")
    return math.exp(-s)


def _split_quad(fn, breaks):
    total = 0.0
    edges = [-math.inf, *sorted(breaks), math.inf]
    for a, b in zip(edges, edges[1:]):
        val, _ = integrate.quad(fn, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
        total += val
    return total


def beta_score_integral(eta: float, p: LptnParams) -> float:
    """``int f'(z eta)/f(z eta) phi(z) dz`` over the whole line (zero by symmetry)."""
    c = p.tau / eta
    return _split_quad(lambda z: score_ratio(z * eta, p) * float(_phi(z)), (-c, c))


def eta_score_integral(eta: float, p: LptnParams) -> float:
    """``int z eta f'(z eta)/f(z eta) phi(z) dz``; equals -1 at the KL maximiser."""
    c = p.tau / eta
    return _split_quad(lambda z: z * eta * score_ratio(z * eta, p) * float(_phi(z)), (-c, c))


# ---------------------------------------------------------------------------
# Brute-force marginal likelihoods
# ---------------------------------------------------------------------------

def _hessian(fun, x, h):
    d = x.size
    hess = np.empty((d, d))
    f0 = fun(x)
    for i in range(d):
        for j in range(i, d):
            ei = np.zeros(d)
            ej = np.zeros(d)
            ei[i] = h[i]
            ej[j] = h[j]
            if i == j:
                v = (fun(x + ei) - 2.0 * f0 + fun(x - ei)) / (h[i] * h[i])
            else:
                v = (fun(x + ei + ej) - fun(x + ei - ej) - fun(x - ei + ej) + fun(x - ei - ej)) / (
                    4.0 * h[i] * h[j]
                )
            hess[i, j] = hess[j, i] = v
    return hess


def _grid_log_integral(log_g, center, transform, nodes, block=100_000):
    """Product Gauss-Legendre rule for ``int exp(log_g(theta)) dtheta``.

    ``theta = center + transform @ tan(t)`` with ``t`` in ``(-pi/2, pi/2)^d``.
    """
    d = center.size
    t, w = roots_legendre(nodes)
    t = 0.5 * math.pi * t
    log_w = np.log(0.5 * math.pi * w)
    tt = np.stack([g.reshape(-1) for g in np.meshgrid(*([t] * d), indexing="ij")], axis=1)
    lw = sum(np.meshgrid(*([log_w] * d), indexing="ij")).reshape(-1)
    log_det = math.log(abs(np.linalg.det(transform)))
    parts = []
    for start in range(0, tt.shape[0], block):
        tb = tt[start:start + block]
        theta = center + np.tan(tb) @ transform.T
        log_jac = np.sum(-2.0 * np.log(np.cos(tb)), axis=1) + log_det
        parts.append(logsumexp(log_g(theta) + log_jac + lw[start:start + block]))
    return float(logsumexp(parts))


def log_marginal(
    data: Dataset,
    model: ErrorModel,
    prior: Prior,
    tol: float = 1e-4,
    nodes: tuple[int, ...] = (64, 96, 128, 192, 256),
) -> float:
    """``log m(y)``: the log-posterior integrated over ``(beta, sigma)`` by brute force.

    Only for tiny problems (``p <= 2``). The rule is refined through ``nodes``
    until two successive estimates agree to ``tol`` in the log.
    """
    if data.p > 2:
        raise DomainError("brute-force marginals are limited to p <= 2")
    check = validate_propriety(data.n, data.p)
    if not check:
        raise DomainError(check.reason)
    x, y = data.x, data.y
    log_prior_recip = prior is Prior.RECIPROCAL_SIGMA

    def log_g(theta):
        theta = np.atleast_2d(theta)
        beta = theta[:, :-1]
        s = theta[:, -1]
        # The tan map reaches |log sigma| in the hundreds; those nodes carry no mass.
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            z = (y[None, :] - beta @ x.T) / np.exp(s)[:, None]
            val = np.sum(model.log_pdf(z), axis=1) - data.n * s
        val = np.where(np.isnan(val), -np.inf, val)
        if log_prior_recip:
            val = val - s
        return val + s  # d sigma = sigma d(log sigma)

    mode = map_estimate(data, model, prior).params.as_vector()
    scale = np.append(np.full(data.p, abs(mode[-1]) + math.exp(mode[-1])), 0.5)
    h = 1e-3 * np.append(np.full(data.p, math.exp(mode[-1])), 1.0)
    hess = -_hessian(lambda v: float(log_g(v)[0]), mode, h)
    vals, vecs = np.linalg.eigh(hess)
    if np.all(vals > 0):
        # Four curvature widths: the grid must also reach secondary modes
        # (e.g. hyperplanes through an outlier) and the slow log-type tails.
        transform = 4.0 * vecs / np.sqrt(vals)
    else:
        transform = np.diag(scale)

    prev, change = None, math.inf
    for k in nodes:
        cur = _grid_log_integral(log_g, mode, transform, k)
        if prev is not None:
            change = abs(cur - prev)
            if change < tol:
                return cur
        prev = cur
    raise QuadratureError(
        f"marginal likelihood did not stabilise to {tol:g} in log (last change {change:.3g})"
    )


def marginal_ratio_probe(
    data: Dataset,
    model: ErrorModel,
    prior: Prior,
    path: OutlierPath | None,
    omega: float | None = None,
    tol: float = 1e-4,
) -> float:
    """``m(y_n) / (f(y_out) * m(y_k))`` with observation ``path.index`` moved to ``a + b*omega``.

    With ``path=None`` there is no outlier and the ratio is ``m(y_n)/m(y_n) = 1``.
    Returns ``inf`` or ``0`` when the ratio overflows the float range (e.g.
    normal errors far out on the path).
    """
    if data.n > 6 or data.p > 2:
        raise DomainError("the marginal probe is limited to n <= 6 and p <= 2")
    if path is None:
        lm = log_marginal(data, model, prior, tol)
        return math.exp(lm - lm)
    log_ratio = marginal_log_ratio(data, model, prior, path, omega, tol)
    with np.errstate(over="ignore"):
        return float(np.exp(log_ratio))


def marginal_log_ratio(data, model, prior, path: OutlierPath, omega: float, tol: float = 1e-4) -> float:
    """Log of :func:`marginal_ratio_probe`; stays finite where the ratio overflows."""
    y_out = path.response(omega)
    moved = data.with_response(path.index, y_out)
    lm_n = log_marginal(moved, model, prior, tol)
    lm_k = log_marginal(data.drop(path.index), model, prior, tol)
    return lm_n - float(model.log_pdf(y_out)) - lm_k
