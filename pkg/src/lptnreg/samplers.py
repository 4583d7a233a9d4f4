"""Random-walk Metropolis on ``(beta, log sigma)`` and a two-model reversible jump.

Targets are callables ``target(beta, sigma) -> float`` returning the
unnormalized log-posterior in ``(beta, sigma)``; the samplers add the
``log sigma`` Jacobian themselves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from .estimation import NmConfig, map_estimate
from .exceptions import DomainError, InitializationError, SamplerDiagnosticError
from .models import ErrorModel
from .regression import Dataset, Parameters, Prior, make_log_target, validate_propriety

__all__ = [
    "RwmConfig",
    "Chain",
    "rwm_sample",
    "pilot_scales",
    "sample_posterior",
    "RjConfig",
    "BayesFactor",
    "bayes_factor_rj",
    "batch_means_se",
]

LogTarget = Callable[[np.ndarray, float], float]

# Robbins-Monro step size decays as t**-_RM_DECAY during burn-in.
_RM_DECAY = 0.6


@dataclass(frozen=True)
class RwmConfig:
    iterations: int
    burn_in: int
    initial: Parameters
    proposal_scales: np.ndarray
    adapt: bool = True
    target_acceptance: float = 0.234
    seed: int = 0

    def __post_init__(self):
        scales = np.asarray(self.proposal_scales, dtype=float).reshape(-1)
        object.__setattr__(self, "proposal_scales", scales)
        if not 0 <= self.burn_in < self.iterations:
            raise DomainError("need 0 <= burn_in < iterations")
        if scales.size != self.initial.beta.size + 1:
            raise DomainError(f"need {self.initial.beta.size + 1} proposal scales, got {scales.size}")
        if np.any(scales < 0) or not np.all(np.isfinite(scales)):
            raise DomainError("proposal scales must be finite and nonnegative")
        if not 0 < self.target_acceptance < 1:
            raise DomainError("target_acceptance must lie in (0, 1)")


@dataclass(frozen=True)
class Chain:
    """Post burn-in draws. Row ``t`` of ``beta`` pairs with ``sigma[t]``."""

    beta: np.ndarray
    sigma: np.ndarray
    acceptance_rate: float
    seed: int
    proposal_scales: np.ndarray = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.sigma.shape[0]

    def __getitem__(self, t) -> Parameters:
        return Parameters(self.beta[t], self.sigma[t])

    @property
    def draws(self) -> np.ndarray:
        """Draws as columns ``(beta_1..beta_p, sigma)``."""
        return np.column_stack([self.beta, self.sigma])

    def map_beta(self, fn) -> "Chain":
        """Chain with ``fn`` applied to the beta draws (e.g. un-centering)."""
        return replace(self, beta=fn(self.beta))


def rwm_sample(target: LogTarget, cfg: RwmConfig) -> Chain:
    """Random-walk Metropolis with independent Gaussian increments.

    During burn-in (if ``cfg.adapt``) a common log scale factor follows a
    Robbins-Monro recursion toward ``cfg.target_acceptance``; it is frozen
    afterwards so the retained draws come from a fixed kernel.
    """
    rng = np.random.default_rng(cfg.seed)
    p = cfg.initial.beta.size
    beta = cfg.initial.beta.copy()
    log_sigma = math.log(cfg.initial.sigma)
    cur = target(beta, cfg.initial.sigma)
    if not math.isfinite(cur):
        raise InitializationError("log-posterior is not finite at the initial point")
    # Jacobian of sigma = exp(s): the density in s carries an extra factor sigma.
    cur += log_sigma

    n_keep = cfg.iterations - cfg.burn_in
    out_beta = np.empty((n_keep, p))
    out_sigma = np.empty(n_keep)
    steps = rng.standard_normal((cfg.iterations, p + 1))
    log_u = np.log(rng.random(cfg.iterations))
    base = cfg.proposal_scales
    log_factor = 0.0
    scales = base
    accepted = 0

    for t in range(cfg.iterations):
        inc = steps[t] * scales
        prop_beta = beta + inc[:p]
        prop_ls = log_sigma + inc[p]
        prop_sigma = math.exp(prop_ls)
        new = target(prop_beta, prop_sigma)
        log_ratio = new + prop_ls - cur if math.isfinite(new) else -math.inf
        accept = log_u[t] < log_ratio
        if accept:
            beta, log_sigma, cur = prop_beta, prop_ls, new + prop_ls
        if t < cfg.burn_in:
            if cfg.adapt:
                alpha = 1.0 if log_ratio >= 0 else math.exp(log_ratio)
                log_factor += (t + 1) ** -_RM_DECAY * (alpha - cfg.target_acceptance)
                scales = base * math.exp(log_factor)
        else:
            k = t - cfg.burn_in
            accepted += accept
            out_beta[k] = beta
            out_sigma[k] = math.exp(log_sigma)

    return Chain(out_beta, out_sigma, accepted / n_keep, cfg.seed, scales)


def pilot_scales(
    target: LogTarget,
    initial: Parameters,
    rough_scales,
    seed: int,
    iterations: int = 4000,
) -> np.ndarray:
    """Proposal scales ``2.38/sqrt(d)`` times per-coordinate spreads from a short adaptive run."""
    rough = np.asarray(rough_scales, dtype=float)
    d = rough.size
    cfg = RwmConfig(iterations, iterations // 2, initial, rough * 2.38 / math.sqrt(d), seed=seed)
    chain = rwm_sample(target, cfg)
    spread = np.append(chain.beta.std(axis=0), np.log(chain.sigma).std())
    # A stuck pilot gives zero spread; fall back to the rough guess there.
    spread = np.where(spread > 0, spread, rough)
    return 2.38 / math.sqrt(d) * spread


def _rough_scales(data: Dataset, sigma: float) -> np.ndarray:
    xtx_inv = np.linalg.pinv(data.x.T @ data.x)
    return np.append(sigma * np.sqrt(np.diag(xtx_inv)), 1.0 / math.sqrt(2.0 * data.n))


def sample_posterior(
    data: Dataset,
    model: ErrorModel,
    prior: Prior,
    iterations: int,
    burn_in: int,
    seed: int,
    initial: Parameters | None = None,
    nm: NmConfig | None = None,
    target_acceptance: float = 0.234,
) -> Chain:
    """Full workflow: start at the MAP, tune scales on a pilot run, then sample."""
    if initial is None:
        initial = map_estimate(data, model, prior, nm).params
    target = make_log_target(data, model, prior)
    pilot_seed, main_seed = (int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(2))
    scales = pilot_scales(target, initial, _rough_scales(data, initial.sigma), pilot_seed)
    cfg = RwmConfig(
        iterations,
        burn_in,
        initial,
        scales,
        target_acceptance=target_acceptance,
        seed=main_seed,
    )
    chain = rwm_sample(target, cfg)
    return replace(chain, seed=seed)


def batch_means_se(values, batches: int = 50) -> float:
    """Standard error of the mean of a correlated series by nonoverlapping batch means."""
    values = np.asarray(values, dtype=float)
    size = values.size // batches
    if size < 1:
        raise DomainError(f"need at least {batches} values for {batches} batches")
    means = values[: size * batches].reshape(batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(batches))


@dataclass(frozen=True)
class RjConfig:
    """Reversible-jump settings for testing ``beta_j = 0`` (``tested_index`` is 1-based, >= 2).

    ``within_model`` supplies the within-model proposal scales for the full
    model; ``None`` tunes them on a pilot run. ``jump_proposal`` is the
    ``(location, scale)`` of the Gaussian birth proposal for ``beta_j``;
    ``None`` uses the full-model MAP and the pilot posterior spread.
    """

    iterations: int
    burn_in: int
    seed: int
    tested_index: int
    within_model: RwmConfig | None = None
    jump_proposal: tuple[float, float] | None = None
    jump_probability: float = 0.5
    batches: int = 50

    def __post_init__(self):
        if not 0 <= self.burn_in < self.iterations:
            raise DomainError("need 0 <= burn_in < iterations")
        if self.tested_index < 2:
            raise DomainError("tested_index must be >= 2; the intercept cannot be tested")
        if not 0 < self.jump_probability < 1:
            raise DomainError("jump_probability must lie in (0, 1)")


class BayesFactor(NamedTuple):
    """``BF(H1 : H0)`` with its batch-means standard error and the H1 visit fraction."""

    value: float
    std_error: float
    p_full: float


def bayes_factor_rj(
    data: Dataset, model: ErrorModel, prior: Prior, cfg: RjConfig
) -> BayesFactor:
    """Bayes factor for ``H1: beta_j != 0`` against ``H0: beta_j = 0``.

    Both models use the same improper prior with unit constant, so the
    Bayes factor is in the units of ``beta_j``. With equal prior model
    probabilities it is the ratio of visit counts of the two models.
    """
    check = validate_propriety(data.n, data.p)
    if not check:
        raise DomainError(check.reason)
    p = data.p
    j = cfg.tested_index - 1
    if j >= p:
        raise DomainError(f"tested_index {cfg.tested_index} exceeds p = {p}")
    target = make_log_target(data, model, prior)
    seq = np.random.SeedSequence(cfg.seed).spawn(2)
    pilot_seed, main_seed = (int(s.generate_state(1)[0]) for s in seq)

    full_map = map_estimate(data, model, prior).params
    if cfg.within_model is not None:
        scales = cfg.within_model.proposal_scales
        spread_j = scales[j] * math.sqrt(p + 1) / 2.38
    else:
        scales = pilot_scales(target, full_map, _rough_scales(data, full_map.sigma), pilot_seed)
        spread_j = scales[j] * math.sqrt(p + 1) / 2.38
    if cfg.jump_proposal is not None:
        loc, jump_sd = cfg.jump_proposal
    else:
        loc, jump_sd = float(full_map.beta[j]), float(spread_j)
    if not jump_sd > 0:
        raise DomainError("jump proposal scale must be positive")

    rng = np.random.default_rng(main_seed)
    beta = full_map.beta.copy()
    log_sigma = math.log(full_map.sigma)
    in_full = True
    cur = target(beta, full_map.sigma)
    if not math.isfinite(cur):
        raise InitializationError("log-posterior is not finite at the full-model MAP")
    log_norm = -0.5 * math.log(2.0 * math.pi) - math.log(jump_sd)
    active_full = np.ones(p + 1, dtype=bool)
    active_null = active_full.copy()
    active_null[j] = False

    n_keep = cfg.iterations - cfg.burn_in
    indicator = np.empty(n_keep)
    for t in range(cfg.iterations):
        if rng.random() < cfg.jump_probability:
            if in_full:
                # Death: drop beta_j; reverse move is a birth drawing beta_j.
                prop = beta.copy()
                prop[j] = 0.0
                new = target(prop, math.exp(log_sigma))
                u = (beta[j] - loc) / jump_sd
                log_ratio = new - cur + (log_norm - 0.5 * u * u)
            else:
                prop = beta.copy()
                prop[j] = loc + jump_sd * rng.standard_normal()
                new = target(prop, math.exp(log_sigma))
                u = (prop[j] - loc) / jump_sd
                log_ratio = new - cur - (log_norm - 0.5 * u * u)
            if math.isfinite(new) and math.log(rng.random()) < log_ratio:
                beta, cur, in_full = prop, new, not in_full
        else:
            active = active_full if in_full else active_null
            inc = rng.standard_normal(p + 1) * scales * active
            prop = beta + inc[:p]
            prop_ls = log_sigma + inc[p]
            new = target(prop, math.exp(prop_ls))
            if math.isfinite(new) and math.log(rng.random()) < new + prop_ls - cur - log_sigma:
                beta, log_sigma, cur = prop, prop_ls, new
        if t >= cfg.burn_in:
            indicator[t - cfg.burn_in] = in_full

    p_full = float(indicator.mean())
    if p_full in (0.0, 1.0):
        visited = "H1 (full model)" if p_full == 1.0 else "H0 (reduced model)"
        raise SamplerDiagnosticError(
            f"the chain stayed in {visited} for all retained iterations; the Bayes factor is "
            "beyond what this chain length can resolve. Retune the jump proposal "
            "(location/scale) or run more iterations."
        )
    se_p = batch_means_se(indicator, cfg.batches)
    bf = p_full / (1.0 - p_full)
    return BayesFactor(bf, se_p / (1.0 - p_full) ** 2, p_full)
