"""Masked-cause Weibull inference by Metropolis-within-Gibbs with latent censor types.

For one component, each system contributes its density (the component
caused the failure), reliability (still working) or distribution function
(failed earlier).  When the cause is masked the branch is unknown and is
augmented by a latent one-hot ``d``.  A masked row of branch ``l`` has
probability ``lambda_l``; an unmasked one ``1 - lambda_l``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cohrel import kernels
from cohrel.data import MaskedRecord
from cohrel.mcmc import LOGIT_CLAMP, AdaptiveMetropolis, McmcConfig, inverse_transform, transform_weibull
from cohrel.numerics import RandomStream
from cohrel.weibull import InferenceError, PosteriorSample, WeibullParams

__all__ = [
    "Constraint",
    "MaskingRates",
    "MaskedRows",
    "MaskedState",
    "GammaPriorSpec",
    "MaskedPosterior",
    "DegenerateMaskError",
    "log_likelihood_masked",
    "latent_full_conditional",
    "lambda_full_conditional",
    "gibbs_fit",
    "DEFAULT_MASKED_CONFIG",
    "HARDDRIVE_CONFIG",
]

DEFAULT_MASKED_CONFIG = McmcConfig(iterations=30000, burn_in=10000, thin=20)
HARDDRIVE_CONFIG = McmcConfig(iterations=35000, burn_in=5000, thin=30)
# status codes; the likelihood kernel uses status - 1
EXACT, RIGHT, LEFT = 1, 2, 3


class DegenerateMaskError(InferenceError):
    """A masked row has zero weight on every admissible branch."""

    def __init__(self, message: str, row_id=None):
        self.row_id = row_id
        super().__init__(message)


class Constraint(enum.Flag):
    FREE = 0
    FIX_ZERO_2 = enum.auto()
    FIX_ZERO_3 = enum.auto()
    SYMMETRIC_13 = enum.auto()

    def admissible(self) -> tuple:
        """Censor types a masked row may take."""
        out = [EXACT]
        if not self & Constraint.FIX_ZERO_2:
            out.append(RIGHT)
        if not self & Constraint.FIX_ZERO_3:
            out.append(LEFT)
        return tuple(out)

    def label(self) -> str:
        names = [f.name.lower() for f in (Constraint.FIX_ZERO_2, Constraint.FIX_ZERO_3, Constraint.SYMMETRIC_13)
                 if self & f]
        return "+".join(names) or "free"


@dataclass(frozen=True)
class MaskingRates:
    lambda1: float
    lambda2: float
    lambda3: float
    constraint: Constraint = Constraint.FREE

    def __post_init__(self):
        for v in self.as_array():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"masking rates must lie in [0, 1], got {self.as_array()}")
        if self.constraint & Constraint.FIX_ZERO_2 and self.lambda2 != 0:
            raise ValueError("lambda2 is fixed at zero")
        if self.constraint & Constraint.FIX_ZERO_3 and self.lambda3 != 0:
            raise ValueError("lambda3 is fixed at zero")
        if self.constraint & Constraint.SYMMETRIC_13 and self.lambda1 != self.lambda3:
            raise ValueError("lambda1 and lambda3 are tied")

    def as_array(self) -> np.ndarray:
        return np.array([self.lambda1, self.lambda2, self.lambda3])


@dataclass(frozen=True)
class MaskedRows:
    """One component's view of a masked dataset.

    ``status`` holds 1/2/3 for known rows and 0 for masked ones.
    """

    t: np.ndarray
    status: np.ndarray
    ids: tuple = ()

    @classmethod
    def from_records(cls, records: Sequence[MaskedRecord], j: int) -> "MaskedRows":
        t = np.array([r.t for r in records], dtype=float)
        status = np.array([0 if r.upsilon[j - 1] else r.delta[j - 1] for r in records], dtype=np.int8)
        return cls(t, status, tuple(r.id for r in records))

    @property
    def masked(self) -> np.ndarray:
        return self.status == 0

    def known_counts(self) -> tuple:
        """Unmasked exact, right and left counts ``(n_f, n_r, n_l)``."""
        return tuple(int(np.sum(self.status == k)) for k in (EXACT, RIGHT, LEFT))

    def __len__(self) -> int:
        return self.t.size


@dataclass
class MaskedState:
    theta: WeibullParams
    rates: MaskingRates
    latents: np.ndarray  # censor type 1/2/3 per masked row, in row order


@dataclass(frozen=True)
class GammaPriorSpec:
    """Independent gamma priors on ``beta``, ``eta`` and ``mu`` (shape, rate)."""

    shape: float = 0.001
    rate: float = 0.001

    def log_density(self, x: float) -> float:
        return (self.shape - 1.0) * math.log(x) - self.rate * x


def _codes_for(rows: MaskedRows, latents) -> np.ndarray:
    status = rows.status.copy()
    status[rows.masked] = latents
    return status


def log_likelihood_masked(state: MaskedState, rows: MaskedRows) -> float:
    """Complete-data log-likelihood given the latent censor types of the masked rows."""
    lam = state.rates.as_array()
    codes = _codes_for(rows, state.latents)
    kcodes = (codes - 1).astype(np.int8)
    th = state.theta
    ll = kernels.interval_loglik(th.beta, th.eta, th.mu, rows.t, rows.t, kcodes)
    with np.errstate(divide="ignore"):
        log_known = np.log1p(-lam)
        log_masked = np.log(lam)
    counts_known = rows.known_counts()
    masked_codes = np.asarray(state.latents, dtype=int)
    for k in range(3):
        nk = counts_known[k]
        if nk:
            ll += nk * log_known[k]
        mk = int(np.sum(masked_codes == k + 1))
        if mk:
            ll += mk * log_masked[k]
    return float(ll)


def latent_full_conditional(theta: WeibullParams, rates: MaskingRates, t):
    """Branch probabilities proportional to ``(lambda1*f, lambda2*R, lambda3*F)`` at each time."""
    scalar = np.ndim(t) == 0
    w = kernels.branch_likelihoods(theta.beta, theta.eta, theta.mu, np.atleast_1d(t)) * rates.as_array()
    total = w.sum(axis=1, keepdims=True)
    if np.any(~(total > 0)):
        raise DegenerateMaskError("every branch has zero weight")
    p = w / total
    return p[0] if scalar else p


def lambda_full_conditional(kind, latents, known_counts) -> tuple:
    """Beta parameters of a masking rate given the latent types and unmasked counts.

    ``kind`` is 1, 2 or 3, or ``"13"`` for the pooled rate under the symmetric
    constraint.
    """
    latents = np.asarray(latents, dtype=int)
    sums = [int(np.sum(latents == k)) for k in (EXACT, RIGHT, LEFT)]
    if kind == "13":
        return sums[0] + sums[2] + 1, known_counts[0] + known_counts[2] + 1
    k = int(kind) - 1
    return sums[k] + 1, known_counts[k] + 1


@dataclass
class MaskedPosterior:
    sample: PosteriorSample
    rates: np.ndarray  # (n_p, 3) masking-rate draws
    constraint: Constraint
    latent_means: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))


def _draw_rates(latents, counts, constraint: Constraint, stream: RandomStream) -> MaskingRates:
    lam = np.zeros(3)
    if constraint & Constraint.SYMMETRIC_13:
        lam[0] = lam[2] = stream.beta(*lambda_full_conditional("13", latents, counts))
    else:
        lam[0] = stream.beta(*lambda_full_conditional(1, latents, counts))
        if not constraint & Constraint.FIX_ZERO_3:
            lam[2] = stream.beta(*lambda_full_conditional(3, latents, counts))
    if not constraint & Constraint.FIX_ZERO_2:
        lam[1] = stream.beta(*lambda_full_conditional(2, latents, counts))
    if constraint & Constraint.FIX_ZERO_3:
        lam[2] = 0.0
    return MaskingRates(*lam, constraint=constraint)


def _check_constraint(constraint: Constraint) -> None:
    if constraint & Constraint.SYMMETRIC_13 and constraint & Constraint.FIX_ZERO_3:
        raise ValueError("symmetric lambda1 = lambda3 conflicts with lambda3 fixed at zero")


def gibbs_fit(rows: MaskedRows, priors: GammaPriorSpec = GammaPriorSpec(),
              config: McmcConfig = DEFAULT_MASKED_CONFIG, constraint: Constraint = Constraint.FREE,
              stream: RandomStream | None = None) -> MaskedPosterior:
    """Metropolis-within-Gibbs over ``(theta, lambda, d)`` for one component.

    Each sweep draws the masking rates from their Beta conditionals, moves
    ``theta`` with one adaptive Metropolis step, then redraws the latent
    censor types from their multinomial conditionals.
    """
    _check_constraint(constraint)
    if len(rows) < 2:
        raise InferenceError(f"posterior needs at least two systems, got {len(rows)}")
    stream = stream or RandomStream(config.seed)
    t_min = float(rows.t.min())
    masked_t = rows.t[rows.masked]
    masked_ids = [i for i, m in zip(rows.ids or range(1, len(rows) + 1), rows.masked) if m]
    counts = rows.known_counts()
    admissible = np.array(constraint.admissible())
    latents = admissible[(stream.uniform(masked_t.size) * admissible.size).astype(int)].astype(np.int8)

    t_all = rows.t
    status = rows.status.copy()
    masked = rows.masked

    def theta_target(x, kcodes):
        if abs(x[2]) > LOGIT_CLAMP:
            return -math.inf
        theta, log_jac = inverse_transform(x, t_min)
        ll = kernels.interval_loglik(theta.beta, theta.eta, theta.mu, t_all, t_all, kcodes)
        if ll == -math.inf:
            return ll
        return (ll + priors.log_density(theta.beta) + priors.log_density(theta.eta)
                + priors.log_density(theta.mu) + log_jac)

    init = WeibullParams(1.0, float(rows.t.mean()), t_min / 2)
    x = transform_weibull(init, t_min)
    sampler = AdaptiveMetropolis(x, config, stream)
    draws = np.empty((config.kept, 3))
    rate_draws = np.empty((config.kept, 3))
    latent_tally = np.zeros((masked_t.size, 3))
    k = 0
    for it in range(1, config.iterations + 1):
        rates = _draw_rates(latents, counts, constraint, stream)
        status[masked] = latents
        kcodes = (status - 1).astype(np.int8)
        current = theta_target(sampler.x, kcodes)
        if current == -math.inf:
            raise DegenerateMaskError("current parameters give zero likelihood to the latent configuration")
        x, _, _ = sampler.step(lambda y: theta_target(y, kcodes), current)
        theta, _ = inverse_transform(x, t_min)
        if masked_t.size:
            latents, bad = kernels.latent_draw(theta.beta, theta.eta, theta.mu, masked_t, rates.lambda1,
                                               rates.lambda2, rates.lambda3, stream.uniform(masked_t.size))
            if bad >= 0:
                raise DegenerateMaskError(f"system {masked_ids[bad]}: every admissible branch has zero weight",
                                          masked_ids[bad])
        if config.keeps(it):
            draws[k] = theta.as_array()
            rate_draws[k] = rates.as_array()
            if masked_t.size:
                latent_tally[np.arange(masked_t.size), latents - 1] += 1
            k += 1
    sample = PosteriorSample(draws, config, t_min, sampler.accepted / config.iterations)
    return MaskedPosterior(sample, rate_draws, constraint, latent_tally / max(k, 1))
