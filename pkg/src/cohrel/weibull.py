"""Three-parameter Weibull component model with an improper ``1/(eta*beta)`` prior."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from cohrel import kernels
from cohrel.data import CensorKind, ObsInterval, SystemRecord
from cohrel.mcmc import LOGIT_CLAMP, McmcConfig, adaptive_mh, diagnostics, hpd_interval, inverse_transform, \
    transform_weibull
from cohrel.numerics import RandomStream, log1mexp

__all__ = [
    "WeibullParams",
    "IntervalData",
    "PosteriorSample",
    "ReliabilityCurve",
    "InferenceError",
    "reliability",
    "density",
    "log_likelihood",
    "log_likelihood_series",
    "log_likelihood_parallel",
    "log_posterior",
    "fit",
    "reliability_curve",
    "DEFAULT_CONFIG",
    "BRIDGE_CONFIG",
]

DEFAULT_CONFIG = McmcConfig(iterations=20000, burn_in=10000, thin=10)
BRIDGE_CONFIG = McmcConfig(iterations=30000, burn_in=10000, thin=20)
PARAM_NAMES = ("beta", "eta", "mu")


class InferenceError(ValueError):
    """The data cannot support a proper posterior."""


@dataclass(frozen=True)
class WeibullParams:
    beta: float
    eta: float
    mu: float = 0.0

    def __post_init__(self):
        if not (self.beta > 0 and self.eta > 0 and self.mu >= 0):
            raise ValueError(f"need beta > 0, eta > 0, mu >= 0; got {self}")
        if not all(math.isfinite(v) for v in (self.beta, self.eta, self.mu)):
            raise ValueError(f"parameters must be finite; got {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.beta, self.eta, self.mu])


def reliability(t, theta: WeibullParams):
    """``exp(-((t - mu)/eta)**beta)`` above the location, 1 at or below it."""
    t = np.asarray(t, dtype=float)
    z = np.maximum(t - theta.mu, 0.0) / theta.eta
    out = np.exp(-(z**theta.beta))
    return float(out) if out.ndim == 0 else out


def density(t, theta: WeibullParams):
    """Weibull density; zero at or below the location."""
    t = np.asarray(t, dtype=float)
    z = np.maximum(t - theta.mu, 0.0) / theta.eta
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(t > theta.mu, theta.beta / theta.eta * z ** (theta.beta - 1.0) * np.exp(-(z**theta.beta)), 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class IntervalData:
    """Column arrays of one component's intervals, ready for the likelihood kernel."""

    l: np.ndarray
    u: np.ndarray
    code: np.ndarray

    @classmethod
    def from_intervals(cls, intervals) -> "IntervalData":
        if isinstance(intervals, IntervalData):
            return intervals
        intervals = list(intervals)
        return cls(
            np.array([iv.l for iv in intervals], dtype=float),
            np.array([iv.u for iv in intervals], dtype=float),
            np.array([iv.kind.code for iv in intervals], dtype=np.int8),
        )

    def __len__(self) -> int:
        return self.l.size

    @property
    def t_min(self) -> float:
        """Smallest positive finite interval endpoint; the location must stay below it."""
        ends = np.concatenate([self.l, self.u])
        ends = ends[(ends > 0) & np.isfinite(ends)]
        return float(ends.min())

    @property
    def failures(self) -> int:
        """Rows carrying failure information (anything but right censoring)."""
        return int(np.sum(self.code != CensorKind.RIGHT.code))


def log_likelihood(theta: WeibullParams, intervals) -> float:
    """Interval-censored log-likelihood: log density for exact rows, ``log(R(l) - R(u))`` otherwise."""
    data = IntervalData.from_intervals(intervals)
    return kernels.interval_loglik(theta.beta, theta.eta, theta.mu, data.l, data.u, data.code)


def log_likelihood_series(theta: WeibullParams, records: Sequence[SystemRecord], j: int) -> float:
    """Component ``j`` of a series system: density where it caused failure, reliability elsewhere."""
    total = 0.0
    for r in records:
        total += math.log(density(r.t, theta)) if r.delta == j else math.log(reliability(r.t, theta))
    return total


def log_likelihood_parallel(theta: WeibullParams, records: Sequence[SystemRecord], j: int) -> float:
    """Component ``j`` of a parallel system: density where it caused failure, distribution elsewhere."""
    total = 0.0
    for r in records:
        if r.delta == j:
            total += math.log(density(r.t, theta))
        else:
            hazard = (max(r.t - theta.mu, 0.0) / theta.eta) ** theta.beta
            total += float(log1mexp(hazard)) if hazard > 0 else -math.inf
    return total


def log_posterior(theta: WeibullParams, intervals) -> float:
    return log_likelihood(theta, intervals) - math.log(theta.eta) - math.log(theta.beta)


@dataclass
class PosteriorSample:
    """Thinned posterior draws, one row per draw with columns ``(beta, eta, mu)``."""

    draws: np.ndarray
    config: McmcConfig
    t_min: float
    acceptance_rate: float = float("nan")

    def __len__(self) -> int:
        return self.draws.shape[0]

    @property
    def beta(self) -> np.ndarray:
        return self.draws[:, 0]

    @property
    def eta(self) -> np.ndarray:
        return self.draws[:, 1]

    @property
    def mu(self) -> np.ndarray:
        return self.draws[:, 2]

    def params(self, i: int) -> WeibullParams:
        return WeibullParams(*self.draws[i])

    def summary(self, level: float = 0.95) -> dict:
        return diagnostics(self.draws, list(PARAM_NAMES), level)


def _default_init(data: IntervalData) -> WeibullParams:
    ends = np.concatenate([data.l, data.u])
    ends = ends[(ends > 0) & np.isfinite(ends)]
    return WeibullParams(1.0, float(ends.mean()), data.t_min / 2)


def check_posterior_preconditions(data: IntervalData) -> None:
    if len(data) < 2:
        raise InferenceError(f"posterior needs at least two observations, got {len(data)}")
    if data.failures == 0:
        raise InferenceError("every observation is right censored; the posterior is improper")


def fit(intervals, config: McmcConfig = DEFAULT_CONFIG, stream: RandomStream | None = None,
        init: WeibullParams | None = None) -> PosteriorSample:
    """Posterior draws of ``(beta, eta, mu)`` by adaptive Metropolis in unconstrained coordinates."""
    data = IntervalData.from_intervals(intervals)
    check_posterior_preconditions(data)
    t_min = data.t_min
    init = init or _default_init(data)

    def target(x):
        if abs(x[2]) > LOGIT_CLAMP:
            return -math.inf
        theta, log_jac = inverse_transform(x, t_min)
        return log_posterior(theta, data) + log_jac

    chain = adaptive_mh(target, transform_weibull(init, t_min), config, stream or RandomStream(config.seed))
    x = chain.draws
    z = x[:, 2]
    mu = t_min / (1.0 + np.exp(-z))
    draws = np.column_stack([np.exp(x[:, 0]), np.exp(x[:, 1]), mu])
    return PosteriorSample(draws, config, t_min, chain.acceptance_rate)


@dataclass(frozen=True)
class ReliabilityCurve:
    t: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float = 0.95


def reliability_curve(sample, grid, level: float = 0.95) -> ReliabilityCurve:
    """Posterior mean of ``R(t)`` with a pointwise HPD band."""
    draws = sample.draws if isinstance(sample, PosteriorSample) else np.asarray(sample, dtype=float)
    grid = np.asarray(grid, dtype=float)
    rel = kernels.reliability_matrix(draws[:, 0], draws[:, 1], draws[:, 2], grid)
    bands = np.array([hpd_interval(rel[:, k], level) for k in range(grid.size)]).reshape(-1, 2)
    return ReliabilityCurve(grid, rel.mean(axis=0), bands[:, 0], bands[:, 1], level)


def intervals_for(records, kind: CensorKind, j: int) -> list:
    """Component ``j`` intervals where non-causes take censoring ``kind`` (RIGHT or LEFT)."""
    other = ObsInterval.right if kind is CensorKind.RIGHT else ObsInterval.left
    return [ObsInterval.exact(r.t) if r.delta == j else other(r.t) for r in records]
