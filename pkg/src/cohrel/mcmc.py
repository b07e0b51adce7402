"""Adaptive random-walk Metropolis, unconstrained Weibull coordinates and chain summaries."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from cohrel.numerics import RandomStream

__all__ = [
    "McmcConfig",
    "Chain",
    "InitError",
    "AdaptiveMetropolis",
    "adaptive_mh",
    "transform_weibull",
    "inverse_transform",
    "LOGIT_CLAMP",
    "hpd_interval",
    "diagnostics",
]

# Location logit is confined to [-LOGIT_CLAMP, LOGIT_CLAMP]; mu -> 0 maps to the lower edge.
LOGIT_CLAMP = 30.0
SUMMARY_FIELDS = ("min", "q1", "median", "mean", "q3", "max", "sd", "hpd_lower", "hpd_upper")


class InitError(ValueError):
    """The starting point has zero target density."""


@dataclass(frozen=True)
class McmcConfig:
    iterations: int = 20000
    burn_in: int = 10000
    thin: int = 10
    seed: int = 0
    initial_scale: float = 0.1
    adaptation_start: int = 1000
    adaptation_epsilon: float = 1e-10

    def __post_init__(self):
        if self.iterations < 1 or self.thin < 1 or self.burn_in < 0:
            raise ValueError("iterations and thin must be positive, burn_in nonnegative")
        if self.burn_in >= self.iterations:
            raise ValueError(f"burn_in ({self.burn_in}) must be below iterations ({self.iterations})")
        if (self.iterations - self.burn_in) % self.thin:
            raise ValueError("iterations - burn_in must be divisible by thin")
        if not self.initial_scale > 0 or not self.adaptation_epsilon > 0:
            raise ValueError("initial_scale and adaptation_epsilon must be positive")
        if self.adaptation_start < 2:
            raise ValueError("adaptation_start must be at least 2")

    @property
    def kept(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    def keeps(self, iteration: int) -> bool:
        """Whether the state after 1-based ``iteration`` is stored."""
        return iteration > self.burn_in and (iteration - self.burn_in) % self.thin == 0


@dataclass
class Chain:
    draws: np.ndarray
    accepted: int
    iterations: int
    post_adaptation_accepted: int = 0
    post_adaptation_iterations: int = 0
    log_target: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.iterations if self.iterations else 0.0

    @property
    def post_adaptation_rate(self) -> float:
        n = self.post_adaptation_iterations
        return self.post_adaptation_accepted / n if n else float("nan")


class AdaptiveMetropolis:
    """Gaussian random walk whose covariance tracks the chain history.

    Before ``adaptation_start`` iterations the proposal is isotropic with sd
    ``initial_scale``; afterwards it is ``2.38**2/d * cov(history) + eps*I``.
    The sampler can be driven one step at a time so that Gibbs samplers can
    change the target between steps.
    """

    def __init__(self, init, config: McmcConfig, stream: RandomStream, scales=None):
        self.x = np.array(init, dtype=float)
        self.dim = self.x.size
        self.config = config
        self.stream = stream
        scales = np.full(self.dim, config.initial_scale) if scales is None else np.asarray(scales, float)
        self.chol = np.diag(scales)
        self._mean = self.x.copy()
        self._scatter = np.zeros((self.dim, self.dim))
        self._count = 1
        self.iteration = 0
        self.accepted = 0
        self.post_accepted = 0
        self.post_iterations = 0

    @property
    def adapting(self) -> bool:
        return self.iteration >= self.config.adaptation_start

    def step(self, log_target, current: float) -> tuple:
        """One proposal; returns ``(state, log_target_value, accepted)``."""
        z = self.stream.normal(size=self.dim)
        u = self.stream.uniform()
        proposal = self.x + self.chol @ z
        value = log_target(proposal)
        accept = value > -math.inf and (u == 0.0 or math.log(u) < value - current)
        adapting = self.adapting
        if accept:
            self.x = proposal
            current = value
            self.accepted += 1
            if adapting:
                self.post_accepted += 1
        if adapting:
            self.post_iterations += 1
        self.iteration += 1
        self._update_history()
        return self.x, current, accept

    def _update_history(self):
        self._count += 1
        delta = self.x - self._mean
        self._mean += delta / self._count
        self._scatter += np.outer(delta, self.x - self._mean)
        if self.iteration >= self.config.adaptation_start:
            cov = self._scatter / (self._count - 1)
            scaled = (2.38**2 / self.dim) * cov + self.config.adaptation_epsilon * np.eye(self.dim)
            try:
                self.chol = np.linalg.cholesky(scaled)
            except np.linalg.LinAlgError:
                pass  # keep the previous factor until the history is positive definite


def adaptive_mh(log_target, init, config: McmcConfig, stream: RandomStream | None = None, scales=None) -> Chain:
    """Run an adaptive Metropolis chain and keep thinned post-burn-in states."""
    stream = stream or RandomStream(config.seed)
    x = np.array(init, dtype=float)
    current = float(log_target(x))
    if not current > -math.inf:
        raise InitError("log target is -inf at the initial point")
    sampler = AdaptiveMetropolis(x, config, stream, scales)
    draws = np.empty((config.kept, x.size))
    values = np.empty(config.kept)
    k = 0
    for it in range(1, config.iterations + 1):
        x, current, _ = sampler.step(log_target, current)
        if config.keeps(it):
            draws[k] = x
            values[k] = current
            k += 1
    return Chain(draws, sampler.accepted, config.iterations, sampler.post_accepted, sampler.post_iterations, values)


# --------------------------------------------------------------------------- coordinates


def transform_weibull(theta, t_min: float) -> np.ndarray:
    """``(log beta, log eta, logit(mu / t_min))`` with the logit clamped to +/-LOGIT_CLAMP."""
    beta, eta, mu = (theta.beta, theta.eta, theta.mu) if hasattr(theta, "beta") else theta
    frac = mu / t_min
    if frac <= 0:
        z = -LOGIT_CLAMP
    elif frac >= 1:
        z = LOGIT_CLAMP
    else:
        z = float(np.clip(math.log(frac) - math.log1p(-frac), -LOGIT_CLAMP, LOGIT_CLAMP))
    return np.array([math.log(beta), math.log(eta), z])


def inverse_transform(x, t_min: float):
    """Map coordinates back to ``WeibullParams``; also returns the log-Jacobian."""
    from cohrel.weibull import WeibullParams

    b, e, z = (float(v) for v in x)
    log_sig = -math.log1p(math.exp(-z)) if z > -700 else z
    log_1msig = -math.log1p(math.exp(z)) if z < 700 else -z
    mu = t_min * math.exp(log_sig)
    log_jac = b + e + math.log(t_min) + log_sig + log_1msig
    return WeibullParams(math.exp(b), math.exp(e), mu), log_jac


# --------------------------------------------------------------------------- summaries


def hpd_interval(samples, level: float = 0.95) -> tuple:
    """Shortest window of sorted draws that holds ``ceil(level * n)`` of them."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    if not 0 < level <= 1:
        raise ValueError("level must lie in (0, 1]")
    k = max(1, math.ceil(level * n - 1e-9))
    widths = x[k - 1:] - x[: n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


def diagnostics(chain, names=None, level: float = 0.95) -> dict:
    """Per-parameter min, quartiles, mean, max, sample sd and HPD bounds."""
    draws = chain.draws if isinstance(chain, Chain) else np.asarray(chain, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    if draws.shape[0] == 0:
        raise ValueError("empty chain")
    names = names or [f"x{i + 1}" for i in range(draws.shape[1])]
    out = {}
    for name, col in zip(names, draws.T):
        q1, med, q3 = np.quantile(col, [0.25, 0.5, 0.75])
        lo, hi = hpd_interval(col, level)
        sd = float(np.std(col, ddof=1)) if col.size > 1 else 0.0
        out[name] = dict(zip(SUMMARY_FIELDS, (float(col.min()), float(q1), float(med), float(col.mean()),
                                              float(q3), float(col.max()), sd, lo, hi)))
    return out
