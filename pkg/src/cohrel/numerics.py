"""Quadrature on jump-split grids and seeded random streams."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NumericError",
    "Grid",
    "simpson",
    "simpson_weights",
    "integrate_between_jumps",
    "log1mexp",
    "RandomStream",
    "uniform",
    "gamma_draw",
    "beta_draw",
    "normal_draw",
    "multinomial_draw",
]

DEFAULT_PANELS = 64


class NumericError(ArithmeticError):
    """Non-finite integrand value or invalid quadrature request."""


def simpson_weights(panels: int) -> np.ndarray:
    """Composite Simpson weights for ``panels + 1`` equally spaced nodes (unit spacing)."""
    if panels < 2 or panels % 2:
        raise NumericError(f"Simpson needs an even number of panels >= 2, got {panels}")
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def simpson(f, a: float, b: float, panels: int = DEFAULT_PANELS) -> float:
    """Composite Simpson rule of ``f`` over ``[a, b]``; ``f`` is called once on the node array."""
    weights = simpson_weights(panels)
    if b == a:
        return 0.0
    if b < a:
        raise NumericError(f"integration bounds reversed: a={a}, b={b}")
    x = np.linspace(a, b, panels + 1)
    y = np.asarray(f(x), dtype=float)
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape)
    if not np.all(np.isfinite(y)):
        bad = x[~np.isfinite(y)][0]
        raise NumericError(f"integrand is not finite at {bad}")
    h = (b - a) / panels
    return float(h * weights @ y)


@dataclass(frozen=True)
class Grid:
    """Strictly increasing times with a designated subset of jump points."""

    times: np.ndarray
    jumps: np.ndarray = np.empty(0)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        jumps = np.unique(np.asarray(self.jumps, dtype=float))
        if times.ndim != 1 or times.size == 0:
            raise NumericError("grid needs at least one time")
        if np.any(np.diff(times) <= 0):
            raise NumericError("grid times must be strictly increasing")
        if not np.all(np.isin(jumps, times)):
            raise NumericError("jump points must lie on the grid")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "jumps", jumps)


def integrate_between_jumps(f, grid: Grid, panels: int = DEFAULT_PANELS) -> float:
    """Integral of ``f`` over the grid span, summed over open segments between grid points.

    At a segment end that is a jump point ``f`` is evaluated one float inside
    the segment, so step discontinuities contribute their one-sided limits and
    the atoms themselves are excluded.
    """
    t = grid.times
    jumps = set(grid.jumps.tolist())
    total = 0.0
    for a, b in zip(t[:-1], t[1:]):
        lo = np.nextafter(a, np.inf) if a in jumps else a
        hi = np.nextafter(b, -np.inf) if b in jumps else b

        def g(x, lo=lo, hi=hi, a=a, b=b):
            x = np.array(x, dtype=float)
            x[0], x[-1] = lo, hi
            return f(x)

        total += simpson(g, a, b, panels)
    return total


def log1mexp(x):
    """``log(1 - exp(-x))`` for ``x > 0``, accurate at both ends."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > np.log(2.0), np.log1p(-np.exp(-x)), np.log(-np.expm1(-x)))


class RandomStream:
    """Independent generator identified by ``(seed, stream)``.

    Streams derive from :class:`numpy.random.SeedSequence` spawn keys, so
    distinct stream ids give statistically independent sequences and the
    same pair always reproduces the same draws.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, stream: int) -> "RandomStream":
        """Stream keyed by ``(seed, stream)``; independent of the parent's position."""
        return RandomStream(self.seed, stream)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, size=None):
        return self._gen.random(size)

    def normal(self, mean=0.0, sd=1.0, size=None):
        return self._gen.normal(mean, sd, size)

    def gamma(self, shape, rate, size=None):
        return self._gen.gamma(shape, 1.0 / rate, size)

    def beta(self, a, b, size=None):
        return self._gen.beta(a, b, size)

    def categorical(self, probs) -> int:
        """1-based category drawn from ``probs`` (must sum to 1 within 1e-12)."""
        probs = np.asarray(probs, dtype=float)
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"category probabilities must be nonnegative and sum to 1, got {probs}")
        u = self._gen.random()
        k = int(np.searchsorted(np.cumsum(probs), u, side="right"))
        k = min(k, probs.size - 1)
        while probs[k] == 0:
            k -= 1
        return k + 1


def uniform(stream: RandomStream) -> float:
    return float(stream.uniform())


def gamma_draw(shape: float, rate: float, stream: RandomStream) -> float:
    return float(stream.gamma(shape, rate))


def beta_draw(a: float, b: float, stream: RandomStream) -> float:
    return float(stream.beta(a, b))


def normal_draw(mean: float, sd: float, stream: RandomStream) -> float:
    return float(stream.normal(mean, sd))


def multinomial_draw(probs, stream: RandomStream) -> int:
    """Single multinomial trial; returns the 1-based category."""
    return stream.categorical(probs)
