"""Nonparametric Bayesian estimation of component distribution functions.

The prior on the three sub-distribution functions of a canonical
series-parallel (``min(X1, max(X2, X3))``) or parallel-series
(``max(X1, min(X2, X3))``) system is a multivariate Dirichlet process with
continuous parameter measures.  Posterior means of the sub-distributions are
mixtures of prior and empirical parts; component distribution functions
follow from product-integral inversions that split into a continuous
(exponential of an integral) factor and a product over the observed jump
points.

Everything is computed in survival/log space.  Ratios such as
``F_hat(s) - F_hat_1(s)`` are never formed by subtraction: their logarithms
are accumulated directly as integrals and jump sums, which keeps relative
accuracy in the far tail where both terms are tiny.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cohrel.numerics import NumericError, simpson_weights
from cohrel.structure import (
    StructureError,
    StructureExpr,
    ThreeComponentView,
    canonical_three,
    has_repeated_component,
    to_pss,
    to_sps,
)

__all__ = [
    "PriorMeasure",
    "SubDistSet",
    "CurveEstimate",
    "SingularityError",
    "UnsupportedSystemError",
    "NeverFails",
    "prior_measures_from_guess",
    "default_guesses",
    "empirical_subdist",
    "posterior_subdist",
    "system_df",
    "rho_hat",
    "estimate_F1_sps",
    "estimate_F2_sps",
    "estimate_F1_pss",
    "estimate_F2_pss",
    "estimate_component",
    "estimate_two_component",
    "evaluation_grid",
]

PANELS = 64
GRID_POINTS = 256
# prior tables: dense up to the 1e-15 quantile of every guess, coarser out to 1e-150
_BODY_SF, _TAIL_SF = 1e-15, 1e-150
_TABLE_KNOTS = 4000
# integrals to infinity stop once the prior tail mass has dropped by this factor
_TAIL_DROP = 1e-24
_EXTENSION_CELLS = 64
_GRADED_LEVELS = 24
# jump-factor numerators may dip this far below zero (relative) from rounding
_REL_GUARD = 1e-12


class SingularityError(NumericError):
    """A denominator of an estimator vanished; ``t`` locates it."""

    def __init__(self, message: str, t: float):
        self.t = t
        super().__init__(f"{message} at t={t:.6g}")


class UnsupportedSystemError(StructureError):
    """Neither the series-parallel nor the parallel-series form avoids repeated components."""


class NeverFails:
    """Degenerate lifetime guess with no failures on ``(0, inf)``."""

    def cdf(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def sf(self, t):
        return np.ones_like(np.asarray(t, dtype=float))

    def pdf(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def isf(self, q):
        return math.inf


def default_guesses() -> tuple:
    """Exponential lifetimes with mean 1 for all three slots."""
    from scipy import stats

    return (stats.expon(), stats.expon(), stats.expon())


# --------------------------------------------------------------------------- prior measures


class PriorMeasure:
    """Finite measure on ``(0, inf)`` with a continuous density.

    ``cumulative(t) = alpha(0, t]`` and ``tail(t) = alpha(t, inf)`` come from
    forward and reverse Simpson tables on a fixed knot grid, so each keeps
    relative accuracy where it is small.
    """

    def __init__(self, density, knots):
        self._density = density
        x = np.asarray(knots, dtype=float)
        if x[0] != 0.0 or np.any(np.diff(x) <= 0):
            raise NumericError("knots must start at 0 and increase")
        self.knots = x
        mid = 0.5 * (x[:-1] + x[1:])
        f, fm = self.density(x), self.density(mid)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(fm))):
            raise NumericError("prior density is not finite on the knot grid")
        if np.any(f < 0) or np.any(fm < 0):
            raise ValueError("prior density is negative; the guesses are not distribution functions")
        pieces = np.diff(x) / 6.0 * (f[:-1] + 4.0 * fm + f[1:])
        self._cum = np.concatenate([[0.0], np.cumsum(pieces)])
        self._tail = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
        self.total_mass = float(self._tail[0])

    def density(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(invalid="ignore", over="ignore", under="ignore"):
            out = np.where(t >= 0, self._density(np.maximum(t, 0.0)), 0.0)
        return out

    def _partial(self, t):
        """Knot index at or below ``t`` and the integral from that knot to ``t``."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.knots[-1])
        k = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, self.knots.size - 2)
        a = self.knots[k]
        piece = (t - a) / 6.0 * (self.density(a) + 4.0 * self.density(0.5 * (a + t)) + self.density(t))
        return k, piece

    def cumulative(self, t):
        t = np.asarray(t, dtype=float)
        k, piece = self._partial(t)
        out = np.where(np.isinf(t), self.total_mass, np.minimum(self._cum[k] + piece, self.total_mass))
        return float(out) if out.ndim == 0 else out

    def tail(self, t):
        t = np.asarray(t, dtype=float)
        tc = np.clip(t, 0.0, self.knots[-1])
        k = np.clip(np.searchsorted(self.knots, tc, side="right"), 1, self.knots.size - 1)
        b = self.knots[k]
        piece = (b - tc) / 6.0 * (self.density(tc) + 4.0 * self.density(0.5 * (tc + b)) + self.density(b))
        out = np.where(np.isinf(t) | (t >= self.knots[-1]), 0.0, self._tail[k] + piece)
        return float(out) if out.ndim == 0 else out


def _zero_density(t):
    return np.zeros_like(np.asarray(t, dtype=float))


def _check_guess(g, name: str) -> None:
    probe = np.concatenate([[0.0], np.geomspace(1e-6, 1e6, 400)])
    with np.errstate(all="ignore"):
        c = np.asarray(g.cdf(probe), dtype=float)
    if np.any(~np.isfinite(c)) or np.any(c < -1e-12) or np.any(c > 1 + 1e-12):
        raise ValueError(f"prior guess {name} is not a distribution function (values outside [0, 1])")
    if np.any(np.diff(c) < -1e-12):
        raise ValueError(f"prior guess {name} is not nondecreasing")
    if c[0] > 1e-12:
        raise ValueError(f"prior guess {name} must vanish at 0")


def _knots_for(guesses) -> np.ndarray:
    def reach(q):
        vals = [float(g.isf(q)) for g in guesses]
        vals = [v for v in vals if math.isfinite(v) and v > 0]
        return max(vals) if vals else 1.0

    body, far = reach(_BODY_SF), reach(_TAIL_SF)
    far = max(far, 1.5 * body)
    return np.concatenate([np.linspace(0.0, body, _TABLE_KNOTS + 1), np.linspace(body, far, _TABLE_KNOTS + 1)[1:]])


def prior_measures_from_guess(F1, F2, F3=None, kind: str = "SPS", grid=None, mass: float = 1.0) -> tuple:
    """Parameter measures implied by prior guesses of the three slot lifetimes.

    Each guess needs ``cdf``, ``sf``, ``pdf`` and ``isf`` (a frozen scipy
    distribution works).  The measure of slot ``j`` is the sub-distribution of
    the canonical system under independent guessed lifetimes, scaled by
    ``mass``.  ``F3=None`` gives the two-component series (SPS) or parallel
    (PSS) system.  ``grid`` overrides the tabulation knots.
    """
    kind = kind.upper()
    if kind not in ("SPS", "PSS"):
        raise ValueError(f"kind must be SPS or PSS, got {kind!r}")
    if not mass > 0:
        raise ValueError("prior mass must be positive")
    guesses = [F1, F2] + ([F3] if F3 is not None else [])
    for name, g in zip(("F1", "F2", "F3"), guesses):
        _check_guess(g, name)

    def sf(g, t):
        return np.asarray(g.sf(t), dtype=float)

    def cdf(g, t):
        return np.asarray(g.cdf(t), dtype=float)

    def pdf(g, t):
        return np.asarray(g.pdf(t), dtype=float)

    if F3 is None:
        if kind == "SPS":
            dens = (lambda t: mass * sf(F2, t) * pdf(F1, t), lambda t: mass * sf(F1, t) * pdf(F2, t), _zero_density)
        else:
            dens = (lambda t: mass * cdf(F2, t) * pdf(F1, t), lambda t: mass * cdf(F1, t) * pdf(F2, t), _zero_density)
    elif kind == "SPS":
        def d1(t):
            s2, s3 = sf(F2, t), sf(F3, t)
            return mass * (s2 + s3 - s2 * s3) * pdf(F1, t)

        dens = (d1, lambda t: mass * sf(F1, t) * cdf(F3, t) * pdf(F2, t),
                lambda t: mass * sf(F1, t) * cdf(F2, t) * pdf(F3, t))
    else:
        def d1(t):
            with np.errstate(divide="ignore"):
                return mass * -np.expm1(np.log(sf(F2, t)) + np.log(sf(F3, t))) * pdf(F1, t)

        dens = (d1, lambda t: mass * cdf(F1, t) * sf(F3, t) * pdf(F2, t),
                lambda t: mass * cdf(F1, t) * sf(F2, t) * pdf(F3, t))
    knots = _knots_for(guesses) if grid is None else np.asarray(grid, dtype=float)
    return tuple(PriorMeasure(d, knots) for d in dens)


# --------------------------------------------------------------------------- posterior sub-distributions


def _as_pairs(records, max_cause: int = 3) -> tuple:
    t = np.array([r[0] if isinstance(r, tuple) else r.t for r in records], dtype=float)
    d = np.array([r[1] if isinstance(r, tuple) else r.delta for r in records], dtype=int)
    if t.size and (np.any(~(t > 0)) or np.any(~np.isfinite(t))):
        raise ValueError("system times must be positive and finite")
    if d.size and np.any((d < 1) | (d > max_cause)):
        raise ValueError(f"causes must lie in 1..{max_cause}")
    return t, d


def empirical_subdist(records, j: int, t) -> float:
    """Fraction of systems failed by ``t`` with cause ``j``."""
    times, causes = _as_pairs(records, max_cause=np.iinfo(int).max)
    if times.size == 0:
        raise ValueError("no records")
    return float(np.sum((times <= t) & (causes == j))) / times.size


@dataclass
class SubDistSet:
    """Posterior means of the three sub-distributions plus jump-point bookkeeping.

    ``jumps`` are the distinct ordered system times, ``at_risk[i]`` counts
    times strictly below ``jumps[i]`` and ``counts[i, j-1]`` counts systems
    failing at ``jumps[i]`` with cause ``j``.
    """

    priors: tuple
    kind: str
    n: int
    jumps: np.ndarray
    at_risk: np.ndarray
    counts: np.ndarray

    @property
    def prior_total(self) -> float:
        return float(sum(p.total_mass for p in self.priors))

    def prior_cumulative(self, t):
        return sum(np.asarray(p.cumulative(t)) for p in self.priors)

    def prior_tail(self, t):
        return sum(np.asarray(p.tail(t)) for p in self.priors)

    def count_le(self, t, j: int | None = None):
        """Number of systems failed by ``t`` (with cause ``j`` if given)."""
        per = self.counts.sum(axis=1) if j is None else self.counts[:, j - 1]
        cum = np.concatenate([[0], np.cumsum(per)])
        return cum[np.searchsorted(self.jumps, np.asarray(t, dtype=float), side="right")]

    def subdist(self, j: int, t):
        out = (np.asarray(self.priors[j - 1].cumulative(t)) + self.count_le(t, j)) / (self.prior_total + self.n)
        return float(out) if np.ndim(out) == 0 else out

    def system_df(self, t):
        out = (self.prior_cumulative(t) + self.count_le(t)) / (self.prior_total + self.n)
        return float(out) if np.ndim(out) == 0 else out

    def rho_hat(self, j: int) -> float:
        return (self.priors[j - 1].total_mass + float(self.counts[:, j - 1].sum())) / (self.prior_total + self.n)


def posterior_subdist(priors: Sequence[PriorMeasure], records, kind: str = "SPS") -> SubDistSet:
    """Posterior sub-distribution set from collapsed records ``(t, cause in {1, 2, 3})``."""
    if len(priors) != 3:
        raise ValueError("need three prior measures")
    if not sum(p.total_mass for p in priors) > 0:
        raise ValueError("prior measures have zero total mass")
    t, d = _as_pairs(records)
    jumps, inverse = np.unique(t, return_inverse=True)
    counts = np.zeros((jumps.size, 3), dtype=np.int64)
    np.add.at(counts, (inverse, d - 1), 1)
    at_risk = np.concatenate([[0], np.cumsum(counts.sum(axis=1))[:-1]])
    return SubDistSet(tuple(priors), kind.upper(), int(t.size), jumps, at_risk, counts)


def system_df(sub: SubDistSet, t):
    return sub.system_df(t)


def rho_hat(sub: SubDistSet, j: int) -> float:
    return sub.rho_hat(j)


# --------------------------------------------------------------------------- estimator mesh


@dataclass(frozen=True)
class CurveEstimate:
    t: np.ndarray
    values: np.ndarray
    label: str = ""
    rho: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.t.shape != self.values.shape:
            raise ValueError("grid and values differ in length")

    def at(self, t):
        """Right-continuous step lookup on the grid."""
        k = np.searchsorted(self.t, np.asarray(t, dtype=float), side="right") - 1
        if np.any(k < 0):
            raise ValueError("time below the grid")
        return self.values[k]


def evaluation_grid(sub: SubDistSet, t_max: float | None = None, points: int = GRID_POINTS) -> np.ndarray:
    """Jump points plus ``points`` equally spaced times from 0 to the largest time."""
    if t_max is None:
        if sub.n == 0:
            raise ValueError("t_max is required when there are no observations")
        t_max = float(sub.jumps[-1])
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    grid = np.union1d(np.linspace(0.0, t_max, points), sub.jumps[sub.jumps <= t_max])
    return grid


class _Mesh:
    """Cells between breakpoints, each split into ``PANELS`` Simpson panels.

    Fine points are panel ends plus panel midpoints; the data counts are
    constant on every open cell.  Prior quantities are evaluated once on the
    fine points.
    """

    def __init__(self, sub: SubDistSet, grid: np.ndarray):
        self.sub = sub
        last = float(grid[-1])
        positive = grid[grid > 0]
        g1 = float(positive[0]) if positive.size else last
        self.first_positive = g1
        self.last = last
        pts = [grid, sub.jumps, g1 * 2.0 ** -np.arange(1, _GRADED_LEVELS + 1), [0.0]]
        tail_last = float(sub.prior_tail(last))
        knots_end = float(sub.priors[0].knots[-1])
        self.upper = last
        if tail_last > 0 and last < knots_end:
            target = _TAIL_DROP * tail_last
            lo, hi = last, knots_end
            if float(sub.prior_tail(hi)) <= target:
                for _ in range(200):
                    mid = 0.5 * (lo + hi)
                    lo, hi = (lo, mid) if float(sub.prior_tail(mid)) <= target else (mid, hi)
                    if hi - lo < 1e-9 * hi:
                        break
            self.upper = hi
            pts.append(np.linspace(last, hi, _EXTENSION_CELLS + 1))
        b = np.unique(np.concatenate([np.asarray(p, dtype=float) for p in pts]))
        b = b[b <= self.upper]
        b = _split_wide_ratios(b)
        self.breaks = b
        ncell = b.size - 1
        frac = np.linspace(0.0, 1.0, 2 * PANELS + 1)
        self.fine = b[:-1, None] + (b[1:] - b[:-1])[:, None] * frac[None, :]  # (cells, 2P+1)
        self.width = b[1:] - b[:-1]
        # counts on each open cell
        self.k_all = sub.count_le(b[:-1])
        self.ncell = ncell
        x = self.fine.ravel()
        dens = np.stack([p.density(x) for p in sub.priors]).reshape(3, ncell, -1)
        cum = np.stack([np.asarray(p.cumulative(x)) for p in sub.priors]).reshape(3, ncell, -1)
        tail = np.stack([np.asarray(p.tail(x)) for p in sub.priors]).reshape(3, ncell, -1)
        self.dens, self.cum_total, self.tail_total = dens, cum.sum(axis=0), tail.sum(axis=0)
        self.An = sub.prior_total + sub.n

    def forward(self, integrand):
        """Cumulative integral from 0 at every fine point with an even index."""
        g = integrand
        h = self.width[:, None] / (2 * PANELS)
        pieces = h / 3.0 * (g[:, 0:-1:2] + 4.0 * g[:, 1::2] + g[:, 2::2])  # (cells, P)
        within = np.concatenate([np.zeros((self.ncell, 1)), np.cumsum(pieces, axis=1)], axis=1)
        starts = np.concatenate([[0.0], np.cumsum(within[:, -1])[:-1]])
        return starts[:, None] + within

    def reverse(self, integrand):
        """Integral from each even fine point up to the mesh end."""
        fw = self.forward(integrand)
        return fw[-1, -1] - fw

    def cell_integrals(self, integrand_nodes):
        """Composite Simpson over the panel ends of each cell."""
        w = simpson_weights(PANELS) * (self.width[:, None] / PANELS)
        return np.sum(w * integrand_nodes, axis=1)

    def nodes(self, arr):
        return arr[:, ::2]

    def index_of(self, t):
        return np.searchsorted(self.breaks, t)


def _split_wide_ratios(b: np.ndarray, ratio: float = 2.0) -> np.ndarray:
    out = [b[0]]
    for lo, hi in zip(b[:-1], b[1:]):
        if lo > 0 and hi / lo > ratio:
            k = int(math.ceil(math.log(hi / lo) / math.log(ratio)))
            out.extend(np.geomspace(lo, hi, k + 1)[1:-1])
        out.append(hi)
    return np.asarray(out)


def _first_cell_fix(arr: np.ndarray) -> np.ndarray:
    """Integrands may be undefined in the cell touching 0; zero them there."""
    arr = np.array(arr)
    arr[0] = np.where(np.isfinite(arr[0]), arr[0], 0.0)
    return arr


def _guard(den_rel, dens, mesh: _Mesh, what: str, skip=None):
    bad = (dens > 0) & ~(den_rel > 0)
    bad[0] = False
    if skip is not None:
        bad[skip] = False
    if np.any(bad):
        cell, col = np.argwhere(bad)[0]
        raise SingularityError(f"{what} denominator vanishes", float(mesh.nodes(mesh.fine)[cell, col]))


def _sps_state(mesh: _Mesh):
    """log Q and the log-gap between Q and S on the fine points (S = 1 - F_hat, Q = 1 - F_hat_1)."""
    sub = mesh.sub
    risk = mesh.tail_total + (sub.n - mesh.k_all)[:, None]  # (A + n)(1 - F_hat)
    with np.errstate(divide="ignore", invalid="ignore"):
        g1 = mesh.dens[0] / risk
        g23 = (mesh.dens[1] + mesh.dens[2]) / risk
    g1 = np.where(mesh.dens[0] > 0, g1, 0.0)
    g23 = np.where(mesh.dens[1] + mesh.dens[2] > 0, g23, 0.0)
    if not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g23))):
        cell, col = np.argwhere(~np.isfinite(g1 + g23))[0]
        raise SingularityError("system survival vanishes", float(mesh.fine[cell, col]))
    C = mesh.forward(g1)
    G = mesh.forward(g23)
    # jump parts at the jump points, applied to every cell starting at or above them
    tail_j = sub.prior_tail(sub.jumps)
    r = tail_j + sub.n - sub.at_risk
    d_all = sub.counts.sum(axis=1)
    d1 = sub.counts[:, 0]
    with np.errstate(divide="ignore"):
        log_pi_s = np.log(r - d1) - np.log(r)
        log_gap_jump = np.log(r - d1) - np.log(r - d_all)
    start = mesh.breaks[:-1]
    upto = np.searchsorted(sub.jumps, start, side="right")  # jumps <= cell start
    cum_pi = np.concatenate([[0.0], np.cumsum(log_pi_s)])
    cum_gap = np.concatenate([[0.0], np.cumsum(log_gap_jump)])
    fine_nodes = mesh.nodes(mesh.fine)
    logQ = cum_pi[upto][:, None] - C
    delta = cum_gap[upto][:, None] + G
    return dict(logQ=logQ, delta=delta, C=C, cum_pi=cum_pi, cum_gap=cum_gap, r=r, log_pi_s=log_pi_s,
                nodes=fine_nodes)


def _pss_state(mesh: _Mesh):
    """log F_hat_1 and the log-gap between F_hat_1 and F_hat on the fine points."""
    sub = mesh.sub
    level = mesh.cum_total + mesh.k_all[:, None]  # (A + n) F_hat
    with np.errstate(divide="ignore", invalid="ignore"):
        g1 = mesh.dens[0] / level
        g23 = (mesh.dens[1] + mesh.dens[2]) / level
    g1 = _first_cell_fix(np.where(mesh.dens[0] > 0, g1, 0.0))
    g23 = _first_cell_fix(np.where(mesh.dens[1] + mesh.dens[2] > 0, g23, 0.0))
    if not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g23))):
        cell, col = np.argwhere(~np.isfinite(g1 + g23))[0]
        raise SingularityError("system distribution vanishes", float(mesh.fine[cell, col]))
    C = mesh.reverse(g1)
    G = mesh.reverse(g23)
    a_j = sub.prior_cumulative(sub.jumps)
    base = a_j + sub.at_risk
    d_all = sub.counts.sum(axis=1)
    d1 = sub.counts[:, 0]
    with np.errstate(divide="ignore"):
        log_pi_p = np.log(base) - np.log(base + d1)
        log_gap_jump = np.log(base + d_all) - np.log(base + d1)
    end = mesh.breaks[1:]
    above = np.searchsorted(sub.jumps, end, side="left")  # first jump >= cell end
    rev_pi = np.concatenate([np.cumsum(log_pi_p[::-1])[::-1], [0.0]])
    rev_gap = np.concatenate([np.cumsum(log_gap_jump[::-1])[::-1], [0.0]])
    logF1 = rev_pi[above][:, None] - C
    delta = rev_gap[above][:, None] + G
    return dict(logF1=logF1, delta=delta, C=C, rev_pi=rev_pi, base=base, log_pi_p=log_pi_p,
                log_gap_jump=log_gap_jump)


def _grid_index(mesh: _Mesh, grid):
    idx = np.searchsorted(mesh.breaks, grid)
    if not np.allclose(mesh.breaks[idx], grid, rtol=0, atol=0):
        raise NumericError("evaluation grid is not on the mesh")
    return idx


def _value_at_breaks(arr_nodes: np.ndarray) -> np.ndarray:
    """Continuous level-1 quantity at every breakpoint from the per-cell node table."""
    return np.concatenate([arr_nodes[:, 0], [arr_nodes[-1, -1]]])


def _slot_index(target_slot: int) -> int:
    if target_slot not in (2, 3):
        raise ValueError(f"target slot must be 2 or 3, got {target_slot}")
    return target_slot - 1


def _prepare(sub: SubDistSet, grid, t_max):
    if grid is None:
        grid = evaluation_grid(sub, t_max)
    grid = np.unique(np.asarray(grid, dtype=float))
    if np.any(grid < 0):
        raise ValueError("grid times must be nonnegative")
    if sub.n and grid[-1] > sub.jumps[-1] * (1 + 1e-12):
        raise ValueError("estimators are defined only up to the largest observed time")
    return grid, _Mesh(sub, grid)


def _finish(grid, values, label, sub, slot) -> CurveEstimate:
    values = np.clip(values, 0.0, 1.0) + 0.0  # no negative zeros in output
    return CurveEstimate(grid, values, label, sub.rho_hat(slot), {"kind": sub.kind, "slot": slot, "n": sub.n})


def estimate_F1_sps(sub: SubDistSet, grid=None, t_max: float | None = None) -> CurveEstimate:
    """Distribution of the series slot: ``1 - exp(-continuous hazard) * product over its failures``."""
    grid, mesh = _prepare(sub, grid, t_max)
    st = _sps_state(mesh)
    C_b = _value_at_breaks(st["C"])[_grid_index(mesh, grid)]
    n_le = np.searchsorted(sub.jumps, grid, side="right")
    log_surv = st["cum_pi"][n_le] - C_b
    values = -np.expm1(log_surv)
    return _finish(grid, values, "F1_sps", sub, 1)


def estimate_F2_sps(sub: SubDistSet, target_slot: int = 2, grid=None, t_max: float | None = None) -> CurveEstimate:
    """Distribution of a parallel-block slot of the series-parallel system."""
    s = _slot_index(target_slot)
    grid, mesh = _prepare(sub, grid, t_max)
    st = _sps_state(mesh)
    logQ, delta = st["logQ"], st["delta"]
    # only integrals from positive grid times are needed; cells below carry none
    below = mesh.breaks[:-1] < mesh.first_positive
    dens = np.where(below[:, None], 0.0, mesh.nodes(mesh.dens[s]))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        gap = -np.expm1(-delta)  # (Q - S) / Q
        _guard(gap, dens, mesh, "F_hat - F_hat_1")
        integrand = np.where(dens > 0, np.exp(np.log(dens) - math.log(mesh.An) - logQ - np.log(gap)), 0.0)
    integrand[0] = np.where(np.isfinite(integrand[0]), integrand[0], 0.0)
    if not np.all(np.isfinite(integrand)):
        cell, col = np.argwhere(~np.isfinite(integrand))[0]
        raise SingularityError("F_hat - F_hat_1 underflows", float(mesh.nodes(mesh.fine)[cell, col]))
    cells = mesh.cell_integrals(integrand)
    rev = np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]])
    idx = _grid_index(mesh, grid)
    # jump factors at slot failures: num = Q(T) - S(T-), den = num + d/(A+n)
    d_slot = sub.counts[:, s]
    log_factor = np.zeros(sub.jumps.size)
    hit = np.nonzero(d_slot > 0)[0]
    if hit.size:
        cell_of = np.searchsorted(mesh.breaks, sub.jumps[hit]) - 1  # cell ending at the jump
        gap_before = st["delta"][cell_of, -1]  # gap just below the jump
        r = st["r"][hit]
        scaled = r * np.expm1(gap_before + st["log_pi_s"][hit])  # (A+n)(Q(T) - S(T-))
        if np.any(~(scaled > 0)):
            bad = hit[np.argmax(~(scaled > 0))]
            raise SingularityError("jump factor denominator vanishes", float(sub.jumps[bad]))
        log_factor[hit] = np.log(scaled) - np.log(scaled + d_slot[hit])
    rev_factor = np.concatenate([np.cumsum(log_factor[::-1])[::-1], [0.0]])
    n_le = np.searchsorted(sub.jumps, grid, side="right")
    log_val = -rev[idx] + rev_factor[n_le]
    values = np.where(grid > 0, np.exp(log_val), 0.0)
    return _finish(grid, values, f"F{target_slot}_sps", sub, target_slot)


def estimate_F1_pss(sub: SubDistSet, grid=None, t_max: float | None = None) -> CurveEstimate:
    """Distribution of the parallel slot: reverse-time product integral."""
    grid, mesh = _prepare(sub, grid, t_max)
    st = _pss_state(mesh)
    C_b = _value_at_breaks(st["C"])[_grid_index(mesh, grid)]
    n_le = np.searchsorted(sub.jumps, grid, side="right")
    log_val = st["rev_pi"][n_le] - C_b
    values = np.where(grid > 0, np.exp(log_val), 0.0)
    return _finish(grid, values, "F1_pss", sub, 1)


def estimate_F2_pss(sub: SubDistSet, target_slot: int = 2, grid=None, t_max: float | None = None) -> CurveEstimate:
    """Distribution of a series-block slot of the parallel-series system."""
    s = _slot_index(target_slot)
    grid, mesh = _prepare(sub, grid, t_max)
    st = _pss_state(mesh)
    logF1, delta = st["logF1"], st["delta"]
    # forward integrals stop at the last grid time
    beyond = mesh.breaks[:-1] >= mesh.last
    dens = np.where(beyond[:, None], 0.0, mesh.nodes(mesh.dens[s]))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        gap = -np.expm1(-delta)  # (F1 - F) / F1
        _guard(gap, dens, mesh, "F_hat_1 - F_hat")
        integrand = np.where(dens > 0, np.exp(np.log(dens) - math.log(mesh.An) - logF1 - np.log(gap)), 0.0)
    integrand[0] = np.where(np.isfinite(integrand[0]), integrand[0], 0.0)
    if not np.all(np.isfinite(integrand)):
        cell, col = np.argwhere(~np.isfinite(integrand))[0]
        raise SingularityError("F_hat_1 - F_hat underflows", float(mesh.nodes(mesh.fine)[cell, col]))
    cells = mesh.cell_integrals(integrand)
    fwd = np.concatenate([[0.0], np.cumsum(cells)])
    idx = _grid_index(mesh, grid)
    # jump factors: den = F1(T) - F(T-), num = den - d/(A+n)
    d_slot = sub.counts[:, s]
    log_factor = np.zeros(sub.jumps.size)
    hit = np.nonzero(d_slot > 0)[0]
    if hit.size:
        base = st["base"][hit]  # (A+n) F(T-)
        cell_of = np.searchsorted(mesh.breaks, sub.jumps[hit]) - 1  # cell ending at the jump
        gap_before = st["delta"][cell_of, -1]  # includes the jump itself
        C_at = _value_at_breaks(st["C"])[cell_of + 1]
        log_F1_at = st["rev_pi"][hit + 1] - C_at
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            scaled = np.where(base > 0, base * np.expm1(gap_before - st["log_pi_p"][hit]),
                              mesh.An * np.exp(log_F1_at))  # (A+n)(F1(T) - F(T-))
        if np.any(~(scaled > 0)):
            bad = hit[np.argmax(~(scaled > 0))]
            raise SingularityError("jump factor denominator vanishes", float(sub.jumps[bad]))
        num = scaled - d_slot[hit]
        if np.any(num < -_REL_GUARD * scaled):
            bad = hit[np.argmax(num < -_REL_GUARD * scaled)]
            raise SingularityError("jump factor numerator is negative", float(sub.jumps[bad]))
        with np.errstate(divide="ignore"):
            log_factor[hit] = np.log(np.maximum(num, 0.0)) - np.log(scaled)
    cum_factor = np.concatenate([[0.0], np.cumsum(log_factor)])
    n_le = np.searchsorted(sub.jumps, grid, side="right")
    log_surv = -fwd[idx] + cum_factor[n_le]
    values = -np.expm1(log_surv)
    return _finish(grid, values, f"F{target_slot}_pss", sub, target_slot)


# --------------------------------------------------------------------------- system-level entry points


def _collapsed(records, view: ThreeComponentView) -> list:
    out = []
    for r in records:
        try:
            out.append((r.t, view.collapse(r.delta)))
        except KeyError:
            raise ValueError(f"system {r.id}: cause {r.delta} is not a component of the structure") from None
    return out


def estimate_component(expr: StructureExpr, records, target: int, guesses=None, grid=None,
                       t_max: float | None = None, mass: float = 1.0) -> CurveEstimate:
    """Distribution-function estimate of one component of a coherent system.

    The system is reduced to the canonical three-slot form around ``target``
    using whichever of its series-parallel or parallel-series forms has no
    repeated component; causes are collapsed onto the slots.  ``guesses`` are
    the prior lifetime guesses of the three slots (exponential with mean 1 by
    default).
    """
    sps, pss = to_sps(expr), to_pss(expr)
    candidates = [(k, e) for k, e in (("SPS", sps), ("PSS", pss)) if not has_repeated_component(e)]
    if not candidates:
        raise UnsupportedSystemError("both the series-parallel and parallel-series forms repeat a component")
    view, last = None, None
    for kind, form in candidates:
        try:
            view = canonical_three(form, target, kind)
            break
        except StructureError as exc:
            last = exc
    if view is None:
        raise UnsupportedSystemError(str(last))
    g = list(guesses or default_guesses())
    priors = prior_measures_from_guess(g[0], g[1], None if view.two_component else g[2], view.kind, mass=mass)
    sub = posterior_subdist(priors, _collapsed(records, view), view.kind)
    if view.target_slot == 1:
        est = (estimate_F1_sps if view.kind == "SPS" else estimate_F1_pss)(sub, grid=grid, t_max=t_max)
    else:
        fn = estimate_F2_sps if view.kind == "SPS" else estimate_F2_pss
        est = fn(sub, view.target_slot, grid=grid, t_max=t_max)
    meta = dict(est.meta, target=target, x1=sorted(view.x1), x2=sorted(view.x2), x3=sorted(view.x3))
    return CurveEstimate(est.t, est.values, f"component {target}", est.rho, meta)


def estimate_two_component(records, kind: str, j: int, guesses=None, grid=None, t_max: float | None = None,
                           mass: float = 1.0) -> CurveEstimate:
    """Component ``j`` of a two-component series (``"series"``) or parallel system."""
    kind = {"series": "SPS", "parallel": "PSS", "sps": "SPS", "pss": "PSS"}.get(kind.lower())
    if kind is None:
        raise ValueError("kind must be series or parallel")
    if j not in (1, 2):
        raise ValueError("component must be 1 or 2")
    g = list(guesses or default_guesses())
    if j == 2:
        g[0], g[1] = g[1], g[0]
    priors = prior_measures_from_guess(g[0], g[1], None, kind, mass=mass)
    pairs = [(r.t, 1 if r.delta == j else 2) for r in records]
    sub = posterior_subdist(priors, pairs, kind)
    est = (estimate_F1_sps if kind == "SPS" else estimate_F1_pss)(sub, grid=grid, t_max=t_max)
    return CurveEstimate(est.t, est.values, f"component {j}", est.rho, dict(est.meta, target=j))
