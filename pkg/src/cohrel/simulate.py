"""Synthetic coherent-system data: component draws, censoring patterns and masking."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize, special, stats

from cohrel.data import CensorKind, ComponentDataset, MaskedRecord, ObsInterval, SystemRecord
from cohrel.numerics import RandomStream
from cohrel.structure import StructureExpr, component_statuses, failure_cause, lifetime, minimal_cut_sets

__all__ = [
    "SpecError",
    "ComponentDistSpec",
    "MaskingSpec",
    "draw_component_times",
    "observe",
    "apply_masking",
    "parse_dist",
]

FAMILIES = ("weibull2", "weibull3", "gamma", "lognormal", "mixture")
_STATUS_CODE = {CensorKind.EXACT: 1, CensorKind.RIGHT: 2, CensorKind.LEFT: 3}


class SpecError(ValueError):
    """Unknown family, bad parameters or infeasible moment match."""


def _weibull_shape_for_cv(cv: float) -> float:
    def gap(log_shape):
        k = math.exp(log_shape)
        g1, g2 = special.gammaln(1 + 1 / k), special.gammaln(1 + 2 / k)
        return math.sqrt(math.expm1(g2 - 2 * g1)) - cv

    try:
        return math.exp(optimize.brentq(gap, math.log(0.05), math.log(500.0), xtol=1e-12, rtol=1e-10))
    except ValueError:
        raise SpecError(f"no Weibull shape matches coefficient of variation {cv}") from None


@dataclass(frozen=True)
class ComponentDistSpec:
    """Component lifetime distribution.

    Native parameters per family: ``weibull2(shape, scale)``,
    ``weibull3(shape, scale, location)``, ``gamma(shape, scale)``,
    ``lognormal(meanlog, sdlog)``; ``mixture`` is the exponential/atom
    mixture with CDF ``0.6(1 - exp(-t/4))`` plus mass 0.25 at 1 and 0.15 at 3.
    """

    family: str
    params: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SpecError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        need = {"weibull2": 2, "weibull3": 3, "gamma": 2, "lognormal": 2, "mixture": 0}[self.family]
        if len(self.params) != need:
            raise SpecError(f"{self.family} takes {need} parameters, got {len(self.params)}")
        positive = self.params[:2] if self.family != "lognormal" else self.params[1:2]
        if any(not p > 0 for p in positive):
            raise SpecError(f"{self.family} parameters must be positive: {self.params}")
        if self.family == "weibull3" and self.params[2] < 0:
            raise SpecError("location must be nonnegative")

    @classmethod
    def from_moments(cls, family: str, mean: float, sd: float, location: float = 0.0) -> "ComponentDistSpec":
        if not sd > 0 or not mean > 0:
            raise SpecError(f"moment matching needs positive mean and sd, got mean={mean}, sd={sd}")
        var = sd * sd
        if family == "gamma":
            return cls("gamma", (mean * mean / var, var / mean))
        if family == "lognormal":
            s2 = math.log1p(var / (mean * mean))
            return cls("lognormal", (math.log(mean) - s2 / 2, math.sqrt(s2)))
        if family in ("weibull2", "weibull3"):
            shift = location if family == "weibull3" else 0.0
            if not mean > shift:
                raise SpecError(f"mean {mean} must exceed the location {shift}")
            k = _weibull_shape_for_cv(sd / (mean - shift))
            scale = (mean - shift) / math.exp(special.gammaln(1 + 1 / k))
            return cls("weibull3", (k, scale, shift)) if family == "weibull3" else cls("weibull2", (k, scale))
        raise SpecError(f"cannot moment-match family {family!r}")

    def frozen(self):
        """Equivalent frozen scipy distribution (continuous families only)."""
        if self.family == "mixture":
            raise SpecError("the mixture family has atoms and no scipy equivalent")
        p = self.params
        if self.family == "weibull2":
            return stats.weibull_min(p[0], scale=p[1])
        if self.family == "weibull3":
            return stats.weibull_min(p[0], loc=p[2], scale=p[1])
        if self.family == "gamma":
            return stats.gamma(p[0], scale=p[1])
        return stats.lognorm(p[1], scale=math.exp(p[0]))

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "mixture":
            out = 0.6 * -np.expm1(-np.maximum(t, 0) / 4.0) + 0.25 * (t >= 1.0) + 0.15 * (t >= 3.0)
        else:
            out = self.frozen().cdf(t)
        return float(out) if np.ndim(out) == 0 else out

    def reliability(self, t):
        return 1.0 - self.cdf(t) if np.ndim(t) == 0 else 1.0 - np.asarray(self.cdf(t))

    @property
    def mean(self) -> float:
        if self.family == "mixture":
            return 0.6 * 4.0 + 0.25 * 1.0 + 0.15 * 3.0
        return float(self.frozen().mean())

    @property
    def sd(self) -> float:
        if self.family == "mixture":
            second = 0.6 * 2 * 16.0 + 0.25 + 0.15 * 9.0
            return math.sqrt(second - self.mean**2)
        return float(self.frozen().std())

    def sample(self, n: int, stream: RandomStream) -> np.ndarray:
        g = stream.generator
        p = self.params
        if self.family == "weibull2":
            return p[1] * g.weibull(p[0], n)
        if self.family == "weibull3":
            return p[2] + p[1] * g.weibull(p[0], n)
        if self.family == "gamma":
            return g.gamma(p[0], p[1], n)
        if self.family == "lognormal":
            return g.lognormal(p[0], p[1], n)
        u = g.random(n)
        expo = g.exponential(4.0, n)
        return np.where(u < 0.6, expo, np.where(u < 0.85, 1.0, 3.0))


def parse_dist(text: str) -> ComponentDistSpec:
    """Parse ``family:key=value,...``.

    Native keys follow the family (``shape``, ``scale``, ``location``,
    ``meanlog``, ``sdlog``); ``mean`` and ``sd`` (plus optional ``location``
    for weibull3) request moment matching.  ``exp:MEAN`` is a shorthand for
    an exponential lifetime.
    """
    family, _, rest = text.strip().partition(":")
    family = family.strip().lower()
    if family in ("exp", "exponential"):
        try:
            return ComponentDistSpec("weibull2", (1.0, float(rest or 1.0)))
        except ValueError:
            raise SpecError(f"bad exponential mean in {text!r}") from None
    if family == "mixture":
        return ComponentDistSpec("mixture")
    kv = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise SpecError(f"expected key=value in {text!r}")
        try:
            kv[key.strip().lower()] = float(value)
        except ValueError:
            raise SpecError(f"bad number {value!r} in {text!r}") from None
    if "mean" in kv or "sd" in kv:
        if "mean" not in kv or "sd" not in kv:
            raise SpecError("moment matching needs both mean and sd")
        return ComponentDistSpec.from_moments(family, kv["mean"], kv["sd"], kv.get("location", 0.0))
    keys = {"weibull2": ("shape", "scale"), "weibull3": ("shape", "scale", "location"),
            "gamma": ("shape", "scale"), "lognormal": ("meanlog", "sdlog")}.get(family)
    if keys is None:
        raise SpecError(f"unknown family {family!r}")
    try:
        return ComponentDistSpec(family, tuple(kv[k] for k in keys))
    except KeyError as exc:
        raise SpecError(f"{family} needs parameter {exc.args[0]}") from None


def draw_component_times(specs: Sequence[ComponentDistSpec], n: int, stream: RandomStream) -> np.ndarray:
    """``n`` independent rows of component lifetimes, one column per spec."""
    if n < 0:
        raise SpecError("n must be nonnegative")
    return np.column_stack([s.sample(n, stream) for s in specs]) if specs else np.empty((n, 0))


def observe(expr: StructureExpr, times: np.ndarray) -> tuple:
    """System records and component intervals implied by the structure."""
    times = np.asarray(times, dtype=float)
    records, rows = [], []
    for i, row in enumerate(times, start=1):
        t = lifetime(expr, row)
        cause = failure_cause(expr, row)
        records.append(SystemRecord(i, t, cause))
        status = component_statuses(expr, row)
        rows.append(tuple(
            ObsInterval.exact(t) if s is CensorKind.EXACT
            else ObsInterval.right(t) if s is CensorKind.RIGHT else ObsInterval.left(t)
            for s in status
        ))
    m = times.shape[1] if times.ndim == 2 else 0
    return records, ComponentDataset(m, tuple(rows), tuple(r.id for r in records))


@dataclass(frozen=True)
class MaskingSpec:
    p: float
    rule: str = "minimal_cut_set"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise SpecError(f"masking proportion must lie in [0, 1], got {self.p}")
        if self.rule != "minimal_cut_set":
            raise SpecError(f"unknown masking rule {self.rule!r}")


def apply_masking(expr: StructureExpr, records: Sequence[SystemRecord], dataset: ComponentDataset,
                  spec: MaskingSpec, stream: RandomStream) -> list:
    """Masked records; each system is masked independently with probability ``spec.p``.

    A masked system reports as candidates every component of the minimal cut
    sets that are fully failed at the system failure time.  Components outside
    that set keep their known status.
    """
    cuts = [frozenset(c) for c in minimal_cut_sets(expr)]
    draws = stream.uniform(len(records))
    out = []
    for rec, row, u in zip(records, dataset.rows, draws):
        status = [_STATUS_CODE[iv.kind] for iv in row]
        failed = {j for j, s in enumerate(status, start=1) if s != 2}
        candidates = frozenset().union(*[c for c in cuts if c <= failed]) if cuts else frozenset()
        if not candidates:
            raise RuntimeError(f"system {rec.id}: no failed minimal cut set at the failure time")
        if rec.delta not in candidates:
            raise RuntimeError(f"system {rec.id}: cause {rec.delta} outside the failed cut sets")
        if u < spec.p and len(candidates) > 1:
            delta = tuple(None if j in candidates else s for j, s in enumerate(status, start=1))
            ups = tuple(int(j in candidates) for j in range(1, len(status) + 1))
        else:
            delta, ups = tuple(status), (0,) * len(status)
        out.append(MaskedRecord(rec.id, rec.t, delta, ups))
    return out
