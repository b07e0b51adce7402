"""Lifetime records under exact, right, left and interval censoring, plus CSV I/O.

Component observations are intervals ``(l, u)``: ``l == u`` is an exact
failure, ``(t, inf)`` right censoring, ``(0, t)`` left censoring and
``0 < l < u < inf`` interval censoring.
"""
from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "CensorKind",
    "ObsInterval",
    "SystemRecord",
    "ComponentDataset",
    "MaskedRecord",
    "DataFormatError",
    "format_time",
    "intervals_from_series",
    "intervals_from_parallel",
    "load_component_csv",
    "write_component_csv",
    "load_masked_csv",
    "write_masked_csv",
    "load_system_csv",
    "write_system_csv",
    "fixture_path",
]


class DataFormatError(ValueError):
    """Malformed input; ``row`` is the 1-based data row number when known."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")


class CensorKind(enum.Enum):
    EXACT = "exact"
    RIGHT = "right"
    LEFT = "left"
    INTERVAL = "interval"

    @property
    def code(self) -> int:
        """Integer code shared with the likelihood kernels."""
        return _KIND_CODES[self]


_KIND_CODES = {CensorKind.EXACT: 0, CensorKind.RIGHT: 1, CensorKind.LEFT: 2, CensorKind.INTERVAL: 3}


@dataclass(frozen=True)
class ObsInterval:
    l: float
    u: float

    def __post_init__(self):
        l, u = float(self.l), float(self.u)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "u", u)
        if math.isnan(l) or math.isnan(u):
            raise ValueError("interval bounds must not be NaN")
        if l < 0 or math.isinf(l):
            raise ValueError(f"lower bound must be finite and >= 0, got {l}")
        if u < l:
            raise ValueError(f"upper bound {u} is below lower bound {l}")
        if l == 0 and math.isinf(u):
            raise ValueError("(0, inf) carries no information")
        if l == u == 0:
            raise ValueError("exact failure at time 0")

    @classmethod
    def exact(cls, t: float) -> "ObsInterval":
        return cls(t, t)

    @classmethod
    def right(cls, t: float) -> "ObsInterval":
        return cls(t, math.inf)

    @classmethod
    def left(cls, t: float) -> "ObsInterval":
        return cls(0.0, t)

    @property
    def kind(self) -> CensorKind:
        if self.l == self.u:
            return CensorKind.EXACT
        if math.isinf(self.u):
            return CensorKind.RIGHT
        if self.l == 0:
            return CensorKind.LEFT
        return CensorKind.INTERVAL


@dataclass(frozen=True)
class SystemRecord:
    id: int
    t: float
    delta: int

    def __post_init__(self):
        if not self.t > 0 or math.isinf(self.t):
            raise ValueError(f"system failure time must be positive and finite, got {self.t}")
        if self.delta < 1:
            raise ValueError(f"cause must be a component id >= 1, got {self.delta}")


@dataclass(frozen=True)
class ComponentDataset:
    """Per-system component intervals; ``rows[i][j]`` is component ``j+1`` of system ``i``."""

    m: int
    rows: tuple
    ids: tuple = ()

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        ids = tuple(self.ids) if self.ids else tuple(range(1, len(rows) + 1))
        if len(ids) != len(rows):
            raise ValueError("ids and rows differ in length")
        object.__setattr__(self, "ids", ids)
        for i, r in enumerate(rows):
            if len(r) != self.m:
                raise ValueError(f"system {ids[i]} has {len(r)} components, expected {self.m}")

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, j: int) -> list:
        """Intervals of component ``j`` (1-based) across systems."""
        if not 1 <= j <= self.m:
            raise IndexError(f"component {j} outside 1..{self.m}")
        return [r[j - 1] for r in self.rows]

    def arrays(self, j: int) -> tuple:
        """``(l, u, code)`` arrays for component ``j``; codes follow :attr:`CensorKind.code`."""
        col = self.column(j)
        l = np.array([iv.l for iv in col], dtype=float)
        u = np.array([iv.u for iv in col], dtype=float)
        code = np.array([iv.kind.code for iv in col], dtype=np.int8)
        return l, u, code


@dataclass(frozen=True)
class MaskedRecord:
    """System failure with per-component status; ``delta[j]`` is None when masked.

    Status codes: 1 exact (cause), 2 right censored, 3 left censored.
    """

    id: int
    t: float
    delta: tuple
    upsilon: tuple

    def __post_init__(self):
        object.__setattr__(self, "delta", tuple(self.delta))
        object.__setattr__(self, "upsilon", tuple(int(v) for v in self.upsilon))
        if len(self.delta) != len(self.upsilon):
            raise ValueError("delta and upsilon lengths differ")
        if not self.t > 0 or math.isinf(self.t):
            raise ValueError(f"system failure time must be positive and finite, got {self.t}")
        for j, (d, v) in enumerate(zip(self.delta, self.upsilon), start=1):
            if v not in (0, 1):
                raise ValueError(f"component {j}: upsilon must be 0 or 1")
            if v == 1 and d is not None:
                raise ValueError(f"component {j}: masked but status {d} given")
            if v == 0 and d not in (1, 2, 3):
                raise ValueError(f"component {j}: unmasked status must be 1, 2 or 3, got {d!r}")

    @property
    def m(self) -> int:
        return len(self.delta)

    @property
    def mask_set(self) -> frozenset:
        masked = frozenset(j for j, v in enumerate(self.upsilon, start=1) if v)
        if masked:
            return masked
        causes = [j for j, d in enumerate(self.delta, start=1) if d == 1]
        return frozenset(causes)

    @property
    def is_masked(self) -> bool:
        return any(self.upsilon)


# --------------------------------------------------------------------------- conversions


def intervals_from_series(records: Sequence[SystemRecord], m: int) -> ComponentDataset:
    """Cause gets an exact interval, every other component is right censored."""
    return _intervals(records, m, ObsInterval.right)


def intervals_from_parallel(records: Sequence[SystemRecord], m: int) -> ComponentDataset:
    """Cause gets an exact interval, every other component is left censored."""
    return _intervals(records, m, ObsInterval.left)


def _intervals(records, m, other) -> ComponentDataset:
    rows = []
    for r in records:
        if r.delta > m:
            raise ValueError(f"system {r.id}: cause {r.delta} exceeds m={m}")
        rows.append(tuple(ObsInterval.exact(r.t) if j == r.delta else other(r.t) for j in range(1, m + 1)))
    return ComponentDataset(m, tuple(rows), tuple(r.id for r in records))


# --------------------------------------------------------------------------- CSV


def format_time(x: float) -> str:
    """Six significant digits; ``inf`` is the only infinity token."""
    if math.isinf(x):
        return "inf"
    return f"{x:.6g}"


def _parse_time(token: str, row: int) -> float:
    token = token.strip()
    if token == "inf":
        return math.inf
    try:
        value = float(token)
    except ValueError:
        raise DataFormatError(f"cannot parse time {token!r}", row) from None
    if math.isnan(value) or math.isinf(value):
        raise DataFormatError(f"invalid time {token!r}", row)
    return value


def _parse_int(token: str, row: int, what: str) -> int:
    try:
        return int(token.strip())
    except ValueError:
        raise DataFormatError(f"cannot parse {what} {token!r}", row) from None


def _read(path) -> tuple:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError("missing header row") from None
        rows = [r for r in reader if any(c.strip() for c in r)]
    return header, rows


def _write(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def load_component_csv(path) -> ComponentDataset:
    header, rows = _read(path)
    if len(header) < 3 or header[0] != "id" or (len(header) - 1) % 2:
        raise DataFormatError(f"expected header id,l_1,u_1,...; got {','.join(header)}")
    m = (len(header) - 1) // 2
    expected = ["id"] + [f"{p}_{j}" for j in range(1, m + 1) for p in ("l", "u")]
    if header != expected:
        raise DataFormatError(f"expected header {','.join(expected)}")
    ids, out = [], []
    for n, r in enumerate(rows, start=1):
        if len(r) != len(header):
            raise DataFormatError(f"expected {len(header)} fields, got {len(r)}", n)
        ids.append(_parse_int(r[0], n, "id"))
        intervals = []
        for j in range(m):
            l, u = _parse_time(r[1 + 2 * j], n), _parse_time(r[2 + 2 * j], n)
            try:
                intervals.append(ObsInterval(l, u))
            except ValueError as exc:
                raise DataFormatError(f"component {j + 1}: {exc}", n) from None
        out.append(tuple(intervals))
    return ComponentDataset(m, tuple(out), tuple(ids))


def write_component_csv(ds: ComponentDataset, path) -> None:
    header = ["id"] + [f"{p}_{j}" for j in range(1, ds.m + 1) for p in ("l", "u")]
    rows = []
    for i, r in zip(ds.ids, ds.rows):
        rows.append([str(i)] + [format_time(x) for iv in r for x in (iv.l, iv.u)])
    _write(path, header, rows)


def load_masked_csv(path) -> list:
    header, rows = _read(path)
    if len(header) < 4 or header[:2] != ["id", "t"] or len(header) % 2:
        raise DataFormatError(f"expected header id,t,delta_1,upsilon_1,...; got {','.join(header)}")
    m = (len(header) - 2) // 2
    expected = ["id", "t"] + [f"{p}_{j}" for j in range(1, m + 1) for p in ("delta", "upsilon")]
    if header != expected:
        raise DataFormatError(f"expected header {','.join(expected)}")
    out = []
    for n, r in enumerate(rows, start=1):
        if len(r) != len(header):
            raise DataFormatError(f"expected {len(header)} fields, got {len(r)}", n)
        deltas, ups = [], []
        for j in range(m):
            d, v = r[2 + 2 * j].strip(), _parse_int(r[3 + 2 * j], n, "upsilon")
            if v not in (0, 1):
                raise DataFormatError(f"component {j + 1}: upsilon must be 0 or 1", n)
            if (d == "-") != (v == 1):
                raise DataFormatError(f"component {j + 1}: status {d!r} inconsistent with upsilon {v}", n)
            deltas.append(None if d == "-" else _parse_int(d, n, "delta"))
            ups.append(v)
        try:
            out.append(MaskedRecord(_parse_int(r[0], n, "id"), _parse_time(r[1], n), tuple(deltas), tuple(ups)))
        except ValueError as exc:
            raise DataFormatError(str(exc), n) from None
    return out


def write_masked_csv(records: Sequence[MaskedRecord], path) -> None:
    m = records[0].m if records else 0
    header = ["id", "t"] + [f"{p}_{j}" for j in range(1, m + 1) for p in ("delta", "upsilon")]
    rows = []
    for rec in records:
        row = [str(rec.id), format_time(rec.t)]
        for d, v in zip(rec.delta, rec.upsilon):
            row += ["-" if d is None else str(d), str(v)]
        rows.append(row)
    _write(path, header, rows)


def load_system_csv(path) -> list:
    header, rows = _read(path)
    if header != ["id", "t", "delta"]:
        raise DataFormatError(f"expected header id,t,delta; got {','.join(header)}")
    out, seen = [], set()
    for n, r in enumerate(rows, start=1):
        if len(r) != 3:
            raise DataFormatError(f"expected 3 fields, got {len(r)}", n)
        rid = _parse_int(r[0], n, "id")
        if rid in seen:
            warnings.warn(f"duplicate system id {rid} at row {n}", stacklevel=2)
        seen.add(rid)
        try:
            out.append(SystemRecord(rid, _parse_time(r[1], n), _parse_int(r[2], n, "delta")))
        except ValueError as exc:
            raise DataFormatError(str(exc), n) from None
    return out


def write_system_csv(records: Iterable[SystemRecord], path) -> None:
    _write(path, ["id", "t", "delta"], [[str(r.id), format_time(r.t), str(r.delta)] for r in records])


def fixture_path(name: str) -> Path:
    """Path of a bundled CSV fixture, e.g. ``fixture_path("device_g_components.csv")``."""
    path = Path(str(resources.files("cohrel") / "fixtures" / name))
    if not path.exists():
        raise FileNotFoundError(name)
    return path
