"""Coherent-system structure functions as min/max expression trees.

A system lifetime is a composition of ``min`` (series) and ``max`` (parallel)
over component lifetimes.  Every coherent system can be rewritten as a
series-parallel system (SPS: min over maxes of minimal cut sets) or as a
parallel-series system (PSS: max over mins of minimal path sets).
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from cohrel.data import CensorKind

__all__ = [
    "Leaf",
    "MinOf",
    "MaxOf",
    "StructureExpr",
    "StructureError",
    "StructureSyntaxError",
    "TieError",
    "NotRepresentableError",
    "DegenerateViewError",
    "ThreeComponentView",
    "koutofm",
    "series",
    "parallel",
    "bridge",
    "parse",
    "to_text",
    "component_ids",
    "n_components",
    "lifetime",
    "failure_cause",
    "component_statuses",
    "works",
    "minimal_path_sets",
    "minimal_cut_sets",
    "to_sps",
    "to_pss",
    "has_repeated_component",
    "two_level_blocks",
    "canonical_three",
]

MAX_ENUMERATED_COMPONENTS = 20


class StructureError(ValueError):
    """Invalid structure expression or incompatible input."""


class StructureSyntaxError(StructureError):
    """DSL parse failure; ``position`` is the 0-based offset of the offending character."""

    def __init__(self, message: str, text: str, position: int):
        self.text = text
        self.position = position
        super().__init__(message)

    def diagnostic(self) -> str:
        return f"{self.args[0]}\n  {self.text}\n  {' ' * self.position}^"


class TieError(StructureError):
    """Two components share the failure time that determines the system lifetime."""


class NotRepresentableError(StructureError):
    """The structure cannot be reduced to a three-slot view without repeating a component."""


class DegenerateViewError(StructureError):
    """The target's block or the remaining blocks are empty in the requested form."""


@dataclass(frozen=True)
class Leaf:
    index: int

    def __post_init__(self):
        if int(self.index) != self.index or self.index < 1:
            raise StructureError(f"component ids are positive integers, got {self.index!r}")


@dataclass(frozen=True)
class MinOf:
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise StructureError("min() needs at least two operands")


@dataclass(frozen=True)
class MaxOf:
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise StructureError("max() needs at least two operands")


StructureExpr = Union[Leaf, MinOf, MaxOf]


def _min(children: Sequence[StructureExpr]) -> StructureExpr:
    children = list(children)
    return children[0] if len(children) == 1 else MinOf(tuple(children))


def _max(children: Sequence[StructureExpr]) -> StructureExpr:
    children = list(children)
    return children[0] if len(children) == 1 else MaxOf(tuple(children))


def koutofm(k: int, m: int) -> StructureExpr:
    """k-out-of-m working system, expanded to a max over the mins of all k-subsets."""
    if not 1 <= k <= m:
        raise StructureError(f"koutofm needs 1 <= k <= m, got k={k}, m={m}")
    return _max([_min([Leaf(i) for i in sub]) for sub in itertools.combinations(range(1, m + 1), k)])


def series(m: int) -> StructureExpr:
    return koutofm(m, m)


def parallel(m: int) -> StructureExpr:
    return koutofm(1, m)


def bridge() -> StructureExpr:
    """Five-component bridge written through its minimal path sets."""
    return MaxOf((
        MinOf((Leaf(1), Leaf(4))),
        MinOf((Leaf(2), Leaf(5))),
        MinOf((Leaf(1), Leaf(3), Leaf(5))),
        MinOf((Leaf(2), Leaf(3), Leaf(4))),
    ))


# --------------------------------------------------------------------------- DSL

_TOKEN = re.compile(r"\s*(?:(\d+)|(min|max|koutofm)\s*\(|(,)|(\)))", re.IGNORECASE)


def parse(text: str) -> StructureExpr:
    """Parse ``expr := INT | min(expr, expr+) | max(expr, expr+) | koutofm(INT, INT)``."""
    pos = 0

    def error(msg, at):
        raise StructureSyntaxError(msg, text, at)

    def skip_ws(p):
        while p < len(text) and text[p].isspace():
            p += 1
        return p

    def parse_int(p):
        p = skip_ws(p)
        m = re.match(r"\d+", text[p:])
        if not m:
            error("expected an integer", p)
        return int(m.group()), p + m.end()

    def expect(p, ch):
        p = skip_ws(p)
        if p >= len(text) or text[p] != ch:
            error(f"expected '{ch}'", p)
        return p + 1

    def parse_expr(p):
        p = skip_ws(p)
        if p >= len(text):
            error("unexpected end of input", p)
        m = _TOKEN.match(text, p)
        if not m or m.group(3) or m.group(4):
            error("expected an integer, min(, max( or koutofm(", p)
        if m.group(1):
            value = int(m.group(1))
            if value < 1:
                error("component ids start at 1", p)
            return Leaf(value), m.end()
        name = m.group(2).lower()
        p = m.end()
        if name == "koutofm":
            k, p = parse_int(p)
            p = expect(p, ",")
            mm, p2 = parse_int(p)
            if not 1 <= k <= mm:
                error(f"koutofm needs 1 <= k <= m, got ({k}, {mm})", p)
            p = expect(p2, ")")
            return koutofm(k, mm), p
        children = []
        expr, p = parse_expr(p)
        children.append(expr)
        while True:
            p = skip_ws(p)
            if p < len(text) and text[p] == ",":
                expr, p = parse_expr(p + 1)
                children.append(expr)
            elif p < len(text) and text[p] == ")":
                p += 1
                break
            else:
                error("expected ',' or ')'", p)
        if len(children) < 2:
            error(f"{name}() needs at least two operands", p - 1)
        return (MinOf if name == "min" else MaxOf)(tuple(children)), p

    expr, pos = parse_expr(0)
    pos = skip_ws(pos)
    if pos != len(text):
        error("trailing characters", pos)
    validate(expr)
    return expr


def to_text(expr: StructureExpr) -> str:
    if isinstance(expr, Leaf):
        return str(expr.index)
    name = "min" if isinstance(expr, MinOf) else "max"
    return f"{name}({','.join(to_text(c) for c in expr.children)})"


# --------------------------------------------------------------------------- basics


def _leaves(expr: StructureExpr):
    if isinstance(expr, Leaf):
        yield expr.index
    else:
        for child in expr.children:
            yield from _leaves(child)


def component_ids(expr: StructureExpr) -> frozenset:
    return frozenset(_leaves(expr))


def n_components(expr: StructureExpr) -> int:
    return max(_leaves(expr))


def validate(expr: StructureExpr, m: int | None = None) -> int:
    """Check that every id in 1..m occurs; returns m."""
    ids = component_ids(expr)
    m = max(ids) if m is None else m
    missing = set(range(1, m + 1)) - ids
    if missing:
        raise StructureError(f"components {sorted(missing)} do not appear in the structure")
    if max(ids) > m:
        raise StructureError(f"component id {max(ids)} exceeds m={m}")
    return m


def _check_times(expr, times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    m = n_components(expr)
    if times.ndim != 1 or times.shape[0] != m:
        raise StructureError(f"expected {m} component times, got shape {times.shape}")
    return times


def _evaluate(expr, times):
    if isinstance(expr, Leaf):
        return times[..., expr.index - 1]
    values = [_evaluate(c, times) for c in expr.children]
    return np.minimum.reduce(values) if isinstance(expr, MinOf) else np.maximum.reduce(values)


def lifetime(expr: StructureExpr, times: Sequence[float]):
    """System lifetime.  ``times`` may be a vector of length m or an (n, m) matrix."""
    arr = np.asarray(times, dtype=float)
    if arr.ndim == 2:
        if arr.shape[1] != n_components(expr):
            raise StructureError(f"expected {n_components(expr)} columns, got {arr.shape[1]}")
        return _evaluate(expr, arr)
    return float(_evaluate(expr, _check_times(expr, arr)))


def failure_cause(expr: StructureExpr, times: Sequence[float]) -> int:
    """1-based id of the component whose failure time equals the system lifetime."""
    times = _check_times(expr, times)
    t = float(_evaluate(expr, times))
    hits = np.flatnonzero(times == t)
    if hits.size != 1:
        raise TieError(f"components {list(hits + 1)} share the system failure time {t}")
    return int(hits[0]) + 1


def component_statuses(expr: StructureExpr, times: Sequence[float]) -> tuple:
    """Censoring status of each component at the system failure time."""
    times = _check_times(expr, times)
    failure_cause(expr, times)
    t = float(_evaluate(expr, times))
    return tuple(
        CensorKind.EXACT if x == t else (CensorKind.LEFT if x < t else CensorKind.RIGHT) for x in times
    )


def works(expr: StructureExpr, state) -> np.ndarray:
    """Boolean structure function; ``state[..., j-1]`` is True when component j works."""
    state = np.asarray(state, dtype=bool)
    if isinstance(expr, Leaf):
        return state[..., expr.index - 1]
    values = [works(c, state) for c in expr.children]
    return np.logical_and.reduce(values) if isinstance(expr, MinOf) else np.logical_or.reduce(values)


def _all_states(m: int) -> np.ndarray:
    if m > MAX_ENUMERATED_COMPONENTS:
        raise StructureError(f"Boolean enumeration is limited to {MAX_ENUMERATED_COMPONENTS} components")
    codes = np.arange(2**m, dtype=np.int64)
    return ((codes[:, None] >> np.arange(m)) & 1).astype(bool)


def _sort_sets(sets) -> list:
    return sorted(sets, key=lambda s: (len(s), sorted(s)))


def _minimal_sets(expr: StructureExpr, failing: bool) -> set:
    # ``failing`` selects cut sets (members failed) instead of path sets (members working)
    m = n_components(expr)
    members = _all_states(m)

    def hit(rows):
        up = works(expr, ~rows if failing else rows)
        return ~up if failing else up

    qualifies = hit(members)
    redundant = np.zeros_like(qualifies)
    for j in range(m):
        reduced = members.copy()
        reduced[:, j] = False
        redundant |= members[:, j] & hit(reduced)
    return {frozenset(int(j) + 1 for j in np.flatnonzero(row)) for row in members[qualifies & ~redundant]}


def minimal_path_sets(expr: StructureExpr) -> set:
    """Inclusion-minimal sets of working components that keep the system working."""
    return _minimal_sets(expr, failing=False)


def minimal_cut_sets(expr: StructureExpr) -> set:
    """Inclusion-minimal sets of failed components that fail the system."""
    return _minimal_sets(expr, failing=True)


def to_sps(expr: StructureExpr) -> StructureExpr:
    """Series of parallel blocks, one block per minimal cut set."""
    blocks = [_max([Leaf(j) for j in sorted(c)]) for c in _sort_sets(minimal_cut_sets(expr))]
    return _min(blocks)


def to_pss(expr: StructureExpr) -> StructureExpr:
    """Parallel of series blocks, one block per minimal path set."""
    blocks = [_min([Leaf(j) for j in sorted(p)]) for p in _sort_sets(minimal_path_sets(expr))]
    return _max(blocks)


def has_repeated_component(expr: StructureExpr) -> bool:
    ids = list(_leaves(expr))
    return len(ids) != len(set(ids))


# --------------------------------------------------------------------------- three-slot views


def two_level_blocks(expr: StructureExpr, kind: str) -> list | None:
    """Blocks of a two-level form, or None when ``expr`` is not in that form.

    For ``kind="SPS"`` the expression must be a min over leaves or maxes of
    leaves; for ``kind="PSS"`` a max over leaves or mins of leaves.
    """
    outer, inner = (MinOf, MaxOf) if kind == "SPS" else (MaxOf, MinOf)

    def block(node):
        if isinstance(node, Leaf):
            return [node.index]
        if isinstance(node, inner) and all(isinstance(c, Leaf) for c in node.children):
            return [c.index for c in node.children]
        return None

    if isinstance(expr, outer):
        blocks = [block(c) for c in expr.children]
        return None if any(b is None for b in blocks) else blocks
    single = block(expr)
    return None if single is None else [single]


@dataclass(frozen=True)
class ThreeComponentView:
    """Reduction of a two-level system to the canonical three-slot form.

    SPS: ``T = min(X1, max(X2, X3))``; PSS: ``T = max(X1, min(X2, X3))``.
    Each slot is a set of original components acting as one pseudo-component.
    ``target_slot`` is 2 when the target shares its block with other
    components, and 1 when it forms a block on its own.  An empty ``x3``
    means the two-component series (SPS) or parallel (PSS) case.
    """

    kind: str
    x1: frozenset
    x2: frozenset
    x3: frozenset
    target: int
    target_slot: int
    cause_map: dict = field(hash=False, compare=True)

    def collapse(self, delta: int) -> int:
        return self.cause_map[delta]

    @property
    def two_component(self) -> bool:
        return not self.x3


def canonical_three(expr: StructureExpr, target: int, kind: str | None = None) -> ThreeComponentView:
    """Three-slot view of a two-level SPS or PSS for one target component.

    When ``kind`` is None the SPS reading is tried first, then the PSS one.
    """
    kinds = [kind] if kind else ["SPS", "PSS"]
    if has_repeated_component(expr):
        raise NotRepresentableError("a component appears in more than one block")
    last_error = None
    for k in kinds:
        blocks = two_level_blocks(expr, k)
        if blocks is None:
            last_error = NotRepresentableError(f"expression is not a two-level {k}")
            continue
        try:
            return _view_from_blocks(blocks, target, k)
        except DegenerateViewError as exc:
            last_error = exc
    raise last_error


def _view_from_blocks(blocks: list, target: int, kind: str) -> ThreeComponentView:
    owner = [b for b in blocks if target in b]
    if len(owner) != 1:
        raise DegenerateViewError(f"component {target} is not in exactly one block")
    own = owner[0]
    others = [b for b in blocks if b is not own]
    siblings = frozenset(own) - {target}
    rest = frozenset(j for b in others for j in b)
    if siblings:
        if not rest:
            raise DegenerateViewError(f"no blocks besides the one holding component {target}")
        x1, x2, x3, slot = rest, frozenset({target}), siblings, 2
    else:
        if not rest:
            raise DegenerateViewError("single-component system")
        if len(others) == 1 and len(others[0]) >= 2:
            block = sorted(others[0])
            x1, x2, x3 = frozenset({target}), frozenset(block[:1]), frozenset(block[1:])
        else:
            x1, x2, x3 = frozenset({target}), rest, frozenset()
        slot = 1
    cause_map = {}
    for slot_id, members in ((1, x1), (2, x2), (3, x3)):
        for j in members:
            cause_map[j] = slot_id
    return ThreeComponentView(kind, x1, x2, x3, target, slot, cause_map)
