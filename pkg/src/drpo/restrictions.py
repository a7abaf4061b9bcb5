"""Portfolio restrictions and their translation into linear regions.

Convex restrictions (short-sale floors, maximum positions, group allocation
caps) become linear inequalities.  Minimum positions and cardinality limits
are non-convex; at desk scale they are handled exactly by enumerating sign
patterns and supports, each of which is a convex polyhedron.

Indices are zero-based throughout.  A restriction held at its "no
restriction" value (``ss_j = -M``, ``w_max >= M``, group cap ``>= M n``,
``w_min = 0``, ``m = n``) emits no constraint at all, so such a set is
indistinguishable from an empty one.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapExceeded, RestrictionError

DEFAULT_BIG_M = 1e6
ENUMERATION_CAP = 12


@dataclass(frozen=True)
class RestrictionSet:
    short_floors: tuple[float, ...] | None = None
    min_position: float | None = None
    max_position: float | None = None
    cardinality: int | None = None
    groups: tuple[tuple[tuple[int, ...], float], ...] = ()
    big_M: float = DEFAULT_BIG_M
    # |w_j| > card_threshold counts as a held position; None reuses the region's epsilon
    card_threshold: float | None = None

    def __post_init__(self):
        if self.short_floors is not None:
            object.__setattr__(self, "short_floors", tuple(float(v) for v in self.short_floors))
        groups = tuple((tuple(int(i) for i in idx), float(cap)) for idx, cap in self.groups)
        object.__setattr__(self, "groups", groups)

    @classmethod
    def no_restriction(cls, n: int, big_M: float = DEFAULT_BIG_M,
                       groups: Sequence[Sequence[int]] = ()) -> "RestrictionSet":
        """Every restriction present but held at its inactive value."""
        return cls(short_floors=(-big_M,) * n, min_position=0.0, max_position=big_M,
                   cardinality=n, groups=tuple((tuple(g), big_M * n) for g in groups), big_M=big_M)

    def is_empty(self, n: int) -> bool:
        return not convex_constraints(self, n) and not _has_nonconvex(self, n)

    def to_dict(self) -> dict:
        return {
            "short_floors": list(self.short_floors) if self.short_floors is not None else None,
            "min_position": self.min_position,
            "max_position": self.max_position,
            "cardinality": self.cardinality,
            "groups": [{"assets": list(idx), "cap": cap} for idx, cap in self.groups],
            "big_M": self.big_M,
            "card_threshold": self.card_threshold,
        }

    @classmethod
    def from_dict(cls, d: dict | None) -> "RestrictionSet":
        if not d:
            return cls()
        known = {"short_floors", "min_position", "max_position", "cardinality", "groups",
                 "big_M", "card_threshold"}
        unknown = set(d) - known
        if unknown:
            raise RestrictionError([f"unknown restriction keys: {sorted(unknown)}"])
        groups = []
        for g in d.get("groups") or ():
            if isinstance(g, dict):
                groups.append((g["assets"], g["cap"]))
            else:
                groups.append((g[0], g[1]))
        card = d.get("cardinality")
        return cls(short_floors=d.get("short_floors"), min_position=d.get("min_position"),
                   max_position=d.get("max_position"),
                   cardinality=None if card is None else int(card), groups=tuple(groups),
                   big_M=float(d.get("big_M", DEFAULT_BIG_M)), card_threshold=d.get("card_threshold"))

    @classmethod
    def from_json(cls, text: str) -> "RestrictionSet":
        return cls.from_dict(json.loads(text))


def validate(rs: RestrictionSet, n: int) -> list[str]:
    """Return every invariant violation (empty list means valid)."""
    errs = []
    if not rs.big_M > 0:
        errs.append("big_M must be positive")
    if rs.short_floors is not None:
        if len(rs.short_floors) != n:
            errs.append(f"short_floors has length {len(rs.short_floors)}, expected {n}")
        if any(not math.isfinite(v) for v in rs.short_floors):
            errs.append("short_floors must be finite")
    if rs.min_position is not None and not rs.min_position >= 0:
        errs.append("min_position must be >= 0")
    if rs.max_position is not None and not rs.max_position > 0:
        errs.append("max_position must be > 0")
    if (rs.min_position is not None and rs.max_position is not None
            and rs.min_position > rs.max_position):
        errs.append("min_position exceeds max_position")
    if rs.cardinality is not None and not 1 <= rs.cardinality <= n:
        errs.append(f"cardinality must lie in [1, {n}], got {rs.cardinality}")
    if rs.card_threshold is not None and not rs.card_threshold > 0:
        errs.append("card_threshold must be > 0")
    for k, (idx, cap) in enumerate(rs.groups):
        if not idx:
            errs.append(f"group {k} is empty")
        if any(not 0 <= i < n for i in idx):
            errs.append(f"group {k} has indices outside 0..{n - 1}")
        if len(set(idx)) != len(idx):
            errs.append(f"group {k} repeats an index")
        if not cap >= 0:
            errs.append(f"group {k} cap must be >= 0")
    return errs


@dataclass(frozen=True)
class Constraint:
    """``coef . w <= bound`` (kind "le") or ``coef . w == bound`` (kind "eq")."""

    coef: np.ndarray
    bound: float
    kind: str = "le"


def _unit(n, j, sign=1.0):
    v = np.zeros(n)
    v[j] = sign
    return v


def convex_constraints(rs: RestrictionSet, n: int) -> list[Constraint]:
    """Linear constraints for the convex restrictions; ``|.| <= c`` is split in two."""
    out = []
    M = rs.big_M
    if rs.short_floors is not None:
        for j, ss in enumerate(rs.short_floors):
            if ss > -M:
                out.append(Constraint(_unit(n, j, -1.0), -ss))
    if rs.max_position is not None and rs.max_position < M:
        for j in range(n):
            if rs.max_position == 0:
                out.append(Constraint(_unit(n, j), 0.0, "eq"))
            else:
                out.append(Constraint(_unit(n, j), rs.max_position))
                out.append(Constraint(_unit(n, j, -1.0), rs.max_position))
    for idx, cap in rs.groups:
        if cap >= M * n:
            continue
        v = np.zeros(n)
        v[list(idx)] = 1.0
        if cap == 0:
            out.append(Constraint(v, 0.0, "eq"))
        else:
            out.append(Constraint(v, cap))
            out.append(Constraint(-v, cap))
    return out


def _has_nonconvex(rs: RestrictionSet, n: int) -> bool:
    return bool(rs.min_position) or (rs.cardinality is not None and rs.cardinality < n)


@dataclass(frozen=True)
class Subregion:
    """One convex piece of a non-convex restriction: a support and extra inequalities."""

    support: tuple[int, ...]
    constraints: tuple[Constraint, ...] = field(default=())


def _region_count(n, k_sizes, n_on, n_off):
    return sum(math.comb(n, k) * n_on**k * n_off ** (n - k) for k in k_sizes)


def enumerate_nonconvex(rs: RestrictionSet, n: int, cap: int = ENUMERATION_CAP,
                        threshold: float | None = None) -> list[Subregion]:
    """Expand minimum-position sign patterns and cardinality supports.

    The cardinality limit counts positions with ``|w_j| > threshold``, so
    the feasible set is closed and its minimum attained.  Positions outside
    a counted support are bounded by ``|w_j| <= threshold``, or fixed at
    zero when no threshold is given.  Without a minimum position, supports of size exactly ``m``
    already contain every smaller support.  With one, positions are
    semicontinuous (zero or at least the minimum), every support size
    1..m is needed, and a minimum up to the threshold adds the small
    uncounted states ``w_min <= |w_j| <= threshold``.
    """
    full = tuple(range(n))
    if not _has_nonconvex(rs, n):
        return [Subregion(full)]
    if n > cap:
        raise CapExceeded(f"n={n} exceeds the enumeration cap {cap}; mixed-integer solving is out of scope")
    wmin = rs.min_position or 0.0
    m = rs.cardinality if rs.cardinality is not None else n
    thr = threshold or 0.0

    if m >= n:
        return [Subregion(full, tuple(Constraint(_unit(n, j, -s), -wmin) for j, s in enumerate(signs)))
                for signs in itertools.product((1.0, -1.0), repeat=n)]

    def bounds(j, lo, hi):
        return (Constraint(_unit(n, j, -1.0), -lo), Constraint(_unit(n, j), hi))

    # a state is None (pinned at zero) or the constraints on one coordinate
    if wmin == 0:
        on_states = [lambda j: ()]
        off_states = [(lambda j: bounds(j, -thr, thr)) if thr > 0 else None]
        sizes = [m]
    else:
        lb = max(wmin, thr)
        on_states = [lambda j: (Constraint(_unit(n, j, -1.0), -lb),),
                     lambda j: (Constraint(_unit(n, j), -lb),)]
        off_states = [None]
        if 0 < thr and wmin <= thr:
            off_states += [lambda j: bounds(j, wmin, thr), lambda j: bounds(j, -thr, -wmin)]
        sizes = range(0 if len(off_states) > 1 else 1, m + 1)
    if _region_count(n, sizes, len(on_states), len(off_states)) > 200_000:
        raise CapExceeded("too many convex pieces for exact enumeration")
    regions = []
    for k in sizes:
        for sup in itertools.combinations(full, k):
            rest = [j for j in full if j not in sup]
            for on in itertools.product(on_states, repeat=k):
                for off in itertools.product(off_states, repeat=n - k):
                    held = list(sup) + [j for j, st in zip(rest, off) if st is not None]
                    if not held:
                        continue
                    cons = [c for j, st in zip(sup, on) for c in st(j)]
                    cons += [c for j, st in zip(rest, off) if st is not None for c in st(j)]
                    regions.append(Subregion(tuple(sorted(held)), tuple(cons)))
    return regions


def satisfies(rs: RestrictionSet, w: np.ndarray, threshold: float, tol: float = 1e-8) -> bool:
    """Check the raw (non-convex) restrictions at ``w``; used by brute-force oracles."""
    w = np.asarray(w, dtype=float)
    n = w.shape[-1]
    ok = _satisfies_vec(rs, w.reshape(-1, n), threshold, tol)
    return bool(ok[0]) if w.ndim == 1 else ok


def _satisfies_vec(rs, W, threshold, tol):
    n = W.shape[1]
    ok = np.ones(W.shape[0], dtype=bool)
    for c in convex_constraints(rs, n):
        lhs = W @ c.coef
        ok &= np.abs(lhs - c.bound) <= tol if c.kind == "eq" else lhs <= c.bound + tol
    limited = rs.cardinality is not None and rs.cardinality < n
    if rs.min_position:
        held = np.abs(W) >= rs.min_position - tol
        if limited:
            # semicontinuous: a position is either closed or at least the minimum
            held |= W == 0
        ok &= np.all(held, axis=1)
    if limited:
        ok &= np.sum(np.abs(W) > threshold + tol, axis=1) <= rs.cardinality
    return ok


satisfies_many = _satisfies_vec
