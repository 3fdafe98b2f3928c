"""Exact calculus of continuous piecewise-linear maps on a closed interval.

A :class:`PLFunction` is a sorted list of knots ``(x_k, y_k)`` joined by
straight segments.  Every operation here works on the knots directly, so
composition, crossing counts and L1 distances are exact up to double
rounding.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SELF_MAP_EPS = 1e-9
DEFAULT_PIECE_BUDGET = 5_000_000
BUDGET_ENV = "CHAOS_SEP_PIECE_BUDGET"

# level-set hits are accepted this close to the level
HIT_TOL = 1e-9
FIXED_POINT_TOL = 1e-9
DEDUP_TOL = 1e-7


class PLError(ValueError):
    pass


class DomainError(PLError):
    pass


class CompositionError(PLError):
    pass


class BudgetError(RuntimeError):
    """Raised when an exact composition would exceed the knot budget."""

    def __init__(self, message: str, t: int | None = None, knots: int | None = None):
        super().__init__(message)
        self.t = t
        self.knots = knots


def piece_budget(budget: int | None = None) -> int:
    if budget is not None:
        return int(budget)
    env = os.environ.get(BUDGET_ENV)
    if env:
        return int(float(env))
    return DEFAULT_PIECE_BUDGET


@dataclass(frozen=True, eq=False)
class PLFunction:
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float)
        ys = np.array(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape:
            raise PLError("knots must be two 1-D arrays of equal length")
        if len(xs) < 2:
            raise PLError("a PL function needs at least 2 knots")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise PLError("knots must be finite")
        if np.any(np.diff(xs) <= 0):
            raise PLError("knot abscissae must be strictly increasing")
        xs.flags.writeable = False
        ys.flags.writeable = False
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @classmethod
    def from_knots(cls, knots: Iterable[Sequence[float]]) -> "PLFunction":
        pts = np.asarray(list(knots), dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise PLError("knots must be (x, y) pairs")
        return cls(pts[:, 0], pts[:, 1])

    @classmethod
    def identity(cls, lo: float = -1.0, hi: float = 1.0) -> "PLFunction":
        return cls([lo, hi], [lo, hi])

    @classmethod
    def constant(cls, value: float, lo: float = -1.0, hi: float = 1.0) -> "PLFunction":
        return cls([lo, hi], [value, value])

    @property
    def lo(self) -> float:
        return float(self.xs[0])

    @property
    def hi(self) -> float:
        return float(self.xs[-1])

    @property
    def domain(self) -> tuple[float, float]:
        return self.lo, self.hi

    @property
    def pieces(self) -> int:
        return len(self.xs) - 1

    @property
    def knots(self) -> list[tuple[float, float]]:
        return list(zip(self.xs.tolist(), self.ys.tolist()))

    def __call__(self, x):
        return np.interp(x, self.xs, self.ys)

    def __len__(self) -> int:
        return len(self.xs)

    def __repr__(self) -> str:
        return f"PLFunction(domain=[{self.lo!r}, {self.hi!r}], knots={len(self.xs)})"

    def same_knots(self, other: "PLFunction") -> bool:
        return np.array_equal(self.xs, other.xs) and np.array_equal(self.ys, other.ys)

    def is_self_map(self, eps: float = SELF_MAP_EPS) -> bool:
        return self.ys.min() >= self.lo - eps and self.ys.max() <= self.hi + eps

    def slopes(self) -> np.ndarray:
        return np.diff(self.ys) / np.diff(self.xs)

    def restrict(self, lo: float, hi: float) -> "PLFunction":
        """The same function on the sub-interval ``[lo, hi]``."""
        if not (self.lo <= lo < hi <= self.hi):
            raise DomainError(f"[{lo}, {hi}] is not a sub-interval of {self.domain}")
        inner = (self.xs > lo) & (self.xs < hi)
        xs = np.concatenate([[lo], self.xs[inner], [hi]])
        return PLFunction(xs, self(xs))

    # --- serialization -------------------------------------------------

    def to_json(self) -> dict:
        return {"domain": [self.lo, self.hi], "knots": [[x, y] for x, y in self.knots]}

    @classmethod
    def from_json(cls, obj: dict) -> "PLFunction":
        try:
            f = cls.from_knots(obj["knots"])
            lo, hi = obj.get("domain", f.domain)
        except (KeyError, TypeError) as exc:
            raise PLError(f"malformed PL function object: {exc}") from None
        if float(lo) != f.lo or float(hi) != f.hi:
            raise PLError("domain does not match first/last knot")
        return f

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in self.knots:
            w.writerow([repr(x), repr(y)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PLFunction":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["x", "y"]:
            raise PLError("CSV must start with header 'x,y'")
        try:
            return cls.from_knots([(float(a), float(b)) for a, b in rows[1:] if a or b])
        except ValueError as exc:
            raise PLError(f"bad CSV row: {exc}") from None

    def save(self, path: str | Path) -> None:
        path = Path(path)
        if path.suffix == ".csv":
            path.write_text(self.to_csv())
        else:
            path.write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> "PLFunction":
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".csv":
            return cls.from_csv(text)
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise PLError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_json(obj)


def evaluate(f: PLFunction, x: float) -> float:
    if not (f.lo <= x <= f.hi):
        raise DomainError(f"x={x!r} outside domain {f.domain}")
    return float(np.interp(x, f.xs, f.ys))


def _clamp_into(values: np.ndarray, lo: float, hi: float, eps: float = SELF_MAP_EPS) -> np.ndarray:
    vmin, vmax = values.min(), values.max()
    if vmin < lo - eps or vmax > hi + eps:
        raise CompositionError(
            f"values [{vmin!r}, {vmax!r}] escape [{lo!r}, {hi!r}] by more than {eps}"
        )
    if vmin < lo or vmax > hi:
        values = np.clip(values, lo, hi)
    return values


def compose(outer: PLFunction, inner: PLFunction, piece_budget_: int | None = None) -> PLFunction:
    """Exact ``outer o inner``.

    New knots are the preimages under each inner segment of the outer
    breakpoints that the segment's image strictly straddles.
    """
    budget = piece_budget(piece_budget_)
    ys = _clamp_into(inner.ys, outer.lo, outer.hi)
    bx = outer.xs[1:-1]
    by = outer.ys[1:-1]
    y0, y1 = ys[:-1], ys[1:]
    seg_lo = np.minimum(y0, y1)
    seg_hi = np.maximum(y0, y1)
    start = np.searchsorted(bx, seg_lo, side="right")
    stop = np.searchsorted(bx, seg_hi, side="left")
    counts = np.maximum(stop - start, 0)
    n_new = int(counts.sum())
    total = n_new + len(inner.xs)
    if total > budget:
        raise BudgetError(f"composition needs {total} knots, budget is {budget}", knots=total)

    seg = np.repeat(np.arange(len(counts)), counts)
    offsets = np.arange(n_new) - np.repeat(np.cumsum(counts) - counts, counts)
    k = start[seg] + offsets
    x0 = inner.xs[seg]
    x1 = inner.xs[seg + 1]
    t = (bx[k] - y0[seg]) / (y1[seg] - y0[seg])
    xn = np.clip(x0 + t * (x1 - x0), x0, x1)

    xs = np.concatenate([inner.xs, xn])
    vals = np.concatenate([np.interp(ys, outer.xs, outer.ys), by[k]])
    order = np.argsort(xs, kind="stable")
    xs, vals = xs[order], vals[order]
    keep = np.concatenate([[True], np.diff(xs) > 0])
    return PLFunction(xs[keep], vals[keep])


def self_compose(f: PLFunction, t: int, piece_budget_: int | None = None) -> PLFunction:
    if t < 1:
        raise ValueError("t must be >= 1")
    if not f.is_self_map():
        raise CompositionError("self-composition needs a self-map")
    h = f
    for step in range(2, t + 1):
        try:
            h = compose(f, h, piece_budget_)
        except BudgetError as exc:
            raise BudgetError(f"f^{step}: {exc}", t=step, knots=exc.knots) from None
    return h


def iterate_eval(f: PLFunction, t: int, x):
    """Apply ``f`` pointwise ``t`` times.  Works on scalars and arrays."""
    if t < 0:
        raise ValueError("t must be >= 0")
    z = np.asarray(x, dtype=float)
    if np.any(z < f.lo) or np.any(z > f.hi):
        raise DomainError(f"start point outside domain {f.domain}")
    for _ in range(t):
        z = np.interp(z, f.xs, f.ys)
        try:
            z = _clamp_into(np.atleast_1d(z), f.lo, f.hi).reshape(z.shape)
        except CompositionError as exc:
            raise DomainError(f"iterate escaped the domain: {exc}") from None
    return float(z) if z.ndim == 0 else z


class IteratedMap:
    """``f^t`` evaluated lazily; materialized exactly only when it fits the budget."""

    def __init__(self, f: PLFunction, t: int):
        self.f = f
        self.t = t
        self.lo, self.hi = f.domain

    def __call__(self, x):
        return iterate_eval(self.f, self.t, x)

    def exact(self, piece_budget_: int | None = None) -> PLFunction | None:
        try:
            return self_compose(self.f, self.t, piece_budget_)
        except BudgetError:
            return None


def lipschitz(f: PLFunction) -> float:
    return float(np.max(np.abs(f.slopes())))


def _level_hits(f: PLFunction, level: float, tol: float = HIT_TOL) -> np.ndarray:
    y0, y1 = f.ys[:-1], f.ys[1:]
    x0, x1 = f.xs[:-1], f.xs[1:]
    touch = (np.minimum(y0, y1) <= level + tol) & (np.maximum(y0, y1) >= level - tol)
    dy = y1 - y0
    flat = touch & (np.abs(dy) <= tol)
    slant = touch & ~flat
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.clip((level - y0[slant]) / dy[slant], 0.0, 1.0)
    hits = np.concatenate([x0[slant] + s * (x1[slant] - x0[slant]), 0.5 * (x0[flat] + x1[flat])])
    return np.sort(hits)


def alternating_runs(f: PLFunction, x: float, y: float, tol: float = HIT_TOL) -> list[tuple[float, int]]:
    """Hits of levels x (label 0) and y (label 1), collapsed to an alternating sequence.

    Each entry is the first hit of a run of equal labels in sweep order.
    """
    hx = _level_hits(f, x, tol)
    hy = _level_hits(f, y, tol)
    pos = np.concatenate([hx, hy])
    lab = np.concatenate([np.zeros(len(hx), dtype=int), np.ones(len(hy), dtype=int)])
    order = np.lexsort((lab, pos))
    pos, lab = pos[order], lab[order]
    if len(lab) == 0:
        return []
    first = np.concatenate([[True], lab[1:] != lab[:-1]])
    return list(zip(pos[first].tolist(), lab[first].tolist()))


def count_crossings(f: PLFunction, x: float, y: float) -> int:
    """Number of alternating sweeps of ``f`` between levels ``x < y``."""
    if not x < y:
        raise ValueError(f"need x < y, got x={x!r}, y={y!r}")
    return max(len(alternating_runs(f, x, y)) - 1, 0)


def _abs_area(xs: np.ndarray, d: np.ndarray) -> float:
    """Exact integral of |d| for d linear between the knots xs."""
    d0, d1 = d[:-1], d[1:]
    dx = np.diff(xs)
    same = d0 * d1 >= 0
    area = np.where(same, 0.5 * np.abs(d0 + d1) * dx, 0.0)
    cross = ~same
    a0, a1 = np.abs(d0[cross]), np.abs(d1[cross])
    area[cross] = 0.5 * dx[cross] * (a0 * a0 + a1 * a1) / (a0 + a1)
    return float(area.sum())


def l1_distance(f: PLFunction, g: PLFunction) -> float:
    if f.domain != g.domain:
        raise DomainError(f"domain mismatch: {f.domain} vs {g.domain}")
    xs = np.union1d(f.xs, g.xs)
    return _abs_area(xs, f(xs) - g(xs))


def abs_integral(f: PLFunction, level: float, lo: float | None = None, hi: float | None = None) -> float:
    """Exact integral of ``|f - level|`` over ``[lo, hi]`` (whole domain by default)."""
    h = f if lo is None and hi is None else f.restrict(f.lo if lo is None else lo, f.hi if hi is None else hi)
    return _abs_area(h.xs, h.ys - level)


def classification_distance(f: PLFunction, g: PLFunction, threshold: float, points: Sequence[float]) -> float:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise ValueError("no points given")
    if np.any(pts < f.lo) or np.any(pts > f.hi):
        raise DomainError("classification points outside domain")
    return float(np.mean((f(pts) >= threshold) != (g(pts) >= threshold)))


def identity_segments(f: PLFunction, tol: float = FIXED_POINT_TOL) -> list[tuple[float, float]]:
    """Maximal runs of segments on which f(x) = x."""
    d = f.ys - f.xs
    on = np.abs(d) <= tol
    unit = np.abs(f.slopes() - 1.0) <= 1e-6
    seg = on[:-1] & on[1:] & unit
    out: list[tuple[float, float]] = []
    i = 0
    n = len(seg)
    while i < n:
        if seg[i]:
            j = i
            while j + 1 < n and seg[j + 1]:
                j += 1
            out.append((float(f.xs[i]), float(f.xs[j + 1])))
            i = j + 1
        else:
            i += 1
    return out


def fixed_points(f: PLFunction, tol: float = FIXED_POINT_TOL) -> list[float]:
    """All solutions of f(x) = x, deduplicated within 1e-7.

    Transversal roots are solved per segment.  Knots within ``tol`` of the
    diagonal are reported too, which catches tangential touches such as a
    periodic kink.  Identity segments contribute their two endpoints; see
    :func:`identity_segments` for the flag.
    """
    d = f.ys - f.xs
    d0, d1 = d[:-1], d[1:]
    cross = d0 * d1 < 0
    x0, x1 = f.xs[:-1][cross], f.xs[1:][cross]
    roots = x0 + d0[cross] / (d0[cross] - d1[cross]) * (x1 - x0)
    touches = f.xs[np.abs(d) <= tol]
    seg_ends = [x for seg in identity_segments(f, tol) for x in seg]
    cand = np.sort(np.concatenate([roots, touches, seg_ends]))
    if cand.size == 0:
        return []
    resid = np.abs(f(cand) - cand)
    out: list[float] = []
    best = cand[0]
    best_r = resid[0]
    anchor = cand[0]
    for x, r in zip(cand[1:], resid[1:]):
        if x - anchor <= DEDUP_TOL:
            if r < best_r:
                best, best_r = x, r
        else:
            out.append(float(best))
            best, best_r, anchor = x, r, x
    out.append(float(best))
    return out
