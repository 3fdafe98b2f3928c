"""Periodic orbits of PL interval maps and Sharkovsky's ordering."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .pl import BudgetError, PLFunction, compose, fixed_points, identity_segments, iterate_eval

log = logging.getLogger(__name__)

MIN_PERIOD_TOL = 1e-6
DISTINCT_TOL = 1e-6
CLOSURE_TOL = 1e-7


# --- Sharkovsky ordering ----------------------------------------------------


@dataclass(frozen=True)
class SharkovskyKey:
    odd_part: int
    two_power: int
    search_limit: int | None = None  # set when the key is only known up to a scan budget

    @classmethod
    def of(cls, n: int, search_limit: int | None = None) -> "SharkovskyKey":
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ValueError(f"Sharkovsky ordering is defined on positive integers, got {n!r}")
        n = int(n)
        k = 0
        while n % 2 == 0:
            n //= 2
            k += 1
        return cls(n, k, search_limit)

    @property
    def n(self) -> int:
        return self.odd_part << self.two_power

    def rank(self) -> tuple[int, int, int]:
        # ascending rank == descending in the ordering (3 first, 1 last)
        if self.odd_part > 1:
            return (0, self.two_power, self.odd_part)
        return (1, -self.two_power, 0)


def sharkovsky_rank(n: int) -> tuple[int, int, int]:
    return SharkovskyKey.of(n).rank()


def sharkovsky_compare(a: int, b: int) -> int:
    """1 if a precedes b in Sharkovsky's ordering (a |> b), -1 if b |> a, 0 if equal."""
    ra, rb = sharkovsky_rank(a), sharkovsky_rank(b)
    if ra == rb:
        return 0
    return 1 if ra < rb else -1


def sharkovsky_implied(n: int, limit: int) -> list[int]:
    """Periods up to ``limit`` forced by a point of period ``n`` (n included when <= limit)."""
    rn = sharkovsky_rank(n)
    if limit < 1:
        raise ValueError("limit must be >= 1")
    return [m for m in range(1, limit + 1) if sharkovsky_rank(m) >= rn]


# --- orbits --------------------------------------------------------------------


@dataclass(frozen=True)
class Orbit:
    points: tuple[float, ...]
    closure_residual: float

    @property
    def period(self) -> int:
        return len(self.points)

    @classmethod
    def from_points(cls, f: PLFunction, points: Sequence[float]) -> "Orbit":
        pts = tuple(float(p) for p in points)
        return cls(pts, abs(float(f(pts[-1])) - pts[0]))

    def min_gap(self) -> float:
        if self.period < 2:
            return float("inf")
        s = np.sort(self.points)
        return float(np.min(np.diff(s)))

    def is_valid(self) -> bool:
        return self.closure_residual <= CLOSURE_TOL and self.min_gap() >= DISTINCT_TOL

    def to_json(self) -> dict:
        return {"period": self.period, "points": list(self.points), "residual": self.closure_residual}

    @classmethod
    def from_json(cls, obj: dict) -> "Orbit":
        pts = tuple(float(v) for v in obj["points"])
        if int(obj["period"]) != len(pts):
            raise ValueError("period does not match number of points")
        return cls(pts, float(obj["residual"]))


def _proper_divisors(n: int) -> list[int]:
    return [k for k in range(1, n) if n % k == 0]


def has_minimal_period(f: PLFunction, x0: float, n: int, tol: float = MIN_PERIOD_TOL) -> bool:
    """True unless x0 returns to itself (within tol) after a proper divisor of n."""
    return all(abs(iterate_eval(f, k, x0) - x0) > tol for k in _proper_divisors(n))


@dataclass
class PeriodScan:
    max_period: int
    orbits: dict[int, list[Orbit]] = field(default_factory=dict)
    # intervals of f^n equal to the identity that contain genuine period-n points
    continua: dict[int, list[tuple[float, float]]] = field(default_factory=dict)
    rejected: int = 0

    def periods(self) -> list[int]:
        return sorted({n for n, o in self.orbits.items() if o} | {n for n, c in self.continua.items() if c})

    def has_period(self, n: int) -> bool:
        return n in self.periods()

    def sharkovsky_consistent(self) -> bool:
        found = set(self.periods())
        return all(set(sharkovsky_implied(n, self.max_period)) <= found for n in found)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["period", "orbit_index", "point_index", "value"])
        for n in sorted(self.orbits):
            for i, orb in enumerate(self.orbits[n]):
                for j, v in enumerate(orb.points):
                    w.writerow([n, i, j, repr(v)])
        return buf.getvalue()


def _group_orbits(f: PLFunction, cands: list[float], n: int) -> tuple[list[Orbit], int]:
    arr = np.asarray(cands)
    used = np.zeros(len(arr), dtype=bool)
    orbits: list[Orbit] = []
    bad = 0
    for i in range(len(arr)):
        if used[i]:
            continue
        used[i] = True
        pts = [float(arr[i])]
        z = pts[0]
        for _ in range(n - 1):
            z = float(f(z))
            j = int(np.argmin(np.abs(arr - z)))
            if abs(arr[j] - z) <= MIN_PERIOD_TOL:
                used[j] = True
                z = float(arr[j])
            pts.append(z)
        orb = Orbit.from_points(f, pts)
        if orb.is_valid():
            orbits.append(orb)
        else:
            bad += 1
            log.debug("discarding period-%d candidate %r (residual %.3g)", n, pts, orb.closure_residual)
    return orbits, bad


def detect_periods(f: PLFunction, max_period: int, piece_budget: int | None = None) -> PeriodScan:
    """Enumerate periodic orbits of f with period <= max_period."""
    if max_period < 1:
        raise ValueError("max_period must be >= 1")
    scan = PeriodScan(max_period)
    h = f
    for n in range(1, max_period + 1):
        if n > 1:
            try:
                h = compose(f, h, piece_budget)
            except BudgetError as exc:
                raise BudgetError(f"f^{n}: {exc}", t=n, knots=exc.knots) from None
        cands = [x for x in fixed_points(h) if has_minimal_period(f, x, n)]
        orbits, bad = _group_orbits(f, cands, n)
        scan.orbits[n] = orbits
        scan.rejected += bad
        cont = []
        for lo, hi in identity_segments(h):
            samples = lo + (hi - lo) * np.array([1 / 3, 1 / 2, 2 / 3, 1 / 7])
            if any(has_minimal_period(f, float(s), n) for s in samples):
                cont.append((lo, hi))
        if cont:
            scan.continua[n] = cont
    return scan


def prime_period_up_to(f: PLFunction, max_period: int, scan: PeriodScan | None = None) -> SharkovskyKey:
    """Sharkovsky-greatest period found by a scan up to ``max_period``.

    The true prime period may lie beyond the scan; the returned key carries
    ``search_limit`` to say so.
    """
    scan = scan or detect_periods(f, max_period)
    periods = scan.periods()
    if not periods:
        raise RuntimeError("no periodic points found (a continuous self-map always has a fixed point)")
    best = min(periods, key=sharkovsky_rank)
    return SharkovskyKey.of(best, search_limit=max_period)


# --- spatial labelling of odd cycles ---------------------------------------------


@dataclass(frozen=True)
class StefanCycle:
    """Points x_1..x_p of an odd cycle, labelled by spatial rank.

    ``x[i - 1]`` holds x_i.  With ``mirrored`` false the chain
    x_p < x_{p-2} < ... < x_1 < x_2 < ... < x_{p-1} holds; the mirrored
    labelling uses the reflected chain.
    """

    x: tuple[float, ...]
    mirrored: bool = False

    @property
    def p(self) -> int:
        return len(self.x)

    def __getitem__(self, i: int) -> float:
        return self.x[i - 1]


def stefan_label(points: Orbit | Sequence[float], mirrored: bool = False) -> StefanCycle:
    pts = list(points.points if isinstance(points, Orbit) else points)
    p = len(pts)
    if p < 3 or p % 2 == 0:
        raise ValueError(f"spatial labelling needs an odd period > 1, got {p}")
    s = sorted(pts, reverse=mirrored)
    x = [0.0] * p
    half = (p + 1) // 2
    # odd labels p, p-2, ..., 1 take the first half of the ranks
    for r, lab in enumerate(range(p, 0, -2)):
        x[lab - 1] = s[r]
    for r, lab in enumerate(range(2, p, 2)):
        x[lab - 1] = s[half + r]
    return StefanCycle(tuple(x), mirrored)


# --- the explicit family rho*|x| - 1 -------------------------------------------


def family_orbit(rho: float, p: int) -> list[float]:
    """z_0 = 0, z_{t+1} = rho*|z_t| - 1, returned for t = 0..p (p + 1 values)."""
    z = [0.0]
    for _ in range(p):
        z.append(rho * abs(z[-1]) - 1.0)
    return z


@dataclass(frozen=True)
class SignPatternResult:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def orbit_sign_pattern_check(points: Sequence[float], rho: float, tol: float = 1e-9) -> SignPatternResult:
    """Check the sign and ordering pattern of the orbit of 0 under rho*|x| - 1.

    ``points`` are z_0..z_{p-1}; z_p is recomputed from rho.
    """
    z = [float(v) for v in points]
    p = len(z)
    if p < 3 or p % 2 == 0:
        return SignPatternResult(False, f"period {p} is not odd and > 1")
    if abs(z[0]) > tol:
        return SignPatternResult(False, "z_0 != 0")
    z.append(rho * abs(z[-1]) - 1.0)
    if abs(z[1] + 1.0) > tol:
        return SignPatternResult(False, f"z_1 = {z[1]!r}, expected -1")
    if not (abs(z[2] - (rho - 1.0)) <= tol and z[2] > 0):
        return SignPatternResult(False, f"z_2 = {z[2]!r}, expected rho - 1 > 0")
    for t in range(3, p):
        if z[t] > tol:
            return SignPatternResult(False, f"z_{t} = {z[t]!r} > 0")
    if abs(z[p]) > CLOSURE_TOL:
        return SignPatternResult(False, f"orbit does not close: z_{p} = {z[p]!r}")
    odd = [z[t] for t in range(3, p, 2)] + [0.0]
    if any(a >= b for a, b in zip(odd, odd[1:])):
        return SignPatternResult(False, "z_3 < z_5 < ... < z_p = 0 violated")
    even = [z[t] for t in range(2, p, 2)] + [-1.0]
    if any(a <= b for a, b in zip(even, even[1:])):
        return SignPatternResult(False, "z_2 > z_4 > ... > z_{p-1} > -1 violated")
    return SignPatternResult(True)


def pairwise_min_gap(points: Sequence[float]) -> float:
    return min((abs(a - b) for a, b in combinations(points, 2)), default=float("inf"))
