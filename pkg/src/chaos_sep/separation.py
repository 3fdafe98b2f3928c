"""Hard targets and the L1 depth-width separation bound."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import CLOSURE_TOL, family_orbit, stefan_label
from .pl import HIT_TOL, PLFunction, _level_hits, abs_integral, compose, count_crossings
from .rates import rho as growth_rate


class ConstructionError(RuntimeError):
    pass


def slope_map(slope: float) -> PLFunction:
    """``slope*|x| - 1`` on [-1, 1]."""
    return PLFunction([-1.0, 0.0, 1.0], [slope - 1.0, -1.0, slope - 1.0])


def hard_family(p: int) -> PLFunction:
    """``rho_p*|x| - 1``; its Lipschitz constant equals its oscillation growth rate."""
    r = growth_rate(p).rho
    f = slope_map(r)
    if not f.is_self_map():
        raise ConstructionError(f"rho_{p}*|x| - 1 is not a self-map of [-1, 1]")
    z = family_orbit(r, p)
    if abs(z[p]) > CLOSURE_TOL:
        raise ConstructionError(f"orbit of 0 does not close at step {p}: residual {abs(z[p])!r}")
    return f


def tent_map() -> PLFunction:
    return PLFunction([-1.0, 0.0, 1.0], [1.0, -1.0, 1.0])


def default_levels(p: int) -> tuple[float, float]:
    """Endpoints of I_0 for the rank-labelled orbit of 0 under the family map."""
    r = growth_rate(p).rho
    cyc = stefan_label(family_orbit(r, p)[:p])
    lo, hi = sorted((cyc[1], cyc[2]))
    return lo, hi


def capacity(u: int, l: int) -> int:
    """Upper bound (2u)^l on the linear pieces of a width-u, depth-l ReLU net."""
    if u < 1 or l < 1:
        raise ValueError("width and depth must be >= 1")
    return (2 * u) ** l


@dataclass(frozen=True)
class SeparationConfig:
    rho: float
    L: float
    t: int
    u: int
    l: int
    x: float
    y: float
    domain: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        if not self.x < self.y:
            raise ValueError(f"need x < y, got x={self.x!r}, y={self.y!r}")
        if self.u < 1 or self.l < 1 or self.t < 1:
            raise ValueError("u, l and t must be >= 1")
        if self.rho <= 1:
            raise ValueError("growth rate must exceed 1")
        if self.L < self.rho - 1e-9:
            raise ValueError(f"Lipschitz constant {self.L} is below the growth rate {self.rho}")


@dataclass
class SeparationReport:
    config: SeparationConfig
    capacity: int
    condition_met: bool
    floor_headline: float
    floor_refined: float
    crossings_used: int
    crossings_measured: bool
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        d = asdict(self.config)
        d["domain"] = list(self.config.domain)
        return {
            **d,
            "capacity": self.capacity,
            "condition": self.condition_met,
            "floor_headline": self.floor_headline,
            "floor_refined": self.floor_refined,
            "crossings_used": self.crossings_used,
            "crossings_measured": self.crossings_measured,
            "warnings": list(self.warnings),
        }

    CSV_HEADER = ["rho", "L", "t", "u", "l", "x", "y", "capacity", "condition", "floor_headline", "floor_refined"]

    def csv_row(self) -> list[str]:
        c = self.config
        return [repr(c.rho), repr(c.L), str(c.t), str(c.u), str(c.l), repr(c.x), repr(c.y),
                str(self.capacity), str(self.condition_met).lower(),
                repr(self.floor_headline), repr(self.floor_refined)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        w.writerow(self.csv_row())
        return buf.getvalue()


def theory_bound(cfg: SeparationConfig, crossings: int | None = None) -> SeparationReport:
    cap = capacity(cfg.u, cfg.l)
    rho_t = cfg.rho ** cfg.t
    condition = cap <= rho_t / 8
    span2 = (cfg.y - cfg.x) ** 2
    notes = []
    matched = abs(cfg.L - cfg.rho) <= 1e-9
    if condition and matched:
        headline = span2 / 32
    else:
        headline = 0.0
        if not matched:
            msg = (f"L={cfg.L!r} exceeds rho={cfg.rho!r}: the factor (rho/L)^t = "
                   f"{(cfg.rho / cfg.L) ** cfg.t:.3g} shrinks with t, no t-independent L1 floor")
            notes.append(msg)
            warnings.warn(msg, stacklevel=2)
        if not condition:
            notes.append(f"capacity {cap} exceeds rho^t/8 = {rho_t / 8:.6g}")
    n = int(crossings) if crossings is not None else math.ceil(rho_t)
    refined = max(0.0, span2 / (16 * cfg.L ** cfg.t) * (n - 2 * cap))
    return SeparationReport(cfg, cap, condition, headline, refined, n, crossings is not None, notes)


def min_compositions(l: int, u: int, rho: float) -> int:
    """Smallest t with (2u)^l <= rho^t / 8."""
    if rho <= 1:
        raise ValueError("rho must exceed 1")
    return math.ceil(((l + 3) * math.log(2) + l * math.log(u)) / math.log(rho))


def sizing_readings(t: int, u: int, depths, rho: float) -> list[dict]:
    """Per depth: the required t from the sizing formula and whether the given t meets it."""
    out = []
    for l in depths:
        need = min_compositions(l, u, rho)
        out.append({"depth": l, "t_required": need, "t_given": t, "satisfied": t >= need,
                    "condition_met": capacity(u, l) <= rho**t / 8})
    return out


@dataclass
class IntervalCheck:
    lo: float
    hi: float
    level: str  # "x" or "y"
    integral: float
    ratio: float


@dataclass
class IntegralReport:
    bound: float
    intervals: list[IntervalCheck]

    @property
    def min_ratio(self) -> float:
        return min((iv.ratio for iv in self.intervals), default=float("nan"))

    def ok(self, rtol: float = 1e-9) -> bool:
        return bool(self.intervals) and all(iv.ratio >= 1 - rtol for iv in self.intervals)


def threshold_partition(h: PLFunction, level: float) -> list[tuple[float, float]]:
    """Maximal intervals on which 1[h >= level] is constant."""
    above = h.ys >= level
    flip = np.flatnonzero(above[:-1] != above[1:])
    x0, x1 = h.xs[flip], h.xs[flip + 1]
    y0, y1 = h.ys[flip], h.ys[flip + 1]
    cuts = x0 + (level - y0) / (y1 - y0) * (x1 - x0)
    edges = np.concatenate([[h.lo], cuts, [h.hi]])
    return [(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def jay_partition(h: PLFunction, x: float, y: float, tol: float = HIT_TOL) -> list[tuple[float, float, str]]:
    """Alternating sub-collection of threshold intervals whose image reaches x or y.

    Intervals whose image reaches neither level are dropped; of consecutive
    survivors reaching the same level only the first is kept, so the kept
    intervals alternate between x and y and are maximal in number.
    """
    mid = 0.5 * (x + y)
    out: list[tuple[float, float, str]] = []
    for lo, hi in threshold_partition(h, mid):
        seg = h.restrict(lo, hi)
        vmin, vmax = seg.ys.min(), seg.ys.max()
        # the image [vmin, vmax] has to contain the level, not just pass beyond it
        reach_x = vmin <= x + tol and vmax >= x - tol
        reach_y = vmax >= y - tol and vmin <= y + tol
        if reach_x and reach_y:
            # only possible through the shared endpoints; take the level hit first
            hx = _level_hits(seg, x, tol)
            hy = _level_hits(seg, y, tol)
            lab = "x" if hx.min() <= hy.min() else "y"
        elif reach_x:
            lab = "x"
        elif reach_y:
            lab = "y"
        else:
            continue
        if out and out[-1][2] == lab:
            continue
        out.append((lo, hi, lab))
    return out


def interval_integral_check(h: PLFunction, x: float, y: float, L_t: float) -> IntegralReport:
    """Integral of |h - (x+y)/2| over each interval of the alternating partition vs (y-x)^2 / (8 L_t)."""
    if not x < y:
        raise ValueError("need x < y")
    bound = (y - x) ** 2 / (8 * L_t)
    mid = 0.5 * (x + y)
    checks = []
    for lo, hi, lab in jay_partition(h, x, y):
        val = abs_integral(h, mid, lo, hi)
        checks.append(IntervalCheck(lo, hi, lab, val, val / bound))
    return IntegralReport(bound, checks)


@dataclass
class GrowthProbe:
    """Crossing counts of f^1..f^T over every pair of grid levels."""

    intervals: list[tuple[float, float]]
    counts: np.ndarray  # shape (n_intervals, T); column s holds f^(s+1)
    pieces: list[int]

    @property
    def t_max(self) -> int:
        return self.counts.shape[1]

    def step_ratio(self, window: int = 10) -> np.ndarray:
        """Per-interval geometric mean of C(f^t)/C(f^(t-1)) over the last ``window`` steps."""
        window = min(window, self.t_max - 1)
        hi = self.counts[:, -1].astype(float)
        lo = self.counts[:, -1 - window].astype(float)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(lo > 0, (hi / lo) ** (1.0 / window), np.where(hi > 0, np.inf, 1.0))
        return r

    def worst(self, window: int = 10) -> tuple[tuple[float, float], float]:
        r = self.step_ratio(window)
        i = int(np.argmax(r))
        return self.intervals[i], float(r[i])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "y", "crossings"])
        for (a, b), row in zip(self.intervals, self.counts):
            for t, c in enumerate(row.tolist(), start=1):
                w.writerow([t, repr(a), repr(b), c])
        return buf.getvalue()


def crossing_growth(f: PLFunction, t_max: int, grid: int = 13, piece_budget_: int | None = None) -> GrowthProbe:
    """Exact crossing counts of f^t, t <= t_max, over all level pairs of a grid on the range of f."""
    if t_max < 2:
        raise ValueError("need t_max >= 2")
    levels = np.linspace(float(f.ys.min()), float(f.ys.max()), grid)
    pairs = [(float(a), float(b)) for i, a in enumerate(levels) for b in levels[i + 1:]]
    counts = np.zeros((len(pairs), t_max), dtype=np.int64)
    pieces = []
    h = f
    for t in range(1, t_max + 1):
        if t > 1:
            h = compose(f, h, piece_budget_)
        pieces.append(h.pieces)
        counts[:, t - 1] = [count_crossings(h, a, b) for a, b in pairs]
    return GrowthProbe(pairs, counts, pieces)
