"""Covering graphs over the intervals spanned by an odd cycle.

Nodes are ordered I_0, ..., I_{(p-3)/2}, J_1, ..., J_{(p-1)/2}.  The
adjacency convention is ``A[j, i] = 1`` when node i covers node j, so the
oscillation counts propagate as ``delta_{t+1} = A @ delta_t``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Orbit, StefanCycle, detect_periods, stefan_label
from .pl import PLFunction

COVER_TOL = 1e-9


class ConvergenceError(ArithmeticError):
    pass


def node_labels(p: int) -> list[str]:
    _check_p(p)
    h = (p - 1) // 2
    return [f"I{j}" for j in range(h)] + [f"J{j}" for j in range(1, h + 1)]


def _check_p(p: int) -> None:
    if p < 3 or p % 2 == 0:
        raise ValueError(f"covering graphs need an odd period >= 3, got {p}")


@dataclass
class CoveringGraph:
    p: int
    adjacency: np.ndarray
    intervals: list[tuple[float, float]] | None = None
    cycle: StefanCycle | None = None
    labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.labels:
            self.labels = node_labels(self.p)
        self.adjacency = np.asarray(self.adjacency, dtype=np.int64)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def edges(self) -> set[tuple[str, str]]:
        src_dst = np.argwhere(self.adjacency.T)
        return {(self.labels[i], self.labels[j]) for i, j in src_dst}

    def to_json(self) -> dict:
        ivs = self.intervals or [(None, None)] * len(self.labels)
        return {
            "p": self.p,
            "intervals": [{"label": lab, "lo": lo, "hi": hi} for lab, (lo, hi) in zip(self.labels, ivs)],
            "adjacency": self.adjacency.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CoveringGraph":
        ivs = [(iv["lo"], iv["hi"]) for iv in obj["intervals"]]
        if any(lo is None for lo, _ in ivs):
            ivs = None
        return cls(int(obj["p"]), np.array(obj["adjacency"]), ivs, labels=[iv["label"] for iv in obj["intervals"]])


def forced_edges(p: int) -> set[tuple[str, str]]:
    """Covering relations forced by the spatial ordering of an odd cycle."""
    _check_p(p)
    h = (p - 1) // 2
    e = {("I0", "I0"), ("I0", "J1")}
    for j in range(1, h):
        e.add((f"I{j}", f"J{j + 1}"))
        e.add((f"J{j}", f"I{j}"))
    for j in range(h):
        e.add((f"J{h}", f"I{j}"))
    return e


def build_theoretical_graph(p: int) -> CoveringGraph:
    labels = node_labels(p)
    A = np.zeros((p - 1, p - 1), dtype=np.int64)
    for src, dst in forced_edges(p):
        A[labels.index(dst), labels.index(src)] = 1
    return CoveringGraph(p, A, labels=labels)


def cycle_intervals(cycle: StefanCycle) -> list[tuple[float, float]]:
    p = cycle.p
    h = (p - 1) // 2

    def hull(a: float, b: float) -> tuple[float, float]:
        return (min(a, b), max(a, b))

    ivs = [hull(cycle[1], cycle[2])]
    ivs += [hull(cycle[2 * j], cycle[2 * j + 2]) for j in range(1, h)]
    ivs += [hull(cycle[2 * j + 1], cycle[2 * j - 1]) for j in range(1, h + 1)]
    return ivs


def image(f: PLFunction, lo: float, hi: float) -> tuple[float, float]:
    inside = (f.xs > lo) & (f.xs < hi)
    vals = np.concatenate([f.ys[inside], f([lo, hi])])
    return float(vals.min()), float(vals.max())


def build_empirical_graph(f: PLFunction, cycle: StefanCycle) -> CoveringGraph:
    ivs = cycle_intervals(cycle)
    if any(hi - lo <= 0 for lo, hi in ivs):
        raise ValueError("cycle produces a degenerate interval")
    n = len(ivs)
    A = np.zeros((n, n), dtype=np.int64)
    for i, (lo, hi) in enumerate(ivs):
        ilo, ihi = image(f, lo, hi)
        for j, (vlo, vhi) in enumerate(ivs):
            if vlo >= ilo - COVER_TOL and vhi <= ihi + COVER_TOL:
                A[j, i] = 1
    return CoveringGraph(cycle.p, A, ivs, cycle)


def spectral_radius(A, tol: float = 1e-13, max_iter: int = 100_000) -> float:
    """Dominant eigenvalue of a nonnegative matrix by power iteration.

    Periodic (imprimitive) matrices make the plain iteration oscillate; in
    that case the iteration is rerun on ``A + I`` and 1 is subtracted.  A
    defective dominant eigenvalue (a Jordan block) defeats both, since the
    iterate then converges like 1/k; the last resort is Gelfand's formula
    ``||A^n||^(1/n)`` evaluated at n = 2^52 by repeated squaring.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("spectral_radius needs a square matrix")
    if np.any(A < 0):
        raise ValueError("spectral_radius needs a nonnegative matrix")
    try:
        return _power(A, tol, max_iter)
    except ConvergenceError:
        pass
    try:
        return _power(A + np.eye(len(A)), tol, max_iter) - 1.0
    except ConvergenceError:
        return _gelfand(A)


def _gelfand(A: np.ndarray, rounds: int = 52) -> float:
    B = A.copy()
    log_c = 0.0  # B = A^(2^k) / exp(log_c)
    for _ in range(rounds):
        s = np.abs(B).sum(axis=0).max()
        if s == 0.0:
            return 0.0
        B /= s
        log_c = 2.0 * (log_c + np.log(s))
        B = B @ B
    s = np.abs(B).sum(axis=0).max()
    if s == 0.0:
        return 0.0
    return float(np.exp((np.log(s) + log_c) / 2.0**rounds))


def _power(A: np.ndarray, tol: float, max_iter: int) -> float:
    v = np.full(len(A), 1.0 / len(A))
    prev = None
    for _ in range(max_iter):
        w = A @ v
        s = w.sum()
        if s == 0.0:
            return 0.0
        lam = s / v.sum()
        w /= s
        # equal quotients alone can be a coincidence of the start vector
        settled = np.abs(w - v).sum() <= 1e-10
        v = w
        if prev is not None and settled and abs(lam - prev) <= tol * max(1.0, lam):
            return float(lam)
        prev = lam
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps; retry with A + I")


@dataclass
class OscillationTrace:
    labels: list[str]
    delta: list[tuple[int, ...]]

    def at(self, t: int, label: str) -> int:
        return self.delta[t][self.labels.index(label)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "label", "delta"])
        for t, d in enumerate(self.delta):
            for lab, v in zip(self.labels, d):
                w.writerow([t, lab, v])
        return buf.getvalue()


def oscillation_lower_bound(G: CoveringGraph, t: int) -> OscillationTrace:
    """delta^0 = ones, delta^{s+1} = A delta^s, in exact integers."""
    if t < 0:
        raise ValueError("t must be >= 0")
    A = [[int(v) for v in row] for row in G.adjacency]
    d = tuple(1 for _ in A)
    out = [d]
    for _ in range(t):
        d = tuple(sum(a * x for a, x in zip(row, d)) for row in A)
        out.append(d)
    return OscillationTrace(list(G.labels), out)


@dataclass
class CoveringReport:
    p: int
    missing: dict[str, list[tuple[str, str]]]
    spectral_radius: dict[str, float]

    @property
    def satisfied(self) -> dict[str, bool]:
        return {k: not v for k, v in self.missing.items()}

    @property
    def orientation(self) -> str | None:
        """The first fully satisfied orientation, if any."""
        for k in ("direct", "mirrored"):
            if not self.missing[k]:
                return k
        return None

    def score(self) -> int:
        return min(len(v) for v in self.missing.values())


def verify_covering(f: PLFunction, G: CoveringGraph) -> CoveringReport:
    """Check the forced edge pattern against the empirical graph, both orientations.

    The mirrored orientation relabels the same cycle by descending spatial
    rank, which swaps the roles of the I and J intervals.
    """
    if G.cycle is None:
        raise ValueError("graph carries no cycle; build it with build_empirical_graph")
    required = forced_edges(G.p)
    direct = G if not G.cycle.mirrored else build_empirical_graph(f, stefan_label(G.cycle.x, False))
    mirror = build_empirical_graph(f, stefan_label(G.cycle.x, True)) if not G.cycle.mirrored else G
    missing = {}
    radius = {}
    for name, g in (("direct", direct), ("mirrored", mirror)):
        missing[name] = sorted(required - g.edges())
        radius[name] = spectral_radius(g.adjacency)
    return CoveringReport(G.p, missing, radius)


def best_cycle(f: PLFunction, p: int) -> tuple[CoveringGraph, CoveringReport]:
    """Scan every period-p orbit of f and keep the one whose graph best matches the pattern."""
    scan = detect_periods(f, p)
    best = None
    for orb in scan.orbits.get(p, []):
        for mirrored in (False, True):
            G = build_empirical_graph(f, stefan_label(orb, mirrored))
            rep = verify_covering(f, G)
            key = (len(rep.missing["mirrored" if mirrored else "direct"]), -max(rep.spectral_radius.values()))
            if best is None or key < best[0]:
                best = (key, G, rep)
    if best is None:
        raise ValueError(f"no period-{p} orbit found")
    return best[1], best[2]


def oriented_graph(f: PLFunction, orbit: Orbit) -> CoveringGraph:
    """Empirical graph in whichever orientation satisfies the pattern (direct preferred)."""
    G = build_empirical_graph(f, stefan_label(orbit))
    rep = verify_covering(f, G)
    if rep.orientation == "mirrored":
        return build_empirical_graph(f, stefan_label(orbit, True))
    return G
