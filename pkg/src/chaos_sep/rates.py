"""Oscillation growth rates for odd periods.

``rho(p)`` is the root in (sqrt 2, 2) of ``l^p - 2 l^(p-2) - 1``; the
legacy rate is the root > 1 of ``z^(p-1) - z^(p-2) - 1``.  Both are
bracketed, bisected and polished with Newton steps that never leave the
bracket.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class GrowthRate:
    p: int
    rho: float
    polynomial_id: str  # "new" | "legacy"
    residual: float  # |poly(rho)| / sum |terms|; absolute values reach ~1e-10 at p=41

    def __float__(self) -> float:
        return self.rho


def _check_period(p: int) -> None:
    if not isinstance(p, int) or p < 3 or p % 2 == 0:
        raise ValueError(f"period must be odd and >= 3, got {p!r}")


def _coeffs_new(p: int) -> list[float]:
    c = [0.0] * (p + 1)  # highest degree first
    c[0] = 1.0
    c[2] = -2.0
    c[p] = -1.0
    return c


def _coeffs_legacy(p: int) -> list[float]:
    c = [0.0] * p
    c[0] = 1.0
    c[1] = -1.0
    c[p - 1] = -1.0
    return c


def horner(coeffs: Sequence[float], x: float) -> tuple[float, float]:
    """Value and derivative of the polynomial at x."""
    v = 0.0
    dv = 0.0
    for c in coeffs:
        dv = dv * x + v
        v = v * x + c
    return v, dv


def _scale(coeffs: Sequence[float], x: float) -> float:
    n = len(coeffs) - 1
    return sum(abs(c) * abs(x) ** (n - i) for i, c in enumerate(coeffs))


def bracketed_root(coeffs: Sequence[float], lo: float, hi: float, max_iter: int = 200) -> float:
    flo, _ = horner(coeffs, lo)
    fhi, _ = horner(coeffs, hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise ValueError(f"no sign change on [{lo}, {hi}]")
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx, dfx = horner(coeffs, x)
        if fx == 0.0:
            return x
        if (fx < 0) == (flo < 0):
            lo, flo = x, fx
        else:
            hi = x
        step_ok = dfx != 0.0
        if step_ok:
            nx = x - fx / dfx
            step_ok = lo < nx < hi
        if not step_ok:
            nx = 0.5 * (lo + hi)
        if abs(nx - x) <= 2 * math.ulp(x) or hi - lo <= 2 * math.ulp(x):
            x = nx
            break
        x = nx
    return x


def rho(p: int) -> GrowthRate:
    _check_period(p)
    c = _coeffs_new(p)
    # q(sqrt 2) = -1 < 0 and q(2) = 2^(p-1) - 1 > 0
    r = bracketed_root(c, math.sqrt(2.0), 2.0)
    return GrowthRate(p, r, "new", abs(horner(c, r)[0]) / _scale(c, r))


def rho_legacy(p: int) -> GrowthRate:
    _check_period(p)
    c = _coeffs_legacy(p)
    r = bracketed_root(c, 1.0, 2.0)
    return GrowthRate(p, r, "legacy", abs(horner(c, r)[0]) / _scale(c, r))


def pi_eval(p: int, lam: float) -> float:
    """Evaluate l^(p-1) - l^(p-2) - sum_{j<=p-3} (-l)^j.

    When lam != -1 the rational form (l^p - 2 l^(p-2) - 1)/(l + 1) is
    evaluated as well and must agree.
    """
    _check_period(p)
    total = lam ** (p - 1) - lam ** (p - 2) - sum((-lam) ** j for j in range(p - 2))
    if lam != -1.0:
        rational = (lam**p - 2 * lam ** (p - 2) - 1) / (lam + 1)
        scale = max(1.0, abs(total), abs(lam) ** p)
        if abs(rational - total) > 1e-9 * scale:
            raise ArithmeticError(f"sum and rational forms disagree at p={p}, lam={lam}: {total} vs {rational}")
    return total


def rate_table(p_max: int) -> list[tuple[int, float, float, float]]:
    """Rows ``(p, rho_new, rho_legacy, gap)`` for odd p in [3, p_max]."""
    rows = []
    for p in range(3, p_max + 1, 2):
        a = rho(p).rho
        b = rho_legacy(p).rho
        rows.append((p, a, b, a - b))
    return rows


def rate_table_csv(p_max: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "rho_new", "rho_legacy", "gap"])
    for p, a, b, gap in rate_table(p_max):
        w.writerow([p, repr(a), repr(b), repr(gap)])
    return buf.getvalue()
