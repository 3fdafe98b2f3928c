"""The ten acceptance criteria, each at its stated tolerance and time limit.

Every test prints one ``ACCEPTANCE <n> PASS|FAIL`` line (also repeated in the
terminal summary).  Criterion 8 trains 30 networks and takes several minutes.
"""

import math
import time

import numpy as np
import pytest

from chaos_sep import covering as cov
from chaos_sep import dynamics as dyn
from chaos_sep import mlp, pl
from chaos_sep import separation as sep
from chaos_sep.rates import rho, rho_legacy

from conftest import ACCEPTANCE

PHI = rho(3).rho


class Criterion:
    def __init__(self, n, title, limit_s, capsys):
        self.n, self.title, self.limit, self.capsys = n, title, limit_s, capsys
        self.checks: list[tuple[str, bool]] = []

    def check(self, label, ok):
        self.checks.append((label, bool(ok)))

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        dt = time.perf_counter() - self.t0
        if exc_type is not None:
            self.checks.append((f"raised {exc_type.__name__}: {exc}", False))
        self.check(f"runtime {dt:.1f}s < {self.limit}s", dt < self.limit)
        failed = [lab for lab, ok in self.checks if not ok]
        status = "FAIL" if failed else "PASS"
        detail = "; ".join(failed) if failed else f"{len(self.checks)} checks"
        line = f"ACCEPTANCE {self.n} {status}: {self.title} ({detail})"
        ACCEPTANCE[self.n] = line
        with self.capsys.disabled():
            print("\n" + line)
        assert not failed, line


def test_criterion_1_golden_rates(capsys):
    with Criterion(1, "golden rates", 1, capsys) as c:
        r3, r5, r7 = rho(3).rho, rho(5).rho, rho(7).rho
        c.check(f"rho(3)={r3!r} vs 1.618033988749895", abs(r3 - 1.618033988749895) <= 1e-12)
        c.check(f"|rho(5)-1.513|={abs(r5 - 1.513):.2e} <= 5e-4", abs(r5 - 1.513) <= 5e-4)
        c.check(f"|rho(7)-1.465|={abs(r7 - 1.465):.2e} <= 5e-4", abs(r7 - 1.465) <= 5e-4)


def test_criterion_2_corollary_suite(capsys):
    with Criterion(2, "corollary suite", 1, capsys) as c:
        ps = list(range(3, 42, 2))
        r = [rho(p).rho for p in ps]
        c.check("rho strictly decreasing on odd p in [3,41]", all(a > b for a, b in zip(r, r[1:])))
        c.check("rho > sqrt(2)", all(v > math.sqrt(2) for v in r))
        c.check("rho > legacy for p >= 5", all(rho(p).rho > rho_legacy(p).rho for p in ps[1:]))
        c.check("rho(3) == legacy(3)", abs(rho(3).rho - rho_legacy(3).rho) <= 1e-12)


def test_criterion_3_spectral_cross_check(capsys):
    with Criterion(3, "spectral cross-check", 1, capsys) as c:
        for p in range(3, 16, 2):
            d = abs(cov.spectral_radius(cov.build_theoretical_graph(p).adjacency) - rho(p).rho)
            c.check(f"p={p} diff {d:.1e} <= 1e-6", d <= 1e-6)


def test_criterion_4_family_validation(capsys):
    with Criterion(4, "family validation", 1, capsys) as c:
        for p in (3, 5, 7, 9):
            r = rho(p).rho
            sep.hard_family(p)
            z = dyn.family_orbit(r, p)
            c.check(f"p={p} residual {abs(z[p]):.1e} <= 1e-7", abs(z[p]) <= 1e-7)
            c.check(f"p={p} min gap >= 1e-3", dyn.pairwise_min_gap(z[:p]) >= 1e-3)
            res = dyn.orbit_sign_pattern_check(z[:p], r)
            c.check(f"p={p} sign pattern {res.reason}", res)


def test_criterion_5_oscillation_bound(capsys):
    with Criterion(5, "oscillation lower-bound soundness", 30, capsys) as c:
        for p in (3, 5):
            f = sep.hard_family(p)
            orb = dyn.Orbit.from_points(f, dyn.family_orbit(rho(p).rho, p)[:p])
            G = cov.oriented_graph(f, orb)
            lo, hi = G.intervals[0]
            tr = cov.oscillation_lower_bound(G, 12)
            h = f
            for t in range(1, 13):
                if t > 1:
                    h = pl.compose(f, h)
                n, d = pl.count_crossings(h, lo, hi), tr.at(t, "I0")
                c.check(f"p={p} t={t} crossings {n} >= delta {d}", n >= d)
        tent = sep.tent_map()
        h = tent
        for t in range(1, 13):
            if t > 1:
                h = pl.compose(tent, h)
            n = pl.count_crossings(h, -1.0, 1.0)
            c.check(f"tent t={t} crossings {n} == {2**t}", n == 2**t)


def test_criterion_6_integral_claim(capsys):
    with Criterion(6, "claim integral bound", 60, capsys) as c:
        f = sep.hard_family(3)
        L = pl.lipschitz(f)
        h = f
        for t in range(1, 13):
            if t > 1:
                h = pl.compose(f, h)
            # tightest intervals touch the domain boundary and are exactly at ratio 1
            rep = sep.interval_integral_check(h, 0.0, PHI - 1, L**t)
            c.check(f"t={t} min ratio {rep.min_ratio:.15f} (rtol 1e-9)", rep.ok(1e-9))


def test_criterion_7_desk_scale_theorem(capsys):
    with Criterion(7, "theorem soundness at desk scale", 300, capsys) as c:
        f = sep.hard_family(3)
        h = pl.self_compose(f, 14)
        n = pl.count_crossings(h, 0.0, PHI - 1)
        rep = sep.theory_bound(sep.SeparationConfig(PHI, PHI, 14, 4, 2, 0.0, PHI - 1), n)
        c.check("capacity 64 <= phi^14/8", rep.condition_met and rep.capacity == 64)
        floor = rep.floor_refined
        rng = np.random.default_rng(2024)
        worst = math.inf
        for seed in range(20):
            m = mlp.init(2, 4, seed)
            m = mlp.MlpModel(m.weights, [rng.normal(0, 1.0, b.shape) for b in m.biases], seed)
            d = pl.l1_distance(h, mlp.model_to_pl(m))
            worst = min(worst, d)
            c.check(f"random {seed}: l1 {d:.5f} >= {floor:.5f}", d >= floor - 1e-9)
        for seed in range(5):
            res = mlp.train(mlp.init(2, 4, seed), h)
            d = pl.l1_distance(h, mlp.model_to_pl(res.model))
            worst = min(worst, d)
            c.check(f"trained {seed}: l1 {d:.5f} >= {floor:.5f}", d >= floor - 1e-9)
        print(f"\n  floor_refined={floor:.6f} crossings={n} smallest l1={worst:.6f}")


@pytest.mark.slow
def test_criterion_8_experiments(capsys):
    with Criterion(8, "experiment reproduction", 1800, capsys) as c:
        depths = [1, 2, 3, 4, 5]
        easy = mlp.run_experiment("easy", depths)
        em = easy.median_l1()
        c.check(f"easy median l1 depth5 {em[5]:.4f} < depth1 {em[1]:.4f}", em[5] < em[1])
        hard = mlp.run_experiment("hard", depths)
        hm, cond = hard.median_l1(), hard.condition()
        target = 0.5 * (PHI - 1) ** 2 / 32
        for d in depths:
            if cond[d]:
                c.check(f"hard depth {d} median l1 {hm[d]:.4f} >= {target:.5f}", hm[d] >= target)
        c.check("some depth meets the condition", any(cond.values()))
        with capsys.disabled():
            print("\n  easy medians", {d: round(v, 4) for d, v in em.items()})
            print("  hard medians", {d: round(v, 4) for d, v in hm.items()}, "condition", cond)


def test_criterion_9_mlp_numerics(capsys):
    with Criterion(9, "MLP numerics", 60, capsys) as c:
        rng = np.random.default_rng(9)
        worst_rel = 0.0
        for seed in range(3):
            m = mlp.init(3, 5, seed)
            m = mlp.MlpModel(m.weights, [rng.normal(0, 0.5, b.shape) for b in m.biases], seed)
            X = rng.uniform(-1, 1, 64)
            Y = np.sin(3 * X)
            _, gw, gb = mlp.loss_and_grad(m, X, Y)
            g = np.concatenate([a.ravel() for w, b in zip(gw, gb) for a in (w, b)])
            theta = m.flat()
            for i in range(theta.size):
                tp, tm = theta.copy(), theta.copy()
                tp[i] += 1e-6
                tm[i] -= 1e-6
                num = (mlp.loss_and_grad(m.with_flat(tp), X, Y)[0] - mlp.loss_and_grad(m.with_flat(tm), X, Y)[0]) / 2e-6
                scale = max(abs(num), abs(g[i]))
                if scale > 1e-10:
                    worst_rel = max(worst_rel, abs(num - g[i]) / scale)
        c.check(f"gradient relative error {worst_rel:.1e} <= 1e-4", worst_rel <= 1e-4)
        x = np.linspace(-1, 1, 10_000)
        worst_gap, over = 0.0, 0
        for seed in range(40):
            l, u = int(rng.integers(1, 5)), int(rng.integers(1, 21))
            m = mlp.init(l, u, seed)
            m = mlp.MlpModel(m.weights, [rng.normal(0, 0.5, b.shape) for b in m.biases], seed)
            f = mlp.model_to_pl(m)
            over += f.pieces > sep.capacity(u, l)
            worst_gap = max(worst_gap, float(np.max(np.abs(mlp.forward(m, x) - f(x)))))
        c.check(f"{over} of 40 models exceed (2u)^l pieces", over == 0)
        c.check(f"forward vs extraction {worst_gap:.1e} <= 1e-6", worst_gap <= 1e-6)


def test_criterion_10_regimes(capsys):
    with Criterion(10, "regime trichotomy", 60, capsys) as c:
        slow = sep.slope_map(1.2)
        scan = dyn.detect_periods(slow, 9)
        odd = [n for n in scan.periods() if n % 2 and n > 1]
        c.check(f"slope 1.2 odd periods <= 9: {odd}", not odd)
        # "ratio C(f^t)/C(f^(t-1)) -> 1": per-step growth over t = 10..20 must be within 5% of 1
        probe = sep.crossing_growth(slow, 20)
        (a, b), ratio = probe.worst(10)
        c.check(f"slope 1.2 worst step ratio {ratio:.4f} on [{a:.3f}, {b:.3f}] <= 1.05 "
                f"(C(f^20)={int(probe.counts[probe.intervals.index((a, b)), -1])})", ratio <= 1.05)
        c.check("tent has period 3", dyn.detect_periods(sep.tent_map(), 3).has_period(3))
        c.check("hard_family(3) has period 3", dyn.detect_periods(sep.hard_family(3), 3).has_period(3))
        with capsys.disabled():
            print(f"\n  context: slope-1.2 crossing growth {ratio:.4f}/step stays below sqrt(2)={math.sqrt(2):.4f}")
