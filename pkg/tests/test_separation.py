import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chaos_sep import pl
from chaos_sep import separation as sep
from chaos_sep.rates import rho

from conftest import PHI

FLOOR = 0.011936437851565785994  # (phi-1)^2/32, 40-digit mpmath


def golden_cfg(t=40, u=20, l=4, L=PHI):
    return sep.SeparationConfig(PHI, L, t, u, l, 0.0, PHI - 1)


# --- constructions ---------------------------------------------------------------------


def test_golden_family_knots():
    f = sep.hard_family(3)
    assert np.allclose(f.knots, [(-1, PHI - 1), (0, -1), (1, PHI - 1)], atol=1e-15)
    assert f.is_self_map()


@pytest.mark.parametrize("p", [2, 4])
def test_family_needs_odd_period(p):
    with pytest.raises(ValueError):
        sep.hard_family(p)


def test_tent():
    f = sep.tent_map()
    assert f.knots == [(-1.0, 1.0), (0.0, -1.0), (1.0, 1.0)]
    assert pl.lipschitz(f) == 2.0


def test_default_levels():
    assert sep.default_levels(3) == pytest.approx((0.0, PHI - 1), abs=1e-15)
    lo, hi = sep.default_levels(5)
    assert (lo, hi) == pytest.approx((-0.224081404675609, 0.0), abs=1e-12)


def test_capacity_examples():
    assert sep.capacity(20, 5) == 102_400_000
    assert sep.capacity(1, 1) == 2
    assert sep.capacity(20, 4) == 2_560_000
    assert sep.capacity(1000, 20) == 2000**20  # plain int, no overflow


# --- theory bound -----------------------------------------------------------------------


def test_bound_depth4():
    rep = sep.theory_bound(golden_cfg())
    assert rep.condition_met
    assert rep.floor_headline == pytest.approx(FLOOR, rel=1e-14)


def test_bound_depth5():
    rep = sep.theory_bound(golden_cfg(l=5))
    assert not rep.condition_met
    assert rep.floor_headline == 0.0


def test_bound_larger_lipschitz_warns():
    with pytest.warns(UserWarning, match="shrinks"):
        rep = sep.theory_bound(golden_cfg(L=2.0))
    assert rep.floor_headline == 0.0 and rep.warnings


def test_config_validation():
    with pytest.raises(ValueError):
        sep.SeparationConfig(PHI, PHI, 10, 4, 2, 0.5, 0.5)
    with pytest.raises(ValueError):
        sep.SeparationConfig(PHI, 1.2, 10, 4, 2, 0.0, 0.5)
    with pytest.raises(ValueError):
        sep.SeparationConfig(PHI, PHI, 0, 4, 2, 0.0, 0.5)


@given(st.integers(1, 60), st.integers(1, 30), st.integers(1, 6), st.one_of(st.none(), st.integers(0, 10**9)))
def test_bound_invariants(t, u, l, n):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = sep.theory_bound(golden_cfg(t=t, u=u, l=l), n)
    assert rep.floor_refined >= 0
    if rep.condition_met:
        assert rep.floor_headline > 0
    assert rep.condition_met == (sep.capacity(u, l) <= PHI**t / 8)


def test_refined_floor_formula():
    rep = sep.theory_bound(golden_cfg(t=14, u=4, l=2), crossings=754)
    expect = (PHI - 1) ** 2 / (16 * PHI**14) * (754 - 128)
    assert rep.floor_refined == pytest.approx(expect, rel=1e-14)
    assert rep.crossings_measured


def test_report_serialization():
    rep = sep.theory_bound(golden_cfg())
    head, row = rep.to_csv().splitlines()
    assert head == "rho,L,t,u,l,x,y,capacity,condition,floor_headline,floor_refined"
    fields = dict(zip(head.split(","), row.split(",")))
    assert float(fields["floor_headline"]) == rep.floor_headline
    assert fields["condition"] == "true"
    assert rep.to_json()["capacity"] == 2_560_000


# --- sizing ----------------------------------------------------------------------------------


def test_min_compositions_examples():
    assert sep.min_compositions(4, 20, PHI) == 35
    assert sep.min_compositions(5, 20, PHI) == 43
    assert sep.min_compositions(1, 1, 2.0) == 4
    with pytest.raises(ValueError):
        sep.min_compositions(1, 1, 1.0)


@given(st.integers(1, 8), st.integers(1, 40), st.floats(1.05, 2.0))
def test_min_compositions_is_the_threshold(l, u, r):
    t = sep.min_compositions(l, u, r)
    # compare in log space; float rounding right at the boundary is ignored
    need = (l + 3) * math.log(2) + l * math.log(u)
    assert t * math.log(r) >= need - 1e-9
    assert (t - 1) * math.log(r) < need + 1e-9


def test_sizing_readings_report_both():
    rows = sep.sizing_readings(40, 20, [4, 5], PHI)
    assert [r["t_required"] for r in rows] == [35, 43]
    assert [r["satisfied"] for r in rows] == [True, False]
    assert [r["condition_met"] for r in rows] == [True, False]


# --- integral claim ------------------------------------------------------------------------------


def test_integral_claim_golden():
    f = sep.hard_family(3)
    h = f
    for t in range(1, 13):
        if t > 1:
            h = pl.compose(f, h)
        rep = sep.interval_integral_check(h, 0.0, PHI - 1, PHI**t)
        assert rep.ok(), (t, rep.min_ratio)


def test_integral_claim_tent():
    f = sep.tent_map()
    h = f
    for t in range(1, 11):
        if t > 1:
            h = pl.compose(f, h)
        rep = sep.interval_integral_check(h, -1.0, 1.0, 2.0**t)
        assert rep.ok()
        assert len(rep.intervals) == 2**t + 1


def test_integral_claim_flags_understated_lipschitz():
    # at t=7 the boundary intervals are tight (ratio 1), so halving L^t breaks them
    h = pl.self_compose(sep.hard_family(3), 7)
    assert sep.interval_integral_check(h, 0.0, PHI - 1, PHI**7).ok()
    assert not sep.interval_integral_check(h, 0.0, PHI - 1, PHI**7 / 2).ok()


def test_integral_check_empty_when_no_level_reached():
    rep = sep.interval_integral_check(pl.PLFunction.constant(0.0), 0.5, 0.7, 1.0)
    assert rep.intervals == [] and not rep.ok()


def test_jay_partition_alternates():
    h = pl.self_compose(sep.hard_family(3), 8)
    part = sep.jay_partition(h, 0.0, PHI - 1)
    labels = [lab for _, _, lab in part]
    assert all(a != b for a, b in zip(labels, labels[1:]))
    # one partition interval per level-run, so its size matches the crossing count
    assert len(part) == pl.count_crossings(h, 0.0, PHI - 1) + 1


# --- regimes -------------------------------------------------------------------------------------


def test_growth_probe_tent():
    probe = sep.crossing_growth(sep.tent_map(), 8, grid=3)
    assert probe.intervals[1] == (-1.0, 1.0)
    assert probe.counts[1].tolist() == [2**t for t in range(1, 9)]
    assert probe.step_ratio(4)[1] == pytest.approx(2.0)


def test_growth_probe_csv():
    text = sep.crossing_growth(sep.slope_map(1.2), 3, grid=3).to_csv()
    assert text.splitlines()[0] == "t,x,y,crossings"


def test_regime_rates():
    assert pl.lipschitz(sep.hard_family(3)) == pytest.approx(rho(3).rho, abs=1e-15)
    assert pl.lipschitz(sep.slope_map(1.2)) < math.sqrt(2)
