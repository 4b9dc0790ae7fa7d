import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, stats

from agislice import mana
from agislice.errors import UnstableQueueError
from agislice.model import ManaConfig, MobilityProfile


def cfg_at(base, **kw):
    return replace(base, **kw)


@pytest.fixture()
def mcfg(table1):
    return table1.mana


def unit_mob(route=(0.0, 1.0), k=1):
    return MobilityProfile(1.0, k, 1.0, route)


def test_first_block_has_no_window(mcfg, mob):
    assert mana.window_shape(1, mcfg, mob) == 0
    assert mana.block_accomplishment(1, mcfg, mob) == 0.0
    assert mana.expected_remaining(1, mcfg, mob) == mcfg.map_size


def test_exponential_window_tail():
    mob = unit_mob()
    cfg = ManaConfig(1.0, 1, 1.0 / 2.5, 1.0, 1.0)  # x = 2.5
    for j in (2, 3, 10):
        assert mana.block_accomplishment(j, cfg, mob) == pytest.approx(math.exp(-2.5), rel=1e-14)


def test_block_tail_monte_carlo(mcfg, mob):
    cfg = cfg_at(mcfg, cache_slots=10, hap_rate=20e6)
    rng = np.random.default_rng(7)
    window = rng.exponential(1 / 0.2, size=(10**6, 50)).sum(axis=1)
    p_mc = float(np.mean(window * cfg.hap_rate >= cfg.map_size))
    assert abs(mana.block_accomplishment(11, cfg, mob) - p_mc) < 0.002
    assert mana.block_accomplishment(40, cfg, mob) == mana.block_accomplishment(11, cfg, mob)


def test_ratio_is_route_weighted_block_sum(mcfg, mob):
    cfg = cfg_at(mcfg, cache_slots=10, hap_rate=20e6)
    direct = math.fsum(g * mana.block_accomplishment(j, cfg, mob)
                       for j, g in enumerate(mob.route_dist, start=1))
    assert mana.accomplishment_ratio(cfg, mob) == pytest.approx(direct, abs=1e-14)


def test_limits(mcfg, mob):
    assert mana.accomplishment_ratio(cfg_at(mcfg, cache_slots=0), mob) == 0.0
    huge = cfg_at(mcfg, hap_rate=1e18)
    assert mana.accomplishment_ratio(huge, mob) == pytest.approx(1 - mob.route_dist[0], abs=1e-6)
    zero = cfg_at(mcfg, hap_rate=0.0)
    assert mana.accomplishment_ratio(zero, mob) == 0.0
    assert mana.remaining_moments(zero, mob) == (mcfg.map_size, mcfg.map_size**2)


@settings(max_examples=80, deadline=None)
@given(c=st.integers(0, 40), rate=st.floats(1e5, 1e9), psi=st.floats(0.0, 0.98))
def test_bound_ordering_and_gap(table1, c, rate, psi):
    mcfg = table1.mana
    mob = MobilityProfile.geometric(1.2, 5, 0.2, psi)
    cfg = cfg_at(mcfg, cache_slots=c, hap_rate=rate)
    lo, hi = mana.accomplishment_bounds(cfg, mob)
    p = mana.accomplishment_ratio(cfg, mob)
    assert lo - 1e-15 <= p <= hi + 1e-15
    head = math.fsum(mob.route_dist[:c])
    assert hi - lo == pytest.approx(head * hi, abs=1e-12)


def test_monotone_in_rate_cache_and_speed(mcfg, mob):
    rates = np.arange(1, 101) * 1e6
    for c in (3, 5, 10, 15):
        p = [mana.accomplishment_ratio(cfg_at(mcfg, cache_slots=c, hap_rate=r), mob) for r in rates]
        assert np.all(np.diff(p) >= 0)
        assert np.all(np.diff([v for v in p if 1e-300 < v < 1 - 1e-12]) > 0)
    for r in (10e6, 20e6, 40e6):
        p = [mana.accomplishment_ratio(cfg_at(mcfg, cache_slots=c, hap_rate=r), mob) for c in range(16)]
        assert np.all(np.diff(p) >= 0)
    cfg = cfg_at(mcfg, cache_slots=10, hap_rate=20e6)
    speeds = [mana.accomplishment_ratio(cfg, MobilityProfile.geometric(1.2, 5, mu, 0.9))
              for mu in (0.1, 0.15, 0.2, 0.3, 0.4)]
    assert np.all(np.diff(speeds) < 0)


def test_saddle_values(mcfg, mob):
    cfg = cfg_at(mcfg, cache_slots=10)
    assert mana.saddle_hap_rate(cfg, mob) == pytest.approx(5e9 * 0.2 / 52)
    double = mana.saddle_hap_rate(cfg_at(mcfg, cache_slots=20), mob)
    assert double / mana.saddle_hap_rate(cfg, mob) == pytest.approx(52 / 102)
    one = ManaConfig(5e9, 1, 1.0, 1.0, 1.0)
    assert mana.saddle_hap_rate(one, MobilityProfile(1, 1, 0.2, (1.0,))) == pytest.approx(5e9 * 0.2 / 3)
    with pytest.raises(ValueError):
        mana.saddle_hap_rate(cfg_at(mcfg, cache_slots=0), mob)


def upper_bound_curve(cfg, mob, rate):
    return mana.accomplishment_bounds(cfg_at(cfg, hap_rate=rate), mob)[1]


def second_derivative_flip(cfg, mob, centre, rel_span=0.5, points=2001):
    """Rate where the central second difference of the upper bound turns + to -."""
    h = 1e-3 * centre
    grid = centre * np.linspace(1 - rel_span, 1 + rel_span, points)
    d2 = np.array([upper_bound_curve(cfg, mob, r + h) - 2 * upper_bound_curve(cfg, mob, r)
                   + upper_bound_curve(cfg, mob, r - h) for r in grid])
    flips = np.flatnonzero((d2[:-1] > 0) & (d2[1:] < 0))
    assert len(flips) == 1
    i = flips[0]
    # linear interpolation of the zero crossing
    return grid[i] - d2[i] * (grid[i + 1] - grid[i]) / (d2[i + 1] - d2[i])


@pytest.mark.parametrize("c", [1, 5, 10])  # K*C_m = 5, 25, 50
def test_upper_bound_inflection_located_exactly(mcfg, c):
    mob = MobilityProfile.geometric(1.2, 5, 0.2, 0.9)
    cfg = cfg_at(mcfg, cache_slots=c)
    exact = mana.upper_bound_inflection_rate(cfg, mob)
    assert second_derivative_flip(cfg, mob, exact) == pytest.approx(exact, rel=1e-3)


@pytest.mark.parametrize("c", [1, 5, 10])
def test_saddle_formula_offset_from_inflection(mcfg, c):
    mob = MobilityProfile.geometric(1.2, 5, 0.2, 0.9)
    cfg = cfg_at(mcfg, cache_slots=c)
    s = 5 * c
    ratio = mana.upper_bound_inflection_rate(cfg, mob) / mana.saddle_hap_rate(cfg, mob)
    assert ratio == pytest.approx((s + 2) / (s + 1))


def test_remaining_exponential_closed_form():
    mob = unit_mob()
    cfg = ManaConfig(1.0, 1, 1.0, 1.0, 1.0)  # x = 1
    expected = 1.0 - (1.0 - math.exp(-1.0))
    assert expected == pytest.approx(math.exp(-1))
    assert mana.expected_remaining(2, cfg, mob) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("shape,x", [(1, 0.3), (5, 5.0), (25, 20.0), (50, 50.0), (50, 80.0), (75, 40.0)])
def test_remaining_moments_quadrature(shape, x):
    size = 1.0
    # window W ~ Gamma(shape); remaining = (1 - W/x)^+
    m1, _ = integrate.quad(lambda w: (1 - w / x) * stats.gamma.pdf(w, shape), 0, x, limit=200)
    m2, _ = integrate.quad(lambda w: (1 - w / x) ** 2 * stats.gamma.pdf(w, shape), 0, x, limit=200)
    a, b = mana._remaining_moments(shape, x, size)
    assert a == pytest.approx(m1, abs=1e-10)
    assert b == pytest.approx(m2, abs=1e-10)


def test_remaining_moments_sane(mcfg, mob):
    for c in (0, 3, 10):
        for r in (0.0, 5e6, 20e6, 80e6):
            cfg = cfg_at(mcfg, cache_slots=c, hap_rate=r)
            for j in range(1, 15):
                m1 = mana.expected_remaining(j, cfg, mob)
                m2 = mana.remaining_second_moment(j, cfg, mob)
                assert 0 <= m1 <= cfg.map_size
                assert m2 >= m1 * m1 * (1 - 1e-12)


def test_service_time_limits(mcfg, mob):
    cfg = cfg_at(mcfg, hap_rate=0.0, rsu_rate=1e9)
    assert mana.mean_service_time(cfg, mob) == pytest.approx(5.0)
    parked = MobilityProfile(1.2, 5, 0.2, (1.0,))
    cfg = cfg_at(mcfg, rsu_rate=1e9)
    assert mana.mean_service_time(cfg, parked) == pytest.approx(5.0)
    assert mana.service_variance(cfg, parked) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError, match="RSU rate required"):
        mana.mean_service_time(cfg_at(mcfg, rsu_rate=0.0), mob)


def test_service_time_non_decreasing_in_x(mcfg, mob):
    # x = mu_v L_m / R_HM, so sweep the HAP rate downwards
    xs = np.linspace(0.5, 150, 100)
    h = [mana.mean_service_time(cfg_at(mcfg, hap_rate=0.2 * 5e9 / x), mob) for x in xs]
    assert np.all(np.diff(h) >= -1e-15)


def test_pollaczek_khinchine():
    assert mana.pollaczek_khinchine(0.5, 1.0, 1.0) == pytest.approx(1.5)
    # exponential service: M/M/1 sojourn 1/(mu - lambda)
    assert mana.pollaczek_khinchine(0.5, 1.0, 2.0) == pytest.approx(2.0)
    assert mana.md1_sojourn(0.0, 3.0) == 3.0
    with pytest.raises(UnstableQueueError) as err:
        mana.pollaczek_khinchine(2.0, 1.0, 1.0)
    assert err.value.utilization == pytest.approx(2.0)


def test_mg1_light_traffic(mcfg):
    mob = MobilityProfile.geometric(1e-9, 5, 0.2, 0.9)
    cfg = cfg_at(mcfg, rsu_rate=1e9)
    assert mana.mg1_delay(cfg, mob) == pytest.approx(mana.mean_service_time(cfg, mob), rel=1e-6)


def test_md1_bound_examples(mcfg):
    parked = MobilityProfile(1e-12, 5, 0.2, (1.0,))
    cfg = cfg_at(mcfg, rsu_rate=5e9)
    assert mana.md1_delay_bound(cfg, parked) == pytest.approx(1.0, rel=1e-9)
    half = MobilityProfile(0.5, 5, 0.2, (1.0,))
    assert mana.md1_delay_bound(cfg, half) == pytest.approx(1.5)


@settings(max_examples=100, deadline=None)
@given(c=st.integers(0, 20), rate=st.floats(0, 1e8), rsu=st.floats(1e9, 1e11), psi=st.floats(0, 0.95))
def test_md1_bound_dominates_mg1(table1, c, rate, rsu, psi):
    mcfg = table1.mana
    mob = MobilityProfile.geometric(1.2, 5, 0.2, psi)
    a = mana.analyze_mana(cfg_at(mcfg, cache_slots=c, hap_rate=rate, rsu_rate=rsu), mob)
    assert a.md1_delay >= a.mg1_delay * (1 - 1e-12)


def test_rate_factor_values():
    assert mana.md1_rate_factor(0.0) == 1.0
    assert mana.md1_rate_factor(1.0) == pytest.approx(1 / (2 - math.sqrt(2)), rel=1e-15)
    for z in (1e-3, 1.0, 1e3):
        naive = z / (1 + z - math.sqrt(1 + z * z))
        assert mana.md1_rate_factor(z) == pytest.approx(naive, rel=1e-9)
    # the unrationalized form cancels catastrophically here; the series is 1 + z/2
    assert mana.md1_rate_factor(1e-12) == pytest.approx(1 + 0.5e-12, rel=1e-15)


@pytest.mark.parametrize("z", [0.01, 0.1, 1.0, 10.0, 100.0])
def test_rate_inversion_bisection_oracle(mcfg, z):
    lam, target, size = 1.2, 1.0, 5e9
    p_acc = 1 - z / (lam * target)
    rate = mana.min_rsu_rate_mana(p_acc, lam, target, size)
    lam_thin = lam * (1 - p_acc)
    lo = lam_thin * size * (1 + 1e-12)
    root = optimize.brentq(lambda r: mana.md1_sojourn(lam_thin, size / r) - target, lo, 1e15,
                           xtol=1e-6, rtol=1e-15)
    assert rate == pytest.approx(root, rel=1e-10)
    assert lam_thin * size < rate  # stable root


def test_rate_edge_cases():
    assert mana.min_rsu_rate_mana(1.0, 1.2, 1.0, 5e9) == pytest.approx(5e9)
    assert mana.min_rsu_rate_mana(0.999999999, 1.2, 1.0, 5e9) > 5e9
    with pytest.raises(ValueError):
        mana.min_rsu_rate_mana(0.5, 1.2, 0.0, 5e9)


def test_rate_convex_increasing_in_load():
    z = np.linspace(1e-3, 100, 2000)
    r = np.array([mana.md1_rate_factor(v) for v in z])
    assert np.all(np.diff(r) > 0)
    assert np.all(np.diff(r, 2) > 0)


def test_analysis_reports_unstable_as_infinite(mcfg, mob):
    a = mana.analyze_mana(cfg_at(mcfg, hap_rate=0.0, rsu_rate=1e9), mob)
    assert math.isinf(a.mg1_delay) and math.isinf(a.md1_delay)
    assert a.p_acc == 0.0 and a.x == math.inf
