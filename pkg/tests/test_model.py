import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from pinchnoma.errors import DegenerateGeometry, NumericalStep, RankOrder
from pinchnoma.model import (
    AntennaPlacement,
    ChannelState,
    PowerAllocation,
    SystemConfig,
    UserLayout,
    channel_power_curvature,
    channel_power_curvature_exact,
    channel_state,
    dbm_to_w,
    decode_sinr,
    effective_channel,
    freespace_coefficient,
    sum_rate,
    user_rate,
    user_rates,
    waveguide_phase,
)

# 50-digit evaluation of sqrt(eta) exp(-j 2 pi r / lam) / r for u=(1,2,0), a=(3,0,3), 28 GHz
FREESPACE_GOLDEN = 0.00017475576525896876 - 0.00011028715279103404j


def unit_config(**kw):
    return SystemConfig(**kw)


def test_dbm_conversion_exact():
    assert dbm_to_w(-90.0) == pytest.approx(1e-12, rel=1e-15)
    assert dbm_to_w(30.0) == 1.0


@pytest.mark.parametrize("bad", [dict(carrier_freq_hz=0), dict(kappa=0.5), dict(waveguide_height_m=0),
                                 dict(total_power_w=0), dict(noise_power_w=-1), dict(antennas=0), dict(users=0)])
def test_config_rejects_invalid(bad):
    with pytest.raises(ValueError):
        SystemConfig(**bad)


def test_derived_constants(cfg):
    assert cfg.guided_wavelength == pytest.approx(cfg.wavelength / 1.4)
    assert cfg.eta == pytest.approx((cfg.wavelength / (4 * math.pi)) ** 2)
    assert cfg.feed_x == -5.0
    assert cfg.with_snr_db(20).snr_db == pytest.approx(20.0)


def test_layout_requires_ground_plane():
    with pytest.raises(ValueError):
        UserLayout([[0.0, 0.0, 1.0]])


def test_freespace_straight_down(cfg):
    g = freespace_coefficient((0, 0, 0), (0, 0, 3.0), cfg)
    assert abs(g) == pytest.approx(math.sqrt(cfg.eta) / 3.0, rel=1e-14)
    expected = cmath.exp(-2j * math.pi * 3.0 / cfg.wavelength)
    assert g / abs(g) == pytest.approx(expected, abs=1e-12)


def test_freespace_inverse_distance(cfg):
    a = abs(freespace_coefficient((0, 0, 0), (1.0, 0, 2.0), cfg))
    b = abs(freespace_coefficient((0, 0, 0), (2.0, 0, 4.0), cfg))
    assert b == pytest.approx(a / 2, rel=1e-14)


def test_freespace_matches_extended_precision(cfg):
    g = freespace_coefficient((1, 2, 0), (3, 0, 3), cfg)
    assert abs(g - FREESPACE_GOLDEN) <= 1e-11 * abs(FREESPACE_GOLDEN)


def test_freespace_coincident_points_rejected(cfg):
    with pytest.raises(DegenerateGeometry):
        freespace_coefficient((0, 0, 0), (0, 0, 0), cfg)


@pytest.mark.parametrize("ell_frac, expected", [(0.0, 1.0), (1.0, 1.0), (0.5, -1.0)])
def test_waveguide_phase_special_lengths(cfg, ell_frac, expected):
    ph = waveguide_phase(0.0, ell_frac * cfg.guided_wavelength, cfg)
    assert ph == pytest.approx(expected, abs=1e-12)


@given(st.floats(-5, 5), st.integers(-50, 50))
def test_waveguide_phase_periodic(x, n):
    cfg = SystemConfig()
    a = waveguide_phase(cfg.feed_x, x, cfg)
    b = waveguide_phase(cfg.feed_x, x + n * cfg.guided_wavelength, cfg) if x + n * cfg.guided_wavelength >= cfg.feed_x else a
    assert abs(a - b) <= 1e-9


def test_single_antenna_over_user_at_feed():
    cfg = SystemConfig(feed_x_m=0.0)
    g = effective_channel((0, 0, 0), AntennaPlacement([0.0], 3.0), cfg)
    assert g == pytest.approx(math.sqrt(cfg.eta) * cmath.exp(-2j * math.pi * 3.0 / cfg.wavelength) / 3.0, rel=1e-13)


def test_two_antennas_coherent_combining():
    # user midway between two antennas whose guided paths differ by a whole lambda_g
    cfg = SystemConfig(feed_x_m=-5.0)
    lg = cfg.guided_wavelength
    half = 5 * lg
    layout_x = -1.0
    xs = [layout_x - half, layout_x + half]
    g = effective_channel((layout_x, 0, 0), AntennaPlacement(xs, 3.0), cfg)
    r = math.hypot(half, 3.0)
    assert abs(g) == pytest.approx(math.sqrt(2) * math.sqrt(cfg.eta) / r, rel=1e-9)


def test_effective_channel_term_by_term(cfg, rng):
    xs = np.sort(rng.uniform(-5, 5, 4))
    user = (rng.uniform(-5, 5), rng.uniform(-5, 5), 0.0)
    total = 0j
    for a in xs:
        r = math.dist(user, (a, 0.0, 3.0))
        ell = abs(a - cfg.feed_x)
        total += math.sqrt(cfg.eta) * cmath.exp(-2j * math.pi * (r / cfg.wavelength - ell / cfg.guided_wavelength)) / r
    g = effective_channel(user, AntennaPlacement(xs, 3.0), cfg)
    assert abs(g - total / 2) <= 1e-12 * abs(total / 2)


def test_path_loss_monotone_single_antenna(cfg):
    ys = np.linspace(0, 5, 20)
    mags = [abs(effective_channel((0.0, y, 0.0), AntennaPlacement([0.0], 3.0), cfg)) for y in ys]
    assert np.all(np.diff(mags) < 0)


def test_channel_state_orders_and_ties(cfg, rng):
    st_ = ChannelState([1.0, 1.0])
    assert st_.sic_order.tolist() == [0, 1]
    assert ChannelState([2.0]).sic_order.tolist() == [0]
    g = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    order = ChannelState(g).sic_order.tolist()
    assert order == sorted(range(5), key=lambda k: abs(g[k]) ** 2)


def test_mirror_users_have_equal_gain(cfg):
    layout = UserLayout.from_xy([1.0, 1.0], [2.0, -2.0])
    st_ = channel_state(layout, AntennaPlacement([-1.0, 2.0], 3.0), cfg)
    assert st_.powers[0] == pytest.approx(st_.powers[1], rel=1e-14)
    assert st_.sic_order.tolist() in ([0, 1], [1, 0])


def unit_state(gains=(1.0, 1.0)):
    return ChannelState(np.sqrt(np.asarray(gains, float)))


def test_decode_sinr_hand_example():
    cfg = SystemConfig(noise_power_w=1.0, total_power_w=3.0)
    st_, q = unit_state(), PowerAllocation([2.0, 1.0], 3.0)
    assert decode_sinr(st_, q, 0, 0, cfg) == pytest.approx(1.0)
    assert decode_sinr(st_, q, 0, 1, cfg) == pytest.approx(1.0)
    assert decode_sinr(st_, q, 1, 1, cfg) == pytest.approx(1.0)
    assert user_rates(st_, q, cfg) == pytest.approx([1.0, 1.0])


def test_decode_sinr_edges():
    cfg = SystemConfig(noise_power_w=1.0, total_power_w=3.0)
    st_ = unit_state((1.0, 4.0))
    assert decode_sinr(st_, PowerAllocation([0.0, 1.0], 3.0), 0, 1, cfg) == 0.0
    # top rank sees no residual interference
    assert decode_sinr(st_, PowerAllocation([2.0, 1.0], 3.0), 1, 1, cfg) == pytest.approx(4.0)
    with pytest.raises(RankOrder):
        decode_sinr(st_, PowerAllocation([2.0, 1.0], 3.0), 1, 0, cfg)


def test_single_user_rate_and_noise_scaling():
    cfg = SystemConfig(noise_power_w=2.0, total_power_w=6.0)
    st_, q = unit_state((3.0,)), PowerAllocation([6.0], 6.0)
    assert user_rate(st_, q, 0, cfg) == pytest.approx(math.log2(1 + 9.0))
    s1 = decode_sinr(st_, q, 0, 0, cfg)
    s2 = decode_sinr(st_, q, 0, 0, cfg.replace(noise_power_w=4.0))
    assert s2 == pytest.approx(s1 / 2)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_user_rates_equal_explicit_min_loop(K, seed):
    r = np.random.default_rng(seed)
    cfg = SystemConfig(noise_power_w=float(r.uniform(0.1, 2)))
    st_ = ChannelState(r.standard_normal(K) + 1j * r.standard_normal(K))
    q = PowerAllocation(r.uniform(0, 1, K), 1.0)
    fast = user_rates(st_, q, cfg)
    for rank, k in enumerate(st_.sic_order):
        assert fast[k] == user_rate(st_, q, rank, cfg)


@given(st.integers(2, 5), st.integers(0, 2**32 - 1), st.floats(1e-3, 0.5))
def test_sinr_monotone_in_powers(K, seed, bump):
    r = np.random.default_rng(seed)
    cfg = SystemConfig(noise_power_w=1.0)
    st_ = ChannelState(r.uniform(0.5, 2, K))
    q = r.uniform(0.1, 1, K)
    k, l = 0, K - 1
    base = decode_sinr(st_, PowerAllocation(q, 10.0), k, l, cfg)
    up = q.copy()
    up[st_.sic_order[k]] += bump
    assert decode_sinr(st_, PowerAllocation(up, 10.0), k, l, cfg) > base
    more = q.copy()
    more[st_.sic_order[k + 1]] += bump
    assert decode_sinr(st_, PowerAllocation(more, 10.0), k, l, cfg) <= base


def test_sum_rate_zero_power_and_naive(cfg, rng):
    layout = UserLayout.from_xy(rng.uniform(-5, 5, 3), rng.uniform(-5, 5, 3))
    pl = AntennaPlacement([-2.0, 1.0], 3.0)
    P = cfg.total_power_w
    assert sum_rate(layout, pl, PowerAllocation(np.zeros(3), P), cfg) == 0.0
    q = PowerAllocation(rng.uniform(0, P / 3, 3), P)
    st_ = channel_state(layout, pl, cfg)
    naive = 0.0
    for k in range(3):
        naive += min(math.log2(1 + decode_sinr(st_, q, k, l, cfg)) for l in range(k, 3))
    assert sum_rate(layout, pl, q, cfg) == pytest.approx(naive, rel=1e-12)


def _delta(cfg, user, a1, a2):
    r1 = math.dist(user, (a1, 0, cfg.waveguide_height_m))
    r2 = math.dist(user, (a2, 0, cfg.waveguide_height_m))
    l1, l2 = abs(a1 - cfg.feed_x), abs(a2 - cfg.feed_x)
    return 2 * math.pi * ((r1 - r2) / cfg.wavelength - (l1 - l2) / cfg.guided_wavelength)


def _a1_with_phase(cfg, user, a2, target, lo=0.5, hi=0.6):
    # nearest a1 in [lo, hi] where the relative phase is target mod 2 pi
    d_lo = _delta(cfg, user, lo, a2)
    n = math.ceil((d_lo - target) / (2 * math.pi))
    goal = target + 2 * math.pi * n
    f = lambda a: _delta(cfg, user, a, a2) - goal
    if f(lo) * f(hi) > 0:
        goal -= 2 * math.pi
    return brentq(lambda a: _delta(cfg, user, a, a2) - goal, lo, hi, xtol=1e-15)


def test_curvature_positive_at_antiphase(cfg):
    user, a2 = (0.0, 0.0, 0.0), -0.55
    a1 = _a1_with_phase(cfg, user, a2, math.pi)
    assert math.cos(_delta(cfg, user, a1, a2)) == pytest.approx(-1.0, abs=1e-9)
    assert channel_power_curvature(cfg, user, a1, a2) > 0
    assert channel_power_curvature_exact(cfg, user, a1, a2) > 0


def test_curvature_negative_in_phase(cfg):
    user, a2 = (0.0, 0.0, 0.0), -0.55
    a1 = _a1_with_phase(cfg, user, a2, 0.0)
    assert math.cos(_delta(cfg, user, a1, a2)) == pytest.approx(1.0, abs=1e-9)
    assert channel_power_curvature(cfg, user, a1, a2) < 0
    assert channel_power_curvature_exact(cfg, user, a1, a2) < 0


def test_curvature_fd_matches_closed_form(cfg, rng):
    for _ in range(20):
        user = (rng.uniform(-5, 5), rng.uniform(-5, 5), 0.0)
        a1, a2 = rng.uniform(-4.9, 5), rng.uniform(-5, 5)
        ex = channel_power_curvature_exact(cfg, user, a1, a2)
        assert channel_power_curvature(cfg, user, a1, a2) == pytest.approx(ex, rel=1e-4)


def test_curvature_takes_both_signs(cfg):
    vals = [channel_power_curvature(cfg, (0.3, 1.2, 0.0), a, 2.0) for a in np.linspace(-1, 1, 201)]
    assert min(vals) < 0 < max(vals)


def test_curvature_step_underflow(cfg):
    with pytest.raises(NumericalStep):
        channel_power_curvature(cfg, (0, 0, 0), 1.0, 2.0, step=1e-300)
