"""Pinching-antenna channel model, SIC ordering, SINRs and NOMA rates.

Channels use a dimensionless amplitude convention: the effective gain of user
``k`` is

    g_k = (1/sqrt(M)) * sum_m sqrt(eta) * exp(-j 2 pi (r_km / lam - l_m / lam_g)) / r_km

with ``r_km`` the free-space distance from antenna ``m`` to the user and
``l_m`` the guided distance from the feed point. Transmit power lives only in
the allocation vector ``q`` (watts, ``sum(q) <= P``) and noise enters the
SINR as ``sigma^2`` directly.

Ranks and user indices are 0-based throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateGeometry, NumericalStep, RankOrder

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_w(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def w_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w) + 30.0


@dataclass(frozen=True)
class SystemConfig:
    """Physical constants, geometry and budgets for one scenario.

    ``feed_x_m=None`` puts the waveguide feed at the left edge of the service
    region, ``x = -D1/2``.
    """

    carrier_freq_hz: float = 28e9
    kappa: float = 1.4
    waveguide_height_m: float = 3.0
    feed_x_m: float | None = None
    region_d1_m: float = 10.0
    region_d2_m: float = 10.0
    total_power_w: float = 1e-11
    noise_power_w: float = dbm_to_w(-90.0)
    antennas: int = 4
    users: int = 4

    def __post_init__(self):
        if not self.carrier_freq_hz > 0:
            raise ValueError("carrier_freq_hz must be > 0")
        if not self.kappa >= 1:
            raise ValueError("kappa must be >= 1")
        if not self.waveguide_height_m > 0:
            raise ValueError("waveguide_height_m must be > 0")
        if not (self.total_power_w > 0 and self.noise_power_w > 0):
            raise ValueError("total_power_w and noise_power_w must be > 0")
        if self.antennas < 1 or self.users < 1:
            raise ValueError("antennas and users must be >= 1")
        if self.region_d1_m < 0 or self.region_d2_m < 0:
            raise ValueError("region sides must be >= 0")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def guided_wavelength(self) -> float:
        return self.wavelength / self.kappa

    @property
    def eta(self) -> float:
        return (SPEED_OF_LIGHT / (4.0 * math.pi * self.carrier_freq_hz)) ** 2

    @property
    def feed_x(self) -> float:
        return -self.region_d1_m / 2.0 if self.feed_x_m is None else self.feed_x_m

    @property
    def snr_db(self) -> float:
        """Transmit SNR ``P / sigma^2`` in dB."""
        return 10.0 * math.log10(self.total_power_w / self.noise_power_w)

    def with_snr_db(self, snr_db: float) -> "SystemConfig":
        return replace(self, total_power_w=self.noise_power_w * 10.0 ** (snr_db / 10.0))

    def with_power_dbm(self, dbm: float) -> "SystemConfig":
        return replace(self, total_power_w=dbm_to_w(dbm))

    def replace(self, **changes) -> "SystemConfig":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class UserLayout:
    positions: np.ndarray  # (K, 3), z == 0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 3)
        if np.any(pos[:, 2] != 0.0):
            raise ValueError("user z-coordinates must be exactly 0")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @classmethod
    def from_xy(cls, xs, ys=None) -> "UserLayout":
        xs = np.asarray(xs, dtype=float)
        ys = np.zeros_like(xs) if ys is None else np.asarray(ys, dtype=float)
        return cls(np.column_stack([xs, ys, np.zeros_like(xs)]))

    @property
    def x(self) -> np.ndarray:
        return self.positions[:, 0]

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True, eq=False)
class AntennaPlacement:
    xs: np.ndarray
    height: float

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float).reshape(-1)
        xs.setflags(write=False)
        object.__setattr__(self, "xs", xs)

    @property
    def points(self) -> np.ndarray:
        m = len(self.xs)
        return np.column_stack([self.xs, np.zeros(m), np.full(m, self.height)])

    def __len__(self) -> int:
        return len(self.xs)


@dataclass(frozen=True, eq=False)
class ChannelState:
    """Per-user effective gains and the ascending-gain SIC order.

    ``sic_order[r]`` is the user index holding rank ``r`` (rank 0 weakest).
    """

    gains: np.ndarray
    sic_order: np.ndarray = field(default=None)

    def __post_init__(self):
        g = np.array(self.gains, dtype=complex).reshape(-1)
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)
        order = self.sic_order
        if order is None:
            order = np.argsort(np.abs(g) ** 2, kind="stable")
        order = np.array(order, dtype=np.int64)
        order.setflags(write=False)
        object.__setattr__(self, "sic_order", order)

    @property
    def powers(self) -> np.ndarray:
        """|g_k|^2 in user-index order."""
        return np.abs(self.gains) ** 2

    @property
    def sorted_powers(self) -> np.ndarray:
        """|g|^2 in SIC-rank order (ascending)."""
        return self.powers[self.sic_order]

    @property
    def ranks(self) -> np.ndarray:
        """Inverse permutation: ``ranks[k]`` is the SIC rank of user ``k``."""
        r = np.empty_like(self.sic_order)
        r[self.sic_order] = np.arange(len(r))
        return r

    def __len__(self) -> int:
        return len(self.gains)


@dataclass(frozen=True, eq=False)
class PowerAllocation:
    """Per-user transmit powers (W), indexed by user."""

    q: np.ndarray
    budget_w: float

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def total(self) -> float:
        return float(self.q.sum())

    def is_feasible(self, rel_slack: float = 1e-9) -> bool:
        return bool(np.all(self.q >= 0) and self.total <= self.budget_w * (1 + rel_slack))

    def by_rank(self, state: ChannelState) -> np.ndarray:
        return self.q[state.sic_order]


def freespace_coefficient(user, antenna, config: SystemConfig) -> complex:
    """sqrt(eta) * exp(-j 2 pi r / lam) / r for a single antenna-user pair."""
    r = float(np.linalg.norm(np.asarray(antenna, float) - np.asarray(user, float)))
    if r == 0.0:
        raise DegenerateGeometry(f"user coincides with antenna at {tuple(antenna)}")
    return math.sqrt(config.eta) * complex(np.exp(-2j * math.pi * r / config.wavelength)) / r


def waveguide_phase(feed_x: float, antenna_x: float, config: SystemConfig) -> complex:
    """Conjugate in-guide phasor exp(+j 2 pi |feed - a| / lam_g)."""
    ell = abs(feed_x - antenna_x)
    return complex(np.exp(2j * math.pi * ell / config.guided_wavelength))


def _channel_matrix(users: np.ndarray, placement: AntennaPlacement, config: SystemConfig) -> np.ndarray:
    # users (K, 3) -> complex (K,) effective gains
    pts = placement.points
    r = np.linalg.norm(users[:, None, :] - pts[None, :, :], axis=2)
    if np.any(r == 0.0):
        k, m = np.argwhere(r == 0.0)[0]
        raise DegenerateGeometry(f"user {k} coincides with antenna {m}")
    ell = np.abs(config.feed_x - placement.xs)
    phase = 2.0 * np.pi * (r / config.wavelength - ell[None, :] / config.guided_wavelength)
    terms = math.sqrt(config.eta) * np.exp(-1j * phase) / r
    return terms.sum(axis=1) / math.sqrt(len(placement))


def effective_channel(user, placement: AntennaPlacement, config: SystemConfig) -> complex:
    users = np.asarray(user, dtype=float).reshape(1, 3)
    return complex(_channel_matrix(users, placement, config)[0])


def channel_state(layout: UserLayout, placement: AntennaPlacement, config: SystemConfig) -> ChannelState:
    return ChannelState(_channel_matrix(layout.positions, placement, config))


def conventional_state(layout: UserLayout, config: SystemConfig) -> ChannelState:
    """Channels from a single conventional antenna at (0, 0, d), no guided phase."""
    r = np.linalg.norm(layout.positions - np.array([0.0, 0.0, config.waveguide_height_m]), axis=1)
    return ChannelState(math.sqrt(config.eta) * np.exp(-2j * np.pi * r / config.wavelength) / r)


def decode_sinr(state: ChannelState, q: PowerAllocation, k: int, l: int, config: SystemConfig) -> float:
    """SINR at the rank-``l`` decoder for the rank-``k`` message (l >= k)."""
    if l < k:
        raise RankOrder(f"decoder rank {l} < message rank {k}")
    gl = state.sorted_powers[l]
    p = q.by_rank(state)
    interference = 0.0
    for j in range(len(p) - 1, k, -1):  # same summation order as sinr_matrix
        interference += p[j]
    return float(gl * p[k] / (gl * interference + config.noise_power_w))


def sinr_matrix(sorted_powers: np.ndarray, p_rank: np.ndarray, noise_w: float) -> np.ndarray:
    """(K, K) array, entry [l, k] = SINR_{l,k} for l >= k and +inf elsewhere."""
    g = np.asarray(sorted_powers, float)
    p = np.asarray(p_rank, float)
    tail = np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])
    s = (g[:, None] * p[None, :]) / (g[:, None] * tail[None, :] + noise_w)
    return np.where(np.tril(np.ones((len(g), len(g)), bool)), s, np.inf)


def decode_chain_sinrs(state: ChannelState, q: PowerAllocation, noise_w: float) -> np.ndarray:
    """min_{l >= k} SINR_{l,k} for every rank k (rank order)."""
    return sinr_matrix(state.sorted_powers, q.by_rank(state), noise_w).min(axis=0)


def user_rates(state: ChannelState, q: PowerAllocation, config: SystemConfig) -> np.ndarray:
    """Per-user NOMA rates in bps/Hz, indexed by user (not rank)."""
    by_rank = np.log2(1.0 + decode_chain_sinrs(state, q, config.noise_power_w))
    rates = np.empty_like(by_rank)
    rates[state.sic_order] = by_rank
    return rates


def user_rate(state: ChannelState, q: PowerAllocation, k: int, config: SystemConfig) -> float:
    """Rate of the rank-``k`` message: min over decoders l >= k."""
    return float(min(np.log2(1.0 + decode_sinr(state, q, k, l, config)) for l in range(k, len(state))))


def sum_rate(layout: UserLayout, placement: AntennaPlacement, q: PowerAllocation, config: SystemConfig) -> float:
    return float(user_rates(channel_state(layout, placement, config), q, config).sum())


def _two_antenna_power(config: SystemConfig, user, a1: float, a2: float) -> float:
    pl = AntennaPlacement([a1, a2], config.waveguide_height_m)
    return abs(effective_channel(user, pl, config)) ** 2


def channel_power_curvature(config: SystemConfig, user, a1: float, a2: float, step: float | None = None) -> float:
    """Fourth-order central-difference estimate of d^2 |g|^2 / d a1^2 for M = 2.

    Five-point stencil, default step 3e-3 wavelengths. Phases of order
    2 pi r / lam ~ 3e3 rad carry ~1e-12 rad of rounding, which a 1/h^2
    stencil amplifies; this step keeps both truncation and rounding below
    ~1e-8 of the curvature amplitude.
    """
    h = 3e-3 * config.wavelength if step is None else float(step)
    if not h > 0 or a1 + h == a1 or a1 - h == a1:
        raise NumericalStep(f"step {h!r} vanishes at a1={a1!r}")
    f = [_two_antenna_power(config, user, a1 + i * h, a2) for i in (-2, -1, 0, 1, 2)]
    return (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h)


def curvature_terms(scale, r1, dr1, d2r1, r2, delta, ddelta, d2delta):
    """Second derivative of scale*(1/r1^2 + 1/r2^2 + 2 cos(delta)/(r1 r2)).

    ``dr1``/``d2r1`` and ``ddelta``/``d2delta`` are the first and second
    derivatives of ``r1`` and ``delta`` with respect to the antenna coordinate;
    ``r2`` is held fixed.
    """
    inv_sq = 6.0 * dr1**2 / r1**4 - 2.0 * d2r1 / r1**3
    w = 1.0 / r1
    dw = -dr1 / r1**2
    d2w = 2.0 * dr1**2 / r1**3 - d2r1 / r1**2
    c, s = math.cos(delta), math.sin(delta)
    cross = -(ddelta**2 * c + d2delta * s) * w - 2.0 * ddelta * s * dw + c * d2w
    return scale * (inv_sq + 2.0 / r2 * cross)


def channel_power_curvature_exact(config: SystemConfig, user, a1: float, a2: float) -> float:
    """Closed-form d^2 |g|^2 / d a1^2 for M = 2 (valid for a1 != feed)."""
    ux, uy, _ = (float(v) for v in user)
    d = config.waveguide_height_m
    lam, lam_g = config.wavelength, config.guided_wavelength
    off2 = uy * uy + d * d
    r1 = math.sqrt((a1 - ux) ** 2 + off2)
    r2 = math.sqrt((a2 - ux) ** 2 + off2)
    dr1 = (a1 - ux) / r1
    d2r1 = off2 / r1**3
    ell1, ell2 = abs(a1 - config.feed_x), abs(a2 - config.feed_x)
    sgn = math.copysign(1.0, a1 - config.feed_x)
    delta = 2.0 * math.pi * ((r1 - r2) / lam - (ell1 - ell2) / lam_g)
    ddelta = 2.0 * math.pi * (dr1 / lam - sgn / lam_g)
    d2delta = 2.0 * math.pi * d2r1 / lam
    return curvature_terms(config.eta / 2.0, r1, dr1, d2r1, r2, delta, ddelta, d2delta)
