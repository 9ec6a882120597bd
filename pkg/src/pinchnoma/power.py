"""Max-min power allocation by bisection, simplex projection, fixed-power NOMA."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChannel, Infeasible
from .model import ChannelState, PowerAllocation, decode_chain_sinrs

DEFAULT_ZETA = 1e-6


@dataclass(frozen=True, eq=False)
class MaxMinResult:
    q_opt: PowerAllocation
    t_opt: float
    iterations: int
    achieved_sinrs: np.ndarray  # decode-chain min SINR per SIC rank


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    q_proj: PowerAllocation
    theta: float
    rho: int


def _inverse_snr(state: ChannelState, noise_w: float) -> list[float]:
    g = state.sorted_powers
    if np.any(g == 0.0):
        raise DegenerateChannel("zero channel gain")
    return [noise_w / float(x) for x in g]


def _recursion(t: float, inv: list[float]) -> list[float]:
    # Minimal powers (rank order) with SINR_{k,k} = t for every rank k.
    K = len(inv)
    q = [0.0] * K
    tail = 0.0
    for k in range(K - 1, -1, -1):
        q[k] = t * (tail + inv[k])
        tail += q[k]
    return q


def _total_and_slope(t: float, inv: list[float]) -> tuple[float, float]:
    s = ds = 0.0
    for k in range(len(inv) - 1, -1, -1):
        s, ds = s * (1.0 + t) + t * inv[k], ds * (1.0 + t) + s + inv[k]
    return s, ds


def _to_allocation(q_rank, state: ChannelState, budget_w: float) -> PowerAllocation:
    q = np.empty(len(state))
    q[state.sic_order] = q_rank
    return PowerAllocation(q, budget_w)


def feasibility_min_power(state: ChannelState, t: float, P: float, noise_w: float) -> PowerAllocation:
    """Least-total-power allocation meeting SINR_{l,k} >= t for all l >= k.

    Under the ascending-gain SIC order the tightest decoder for message k is
    l = k, so the constraint set collapses to a backward recursion over ranks.
    Raises Infeasible when the minimum total exceeds P.
    """
    if t < 0:
        raise ValueError("SINR target must be >= 0")
    q_rank = _recursion(float(t), _inverse_snr(state, noise_w))
    if sum(q_rank) > P:
        raise Infeasible(f"target {t:.6g} needs {sum(q_rank):.6g} W > budget {P:.6g} W")
    return _to_allocation(q_rank, state, P)


def maxmin_power(state: ChannelState, P: float, noise_w: float, zeta: float = DEFAULT_ZETA) -> MaxMinResult:
    """Maximise the minimum decode-chain SINR subject to sum(q) <= P.

    Bisection on the common SINR level t over [0, min_k |g_k|^2 P / sigma^2]
    until the bracket is within ``zeta`` relative. The bracket is then
    closed with Newton steps on the (convex, increasing) minimum-total-power
    curve so that the budget binds to machine precision.
    """
    if not zeta > 0:
        raise ValueError("zeta must be > 0")
    inv = _inverse_snr(state, noise_w)
    t_lo, t_hi = 0.0, P / max(inv)
    iterations = 0
    while t_hi - t_lo > zeta * t_hi:
        t = 0.5 * (t_lo + t_hi)
        if sum(_recursion(t, inv)) <= P:
            t_lo = t
        else:
            t_hi = t
        iterations += 1

    # Newton from the right on a convex increasing curve never undershoots.
    t = t_hi
    for _ in range(60):
        s, ds = _total_and_slope(t, inv)
        step = (s - P) / ds
        t_new = min(max(t - step, t_lo), t_hi)
        if t_new == t or abs(s - P) <= 4 * np.finfo(float).eps * P:
            break
        t = t_new
    q_rank = _recursion(t, inv)
    total = math.fsum(q_rank)
    if total > P:
        q_rank = [x * (P / total) for x in q_rank]
    q = _to_allocation(q_rank, state, P)
    sinrs = decode_chain_sinrs(state, q, noise_w)
    return MaxMinResult(q, float(sinrs.min()), iterations, sinrs)


def maxmin_allocation(state: ChannelState, P: float, noise_w: float, zeta: float = DEFAULT_ZETA) -> PowerAllocation:
    return maxmin_power(state, P, noise_w, zeta).q_opt


def simplex_project(q_hat, P: float) -> ProjectionResult:
    """Euclidean projection onto {q >= 0, sum(q) = P}, applied only when needed.

    A vector that is already nonnegative with sum <= P is returned unchanged
    (theta = 0, rho = K).
    """
    v = np.array(q_hat, dtype=float).reshape(-1)
    K = len(v)
    if K == 0 or not P > 0:
        raise ValueError("need K >= 1 and P > 0")
    if np.all(v >= 0) and v.sum() <= P:
        return ProjectionResult(PowerAllocation(v, P), 0.0, K)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, K + 1)
    rho = int(j[u + (P - css) / j > 0][-1])
    theta = float((css[rho - 1] - P) / rho)
    q = np.maximum(v - theta, 0.0)
    # rounding can overshoot the budget by an ulp; shave it off the largest entry
    i = int(np.argmax(q))
    while q.sum() > P:
        q[i] = max(np.nextafter(q[i], 0.0), q[i] - (q.sum() - P))
    return ProjectionResult(PowerAllocation(q, P), theta, rho)


def fixed_power_coeffs(K: int, P: float, state: ChannelState, coeffs=None) -> PowerAllocation:
    """Fixed NOMA shares P * 2^(K-1-r) / (2^K - 1) for SIC rank r.

    ``coeffs`` overrides the per-rank fractions (weakest first).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if coeffs is None:
        w = 2.0 ** np.arange(K - 1, -1, -1) / (2.0**K - 1.0)
    else:
        w = np.asarray(coeffs, dtype=float)
        if w.shape != (K,):
            raise ValueError(f"expected {K} coefficients, got {w.shape}")
    return _to_allocation(P * w, state, P)
