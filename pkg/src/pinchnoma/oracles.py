"""Independent reference computations for cross-checking the fast paths.

Each function here reaches its answer by a different route than the
production code: a generic LP solver, a scalar root-find, explicit loops or
arbitrary-precision arithmetic.
"""
from __future__ import annotations

import math

import mpmath
import numpy as np
from scipy.optimize import brentq, linprog

from .model import ChannelState, SystemConfig
from .neural.cnn import CnnModel, backward, forward, mae_grad, mae_loss


def lp_min_power(state: ChannelState, t: float, P: float, noise_w: float) -> np.ndarray | None:
    """Least total power meeting every SINR_{l,k} >= t, via a generic LP.

    Variables are fractions x = q / P. Every (l >= k) constraint is kept,
    not just the diagonal. Returns q in user order, or None if infeasible.
    """
    g = state.sorted_powers
    K = len(g)
    rows, rhs = [], []
    for k in range(K):
        for l in range(k, K):
            a = np.zeros(K)
            a[k] = -1.0
            a[k + 1:] = t
            rows.append(a)
            rhs.append(-t * noise_w / (g[l] * P))
    opts = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
    res = linprog(np.ones(K), A_ub=np.array(rows), b_ub=np.array(rhs), bounds=[(0, None)] * K,
                  method="highs-ds", options=opts)
    if res.status != 0 or res.x.sum() > 1.0 + 1e-9:
        return None
    x = _refine_vertex(np.array(rows), np.array(rhs), res.x)
    q = np.empty(K)
    q[state.sic_order] = x * P
    return q


def _refine_vertex(A, b, x):
    # The solver stops at its feasibility tolerance (~1e-10). Re-solve the K
    # tightest constraints (rows of A or bounds x >= 0) exactly to recover
    # the vertex at working precision.
    K = len(x)
    full_A = np.vstack([A, -np.eye(K)])
    full_b = np.concatenate([b, np.zeros(K)])
    scale = np.abs(full_A) @ np.abs(x) + np.abs(full_b) + 1e-300
    slack = (full_b - full_A @ x) / scale
    basis = np.argsort(slack, kind="stable")[:K]
    try:
        sol = np.linalg.solve(full_A[basis], full_b[basis])
    except np.linalg.LinAlgError:
        return x
    if np.all(full_A @ sol <= full_b + 1e-12 * scale):
        return sol
    return x


def lp_maxmin_level(state: ChannelState, P: float, noise_w: float, tol: float = 1e-12) -> float:
    """Largest t with a feasible LP, by bisection on the LP oracle."""
    lo, hi = 0.0, P * float(state.sorted_powers.min()) / noise_w
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if lp_min_power(state, mid, P, noise_w) is None:
            hi = mid
        else:
            lo = mid
    return lo


def simplex_project_root(q_hat, P: float) -> np.ndarray:
    """Projection onto {q >= 0, sum q = P} by root-finding the KKT threshold."""
    v = np.asarray(q_hat, float)
    f = lambda th: np.maximum(v - th, 0.0).sum() - P
    lo, hi = v.min() - P / len(v) - 1.0, v.max()
    th = brentq(f, lo, hi, xtol=1e-15 * max(1.0, abs(hi)), rtol=4 * np.finfo(float).eps, maxiter=500)
    return np.maximum(v - th, 0.0)


def naive_conv2d_same(x, w, b) -> np.ndarray:
    """Explicit-loop cross-correlation, padding one row/col at the bottom/right."""
    H, W, C = x.shape
    kh, kw, _, F = w.shape
    out = np.zeros((H, W, F))
    for i in range(H):
        for j in range(W):
            for f in range(F):
                acc = b[f]
                for di in range(kh):
                    for dj in range(kw):
                        ii, jj = i + di - (kh - 1) // 2, j + dj - (kw - 1) // 2
                        if 0 <= ii < H and 0 <= jj < W:
                            for c in range(C):
                                acc += x[ii, jj, c] * w[di, dj, c, f]
                out[i, j, f] = acc
    return out


def freespace_mp(user, antenna, config: SystemConfig, dps: int = 50) -> complex:
    """sqrt(eta) exp(-j 2 pi r / lam) / r at ``dps`` decimal digits."""
    with mpmath.workdps(dps):
        u = [mpmath.mpf(float(c)) for c in user]
        a = [mpmath.mpf(float(c)) for c in antenna]
        r = mpmath.sqrt(sum((p - q) ** 2 for p, q in zip(a, u)))
        c = mpmath.mpf(299_792_458)
        lam = c / mpmath.mpf(config.carrier_freq_hz)
        amp = c / (4 * mpmath.pi * mpmath.mpf(config.carrier_freq_hz))
        val = amp * mpmath.expj(-2 * mpmath.pi * r / lam) / r
        return complex(val)


def gradient_check(model: CnnModel, x, target, h: float = 1e-5, floor: float = 1e-6,
                   grads: dict | None = None) -> dict:
    """Max relative error per parameter tensor, backprop vs central differences.

    Dropout is off (inference mode) so the loss is a deterministic function
    of the weights. ``grads`` substitutes externally supplied gradients.
    Denominators are floored at ``floor``: the central difference carries
    roundoff of order eps*|L|/h (about 2e-11 here), so gradients below the
    floor are in effect compared on an absolute scale.
    """
    x = np.asarray(x, float)
    target = np.asarray(target, float)
    if grads is None:
        pred, cache = forward(model, x, return_cache=True)
        grads = backward(model, cache, mae_grad(pred, target))
    worst = {}
    for name, w in model.params.items():
        num = np.empty_like(w)
        flat, nflat = w.reshape(-1), num.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = mae_loss(forward(model, x), target)
            flat[i] = keep - h
            down = mae_loss(forward(model, x), target)
            flat[i] = keep
            nflat[i] = (up - down) / (2 * h)
        denom = np.maximum(np.maximum(np.abs(num), np.abs(grads[name])), floor)
        worst[name] = float(np.max(np.abs(num - grads[name]) / denom))
    return worst


def outage_dominates(a, b) -> bool:
    """True if curve ``a`` is pointwise <= curve ``b``."""
    return bool(np.all(np.asarray(a) <= np.asarray(b)))


def rate_closed_form_k2_equal(P: float, gamma: float, noise_w: float) -> tuple[float, np.ndarray]:
    """K = 2 equal gains: t = -1 + sqrt(1 + P gamma / sigma^2), q2 = t sigma^2 / gamma."""
    t = -1.0 + math.sqrt(1.0 + P * gamma / noise_w)
    q2 = t * noise_w / gamma
    return t, np.array([P - q2, q2])
