"""Oracle suites behind ``pinchnoma validate``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracles
from .model import ChannelState, SystemConfig, channel_power_curvature, channel_power_curvature_exact, freespace_coefficient
from .neural.cnn import backward, conv2d_same, forward, init_model, mae_grad
from .neural.data import sample_layout
from .placement import PlacementParams, brute_force_placement, mrg_xrg, refine_placement, relative_gap
from .power import feasibility_min_power, maxmin_power, simplex_project


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: int
    total: int
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.passed == self.total


def _random_state(rng, K):
    g = (rng.standard_normal(K) + 1j * rng.standard_normal(K)) * 10 ** rng.uniform(-5, -3)
    return ChannelState(g)


def suite_lp(rng, n=100) -> SuiteResult:
    ok, worst = 0, 0.0
    for _ in range(n):
        st = _random_state(rng, int(rng.integers(1, 7)))
        P, s2 = 10 ** rng.uniform(-12, -8), 1e-12
        t = maxmin_power(st, P, s2).t_opt * (1 - 1e-7)
        q = feasibility_min_power(st, t, P, s2).q
        ql = oracles.lp_min_power(st, t, P, s2)
        err = np.inf if ql is None else float(np.max(np.abs(q - ql)) / q.sum())
        worst = max(worst, err)
        ok += err <= 1e-9
    return SuiteResult("lp-vs-recursion", ok, n, f"worst rel {worst:.3g}")


def suite_projection(rng, n=200) -> SuiteResult:
    ok = 0
    for _ in range(n):
        K = int(rng.integers(1, 7))
        P = float(rng.uniform(0.1, 10))
        v = rng.normal(0, P, K)
        got = simplex_project(v, P).q_proj.q
        if np.all(v >= 0) and v.sum() <= P:
            ref = v
        else:
            ref = oracles.simplex_project_root(v, P)
        ok += bool(np.max(np.abs(got - ref)) <= 1e-9 * P)
    return SuiteResult("projection-qp", ok, n)


def suite_conv(rng, n=5) -> SuiteResult:
    ok = 0
    for _ in range(n):
        x = rng.standard_normal((int(rng.integers(1, 6)), 2, 3))
        w, b = rng.standard_normal((2, 2, 3, 5)), rng.standard_normal(5)
        ok += bool(np.max(np.abs(conv2d_same(x, w, b) - oracles.naive_conv2d_same(x, w, b))) <= 1e-12)
    return SuiteResult("conv-naive", ok, n)


def gradient_fixture(seed: int = 0, margin: float = 1e-4):
    """K=4 micro-model with an odd batch (no bias gradient is an exact zero).

    Draws are repeated until every ReLU pre-activation and every residual
    sits at least ``margin`` from its kink, so the central-difference
    stencil never straddles a point of non-differentiability.
    """
    rng = np.random.default_rng(seed)
    while True:
        model = init_model(4, rng)
        for k in model.params:
            model.params[k] = model.params[k] + 0.1 * rng.standard_normal(model.params[k].shape)
        x, y = rng.standard_normal((5, 4, 2)), rng.standard_normal((5, 4))
        pred, cache = forward(model, x, return_cache=True)
        kinks = min(float(np.min(np.abs(cache[z]))) for z in ("z1", "z2", "z3", "z4"))
        if kinks >= margin and float(np.min(np.abs(pred - y))) >= margin:
            return model, x, y


def suite_gradcheck(inject_fault: bool = False) -> SuiteResult:
    model, x, y = gradient_fixture()
    pred, cache = forward(model, x, return_cache=True)
    grads = backward(model, cache, mae_grad(pred, y))
    if inject_fault:
        model.params["conv1.w"][0, 0, 0, 0] += 0.05
    errs = oracles.gradient_check(model, x, y, grads=grads)
    ok = sum(e <= 1e-4 for e in errs.values())
    return SuiteResult("gradient-check", ok, len(errs), f"worst rel {max(errs.values()):.3g}")


def suite_curvature(rng, n=20) -> SuiteResult:
    cfg = SystemConfig()
    ok, signs = 0, set()
    for _ in range(n):
        user = (rng.uniform(-5, 5), rng.uniform(-5, 5), 0.0)
        a1, a2 = rng.uniform(-4.9, 5), rng.uniform(-5, 5)
        fd = channel_power_curvature(cfg, user, a1, a2)
        ex = channel_power_curvature_exact(cfg, user, a1, a2)
        ok += bool(abs(fd - ex) <= 1e-4 * abs(ex))
    user = (0.3, 1.2, 0.0)
    for a1 in np.linspace(-1.0, 1.0, 201):
        signs.add(np.sign(channel_power_curvature_exact(cfg, user, float(a1), 2.0)))
    both = {-1.0, 1.0} <= signs
    return SuiteResult("curvature", ok + both, n + 1, "both signs" if both else "single sign")


def suite_freespace(rng, n=20) -> SuiteResult:
    cfg = SystemConfig()
    ok = 0
    for _ in range(n):
        u = (rng.uniform(-5, 5), rng.uniform(-5, 5), 0.0)
        a = (rng.uniform(-5, 5), 0.0, 3.0)
        ref = oracles.freespace_mp(u, a, cfg)
        ok += bool(abs(freespace_coefficient(u, a, cfg) - ref) <= 1e-9 * abs(ref))
    return SuiteResult("freespace-mp", ok, n)


def suite_bruteforce(rng, n=5) -> SuiteResult:
    cfg = SystemConfig(antennas=2, users=2)
    params = PlacementParams.for_config(cfg)
    gaps = []
    for _ in range(n):
        layout = sample_layout(cfg, rng)
        it = refine_placement(layout, cfg, params).sr_final
        bf = brute_force_placement(layout, cfg, 2, 12, params).sum_rate
        gaps.append(relative_gap(bf, it))
    mrg, xrg = mrg_xrg(gaps)
    return SuiteResult("bruteforce-mrg", int(mrg <= 0.05), 1, f"MRG {mrg:.4f} XRG {xrg:.4f}")


def run_validation(seed: int = 0, inject_fault: bool = False) -> list[SuiteResult]:
    rng = np.random.default_rng(seed)
    return [
        suite_lp(rng), suite_projection(rng), suite_conv(rng), suite_gradcheck(inject_fault),
        suite_curvature(rng), suite_freespace(rng), suite_bruteforce(rng),
    ]
