"""Antenna placement along the waveguide.

Stage I spreads the antennas over the user x-span and nudges each toward its
nearest user; Stage II is projected finite-difference gradient ascent on the
NOMA sum rate with a backtracking acceptance test. A grid brute-force search
serves as the reference for the relative-gap metrics.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BudgetExceeded, DegenerateObjective, Infeasible
from .model import (
    AntennaPlacement,
    ChannelState,
    PowerAllocation,
    SystemConfig,
    UserLayout,
    channel_state,
    user_rates,
)
from .power import maxmin_allocation

QSolver = Callable[[ChannelState, SystemConfig], PowerAllocation]
Objective = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class PlacementParams:
    alpha: float = 0.5
    guard_m: float = 0.0
    step: float = 0.1
    fd_delta_m: float = 1e-3
    tol: float = 1e-6
    max_iters: int = 200
    bounds: tuple[float, float] = (-5.0, 5.0)
    max_halvings: int = 20
    armijo: float = 1e-4
    step_growth: float = 2.0
    relative_tol: bool = True

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.guard_m < 0 or not self.fd_delta_m > 0 or not self.tol > 0:
            raise ValueError("need guard_m >= 0, fd_delta_m > 0, tol > 0")
        if self.bounds[1] < self.bounds[0]:
            raise ValueError("bounds must satisfy a_min <= a_max")
        object.__setattr__(self, "bounds", (float(self.bounds[0]), float(self.bounds[1])))

    @classmethod
    def for_config(cls, config: SystemConfig, **overrides) -> "PlacementParams":
        """Defaults tied to the scenario.

        Guard lam/2, finite-difference step 1e-3 lam, A = [-D1/2, D1/2].
        """
        lam = config.wavelength
        kw = dict(guard_m=lam / 2.0, fd_delta_m=1e-3 * lam,
                  bounds=(-config.region_d1_m / 2.0, config.region_d1_m / 2.0))
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)

    def check(self, M: int) -> None:
        lo, hi = self.bounds
        if hi - lo < (M - 1) * self.guard_m:
            raise Infeasible(f"interval [{lo}, {hi}] cannot hold {M} antennas at spacing {self.guard_m}")


@dataclass(frozen=True, eq=False)
class PlacementSolution:
    placement: AntennaPlacement
    sr_init: float
    sr_final: float
    iterations: int
    trace: list = field(default_factory=list)
    init: AntennaPlacement | None = None

    @property
    def delta_sr(self) -> float:
        return self.sr_final - self.sr_init


@dataclass(frozen=True, eq=False)
class BruteForceResult:
    placement: AntennaPlacement
    sum_rate: float
    evaluated: int


def project_feasible(xs, params: PlacementParams) -> np.ndarray:
    """Sort, then forward-clamp onto the spacing/bounds feasible set."""
    a = np.sort(np.asarray(xs, dtype=float).reshape(-1))
    M = len(a)
    params.check(M)
    lo, hi = params.bounds
    gap = params.guard_m
    a[0] = max(lo, min(a[0], hi - (M - 1) * gap))
    for m in range(1, M):
        lower = a[m - 1] + gap
        a[m] = max(lower, min(a[m], hi - (M - 1 - m) * gap))
        # rounding in a[m-1] + gap can leave the difference one ulp short
        while a[m] - a[m - 1] < gap:
            a[m] = math.nextafter(a[m], math.inf)
    if a[-1] > hi:
        # ulp nudges overshot the upper bound: sweep back down from it
        a[-1] = hi
        for m in range(M - 2, -1, -1):
            a[m] = min(a[m], a[m + 1] - gap)
            while a[m + 1] - a[m] < gap:
                a[m] = math.nextafter(a[m], -math.inf)
    return a


def is_feasible(xs, params: PlacementParams) -> bool:
    a = np.asarray(xs, dtype=float)
    lo, hi = params.bounds
    return bool(np.all(a >= lo) and np.all(a <= hi) and np.all(np.diff(a) >= params.guard_m))


def init_placement(layout: UserLayout, M: int, params: PlacementParams) -> np.ndarray:
    """Stage I: even spread over the user x-span, nudged toward nearest users."""
    if M < 1 or len(layout) < 1:
        raise ValueError("need M >= 1 and K >= 1")
    x = layout.x
    x_min, x_max = float(x.min()), float(x.max())
    if M == 1:
        return project_feasible([(x_min + x_max) / 2.0], params)
    if x_max == x_min:
        # all users share one x: fan out symmetrically around it
        a = x_min + (np.arange(M) - (M - 1) / 2.0) * params.guard_m
        return project_feasible(a, params)
    a = x_min + np.arange(M) / (M - 1) * (x_max - x_min)
    nearest = np.argmin(np.abs(x[None, :] - a[:, None]), axis=1)
    a = (1.0 - params.alpha) * a + params.alpha * x[nearest]
    return project_feasible(a, params)


def maxmin_q(state: ChannelState, config: SystemConfig) -> PowerAllocation:
    return maxmin_allocation(state, config.total_power_w, config.noise_power_w)


def sum_rate_objective(layout: UserLayout, config: SystemConfig, q_solver: QSolver | None = None) -> Objective:
    """SR(a) with power re-optimised by ``q_solver`` at every evaluation."""
    solver = maxmin_q if q_solver is None else q_solver
    height = config.waveguide_height_m

    def objective(xs) -> float:
        state = channel_state(layout, AntennaPlacement(xs, height), config)
        return float(user_rates(state, solver(state, config), config).sum())

    return objective


def fd_gradient(objective: Objective, xs, delta: float, params: PlacementParams | None = None,
                f0: float | None = None) -> np.ndarray:
    """Forward-difference gradient; perturbed points are projected when ``params`` is given."""
    a = np.asarray(xs, dtype=float)
    base = objective(a) if f0 is None else f0
    grad = np.empty(len(a))
    for m in range(len(a)):
        pert = a.copy()
        pert[m] += delta
        if params is not None:
            pert = project_feasible(pert, params)
        grad[m] = (objective(pert) - base) / delta
    return grad


def refine_placement(layout: UserLayout, config: SystemConfig, params: PlacementParams,
                     q_solver: QSolver | None = None, objective: Objective | None = None,
                     M: int | None = None) -> PlacementSolution:
    """Run Stage I, then projected finite-difference gradient ascent.

    The first trial step moves the most-sensitive antenna by ``params.step``
    metres; later iterations start from ``step_growth`` times the last
    accepted step. A trial is accepted only if SR increases by at least
    ``armijo`` times the first-order prediction (strict increase when
    ``armijo == 0``); otherwise the step is halved, at most
    ``max_halvings`` times. Iteration stops when an accepted gain falls
    below ``tol`` (relative to SR when ``relative_tol``), when no step is
    accepted, or after ``max_iters`` iterations. The SR trace is therefore
    non-decreasing.
    """
    M = config.antennas if M is None else M
    f = objective if objective is not None else sum_rate_objective(layout, config, q_solver)
    a0 = init_placement(layout, M, params)
    a, sr = a0, f(a0)
    sr_init = sr
    trace = [sr]
    scale = None
    it = 0
    while it < params.max_iters:
        grad = fd_gradient(f, a, params.fd_delta_m, params, f0=sr)
        it += 1
        if not np.any(grad):
            break
        if scale is None:
            scale = params.step / float(np.max(np.abs(grad)))
        cand, sr_cand = None, -math.inf
        for _ in range(params.max_halvings + 1):
            trial = project_feasible(a + scale * grad, params)
            sr_trial = f(trial)
            if sr_trial > sr and sr_trial >= sr + params.armijo * float(grad @ (trial - a)):
                cand, sr_cand = trial, sr_trial
                break
            scale *= 0.5
        if cand is None:
            break
        gain = sr_cand - sr
        a, sr = cand, sr_cand
        trace.append(sr)
        scale *= params.step_growth
        if gain < params.tol * (abs(sr) if params.relative_tol else 1.0):
            break
    h = config.waveguide_height_m
    return PlacementSolution(AntennaPlacement(a, h), sr_init, sr, it, trace, AntennaPlacement(a0, h))


def brute_force_placement(layout: UserLayout, config: SystemConfig, M: int, grid_points: int,
                          params: PlacementParams, q_solver: QSolver | None = None,
                          budget: int = 10**7, objective: Objective | None = None,
                          reverse: bool = False) -> BruteForceResult:
    """Exhaustive search over increasing M-subsets of a uniform grid on A.

    Ties go to the lexicographically smallest index tuple. ``reverse=True``
    walks the candidates in the opposite order (same answer, used for
    cross-checking).
    """
    G = int(grid_points)
    if G ** M > budget:
        raise BudgetExceeded(f"G^M = {G}^{M} exceeds budget {budget}")
    params.check(M)
    f = objective if objective is not None else sum_rate_objective(layout, config, q_solver)
    lo, hi = params.bounds
    grid = np.linspace(lo, hi, G) if G > 1 else np.array([(lo + hi) / 2.0])
    combos = itertools.combinations(range(G), M)
    if reverse:
        combos = reversed(list(combos))
    best_idx, best_sr, n = None, -math.inf, 0
    for idx in combos:
        xs = grid[list(idx)]
        if M > 1 and np.any(np.diff(xs) < params.guard_m):
            continue
        sr = f(xs)
        n += 1
        if sr > best_sr or (sr == best_sr and (best_idx is None or idx < best_idx)):
            best_idx, best_sr = idx, sr
    if best_idx is None:
        raise Infeasible("no grid combination satisfies the guard spacing")
    return BruteForceResult(AntennaPlacement(grid[list(best_idx)], config.waveguide_height_m), best_sr, n)


def relative_gap(sr_bf: float, sr_it: float) -> float:
    if not sr_bf > 0:
        raise DegenerateObjective(f"brute-force sum rate {sr_bf!r} is not positive")
    return 1.0 - sr_it / sr_bf


def mrg_xrg(gaps) -> tuple[float, float]:
    g = np.asarray(list(gaps), dtype=float)
    if g.size == 0:
        raise ValueError("no gaps")
    return float(g.mean()), float(g.max())
