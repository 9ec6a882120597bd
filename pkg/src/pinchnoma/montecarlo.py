"""Seeded Monte-Carlo harness: schemes, sweeps, outage, alpha study, gap tables.

Every trial draws one user layout and evaluates all requested schemes on it,
so scheme comparisons are paired. Per-trial seeds come from a SplitMix64
chain over ``(base_seed, sweep_index, trial_index)``.
"""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, EmptyData, PinchError
from .model import (
    AntennaPlacement,
    ChannelState,
    SystemConfig,
    UserLayout,
    channel_state,
    conventional_state,
    user_rates,
)
from .neural.cnn import CnnModel
from .neural.data import sample_layout
from .neural.train import infer_allocation
from .placement import (
    PlacementParams,
    brute_force_placement,
    mrg_xrg,
    refine_placement,
    relative_gap,
)
from .power import fixed_power_coeffs, maxmin_allocation

SCHEMES = ("CNN-NOMA", "C-NOMA", "FPA-NOMA", "PA-OMA", "C-OMA")
SWEEP_VARS = ("M", "K", "snr_db", "D1", "target_rate", "alpha")
MAX_RESAMPLES = 100
RESULTS_HEADER = ("scheme", "sweep_var", "sweep_value", "trial", "seed",
                  "sum_rate_bpshz", "min_rate_bpshz", "outage", "wall_ms")

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def trial_seed(base_seed: int, sweep_index: int, trial_index: int) -> int:
    """mix(mix(mix(base) ^ sweep) ^ trial), all in 64-bit arithmetic."""
    s = splitmix64(base_seed & _MASK64)
    s = splitmix64(s ^ (sweep_index & _MASK64))
    return splitmix64(s ^ (trial_index & _MASK64))


@dataclass(frozen=True, eq=False)
class SchemeOutcome:
    rates: np.ndarray   # bps/Hz, user-index order
    powers: np.ndarray  # |g|^2 seen by each user under this scheme

    @property
    def sum_rate(self) -> float:
        return float(self.rates.sum())

    @property
    def far_rate(self) -> float:
        """Rate of the user with the weakest effective gain."""
        return float(self.rates[int(np.argmin(self.powers))])


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    schemes: tuple = SCHEMES
    sweep_var: str = "snr_db"
    sweep_values: tuple = (10.0,)
    trials: int = 100
    base_seed: int = 0
    config: SystemConfig = field(default_factory=SystemConfig)
    params: PlacementParams | None = None
    models: dict = field(default_factory=dict)  # K -> CnnModel
    target_rate: float | None = None

    def __post_init__(self):
        if not self.schemes:
            raise ConfigError("scheme list is empty")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"unknown scheme(s) {bad}; choose from {SCHEMES}")
        if self.sweep_var not in SWEEP_VARS:
            raise ConfigError(f"sweep_var must be one of {SWEEP_VARS}")
        if self.trials < 1 or len(self.sweep_values) == 0:
            raise ConfigError("need trials >= 1 and at least one sweep value")

    def point(self, value) -> tuple[SystemConfig, PlacementParams, float | None]:
        """Scenario, placement parameters and outage target at one sweep value."""
        cfg, target, alpha = self.config, self.target_rate, None
        v = self.sweep_var
        if v == "M":
            cfg = cfg.replace(antennas=int(value))
        elif v == "K":
            cfg = cfg.replace(users=int(value))
        elif v == "snr_db":
            cfg = cfg.with_snr_db(float(value))
        elif v == "D1":
            cfg = cfg.replace(region_d1_m=float(value))
        elif v == "target_rate":
            target = float(value)
        elif v == "alpha":
            alpha = float(value)
        if self.params is None:
            params = PlacementParams.for_config(cfg, alpha=alpha)
        elif v == "D1":
            # bounds follow the region; everything else is kept
            params = replace(self.params, bounds=(-cfg.region_d1_m / 2.0, cfg.region_d1_m / 2.0))
        else:
            params = self.params if alpha is None else replace(self.params, alpha=alpha)
        return cfg, params, target


@dataclass(frozen=True, eq=False)
class MetricsRecord:
    scheme: str
    sweep_var: str
    sweep_value: float
    trial: int
    seed: int
    rates: tuple = ()
    sum_rate: float = math.nan
    min_rate: float = math.nan
    far_rate: float = math.nan
    outage: float = math.nan  # 1.0 / 0.0 against the target, nan without one
    wall_ms: float = 0.0
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


def _pa_oma(layout: UserLayout, config: SystemConfig, params: PlacementParams) -> SchemeOutcome:
    # one antenna moved above each served user in turn, full power per 1/K slot
    lo, hi = params.bounds
    xs = np.clip(layout.x, lo, hi)
    pos = layout.positions
    r2 = (pos[:, 0] - xs) ** 2 + pos[:, 1] ** 2 + config.waveguide_height_m**2
    g2 = config.eta / r2
    K = len(layout)
    rates = np.log2(1.0 + config.total_power_w * g2 / config.noise_power_w) / K
    return SchemeOutcome(rates, g2)


def _c_oma(layout: UserLayout, config: SystemConfig) -> SchemeOutcome:
    g2 = conventional_state(layout, config).powers
    rates = np.log2(1.0 + config.total_power_w * g2 / config.noise_power_w) / len(layout)
    return SchemeOutcome(rates, g2)


def scheme_rate(scheme: str, layout: UserLayout, config: SystemConfig, params: PlacementParams,
                model: CnnModel | None = None, placement: AntennaPlacement | None = None) -> SchemeOutcome:
    """Per-user rates of one scheme on one layout.

    ``placement`` lets paired schemes share a single Stage I+II run.
    """
    P, s2 = config.total_power_w, config.noise_power_w
    if scheme in ("CNN-NOMA", "FPA-NOMA"):
        if scheme == "CNN-NOMA" and model is None:
            raise ConfigError("CNN-NOMA needs a trained model")
        if placement is None:
            placement = refine_placement(layout, config, params).placement
        state = channel_state(layout, placement, config)
        if scheme == "CNN-NOMA":
            q = infer_allocation(model, state, P)
        else:
            q = fixed_power_coeffs(len(layout), P, state)
        return SchemeOutcome(user_rates(state, q, config), state.powers)
    if scheme == "C-NOMA":
        state = conventional_state(layout, config)
        return SchemeOutcome(user_rates(state, maxmin_allocation(state, P, s2), config), state.powers)
    if scheme == "PA-OMA":
        return _pa_oma(layout, config, params)
    if scheme == "C-OMA":
        return _c_oma(layout, config)
    raise ConfigError(f"unknown scheme {scheme!r}")


def _run_trial(spec: ExperimentSpec, sweep_index: int, trial: int, timing: bool) -> list[MetricsRecord]:
    value = spec.sweep_values[sweep_index]
    cfg, params, target = spec.point(value)
    seed = trial_seed(spec.base_seed, sweep_index, trial)
    rng = np.random.default_rng(seed)
    model = spec.models.get(cfg.users)
    base = dict(sweep_var=spec.sweep_var, sweep_value=float(value), trial=trial, seed=seed)
    outcomes, errors, clock = {}, {}, {}
    for attempt in range(MAX_RESAMPLES + 1):
        layout = sample_layout(cfg, rng)
        outcomes.clear(), errors.clear(), clock.clear()
        try:
            shared = None
            for s in spec.schemes:
                t0 = time.perf_counter()
                if s in ("CNN-NOMA", "FPA-NOMA") and shared is None:
                    shared = refine_placement(layout, cfg, params).placement
                try:
                    outcomes[s] = scheme_rate(s, layout, cfg, params, model, shared)
                except ConfigError as exc:
                    errors[s] = str(exc)
                clock[s] = (time.perf_counter() - t0) * 1e3
            break
        except PinchError as exc:
            if attempt == MAX_RESAMPLES:
                errors = {s: f"{type(exc).__name__}: {exc}" for s in spec.schemes}
    out = []
    for s in spec.schemes:
        wall = round(clock.get(s, 0.0), 3) if timing else 0.0
        if s in errors:
            out.append(MetricsRecord(s, error=errors[s], wall_ms=wall, **base))
            continue
        o = outcomes[s]
        outage = math.nan if target is None else float(o.far_rate < target)
        out.append(MetricsRecord(s, rates=tuple(float(r) for r in o.rates), sum_rate=o.sum_rate,
                                 min_rate=float(o.rates.min()), far_rate=o.far_rate, outage=outage,
                                 wall_ms=wall, **base))
    return out


def _run_task(args):
    return _run_trial(*args)


def run_experiment(spec: ExperimentSpec, workers: int = 1, timing: bool = False) -> list[MetricsRecord]:
    """All (sweep value, trial) cells, reduced in (sweep, trial, scheme) order.

    ``wall_ms`` is recorded only with ``timing=True`` so that reruns stay
    bit-identical.
    """
    tasks = [(spec, i, t, timing) for i in range(len(spec.sweep_values)) for t in range(spec.trials)]
    if workers <= 1:
        chunks = map(_run_task, tasks)
        return [r for chunk in chunks for r in chunk]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [r for chunk in pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers)))
                for r in chunk]


def outage_curve(spec: ExperimentSpec, targets, workers: int = 1) -> dict:
    """Far-user outage probability per scheme at each target rate.

    Trials are drawn once (sweep index 0 of ``spec``) and scored against
    every target, so the curve for each scheme is monotone in the target.
    """
    targets = np.asarray(targets, float)
    single = replace(spec, sweep_values=(spec.sweep_values[0],))
    records = [r for r in run_experiment(single, workers) if not r.failed]
    curves = {}
    for s in spec.schemes:
        far = np.array([r.far_rate for r in records if r.scheme == s])
        if far.size == 0:
            curves[s] = np.full(len(targets), math.nan)
        else:
            curves[s] = (far[None, :] < targets[:, None]).mean(axis=1)
    return {"targets": targets, "outage": curves, "records": records}


@dataclass(frozen=True)
class BoxplotStats:
    median: float
    q1: float
    q3: float
    iqr: float
    whisker_lo: float
    whisker_hi: float
    outliers: tuple = ()


def boxplot_stats(samples) -> BoxplotStats:
    """Quartiles by linear interpolation between closest ranks; 1.5 IQR fences."""
    x = np.sort(np.asarray(list(samples), dtype=float))
    if x.size == 0:
        raise EmptyData("no samples")
    q1, med, q3 = (float(v) for v in np.percentile(x, [25, 50, 75], method="linear"))
    iqr = q3 - q1
    lo_f, hi_f = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = x[(x >= lo_f) & (x <= hi_f)]
    outliers = tuple(float(v) for v in x[(x < lo_f) | (x > hi_f)])
    return BoxplotStats(med, q1, q3, iqr, float(inside.min()), float(inside.max()), outliers)


@dataclass(frozen=True, eq=False)
class AlphaStudy:
    alphas: tuple
    samples: dict  # alpha -> ndarray of delta-SR
    stats: dict    # alpha -> BoxplotStats
    seeds: tuple


def alpha_study(config: SystemConfig, alphas, layouts: int, base_seed: int = 0,
                params: PlacementParams | None = None) -> AlphaStudy:
    """Stage II gain over Stage I for each alpha on a common set of layouts."""
    if layouts < 2:
        raise ValueError("need at least 2 layouts")
    base = PlacementParams.for_config(config) if params is None else params
    seeds = tuple(trial_seed(base_seed, 0, t) for t in range(layouts))
    drawn = [sample_layout(config, np.random.default_rng(s)) for s in seeds]
    samples, stats = {}, {}
    for a in alphas:
        p = replace(base, alpha=float(a))
        d = np.array([refine_placement(lay, config, p).delta_sr for lay in drawn])
        samples[float(a)] = d
        stats[float(a)] = boxplot_stats(d)
    return AlphaStudy(tuple(float(a) for a in alphas), samples, stats, seeds)


@dataclass(frozen=True)
class Table1Cell:
    K: int
    snr_db: float
    sr_iterative: float
    sr_brute_force: float
    mrg: float
    xrg: float
    trials: int


def table1_validation(Ks=(3, 4), snrs=(10.0, 20.0), trials: int = 30, grid_points: int = 12,
                      base_seed: int = 0, config: SystemConfig | None = None,
                      params: PlacementParams | None = None, budget: int = 10**7) -> list[Table1Cell]:
    """Iterative placement versus grid brute force with M = K."""
    base = SystemConfig() if config is None else config
    cells = []
    for i, (K, snr) in enumerate((K, s) for K in Ks for s in snrs):
        cfg = base.replace(users=int(K), antennas=int(K)).with_snr_db(float(snr))
        p = PlacementParams.for_config(cfg) if params is None else params
        sr_it, sr_bf, gaps = [], [], []
        for t in range(trials):
            layout = sample_layout(cfg, np.random.default_rng(trial_seed(base_seed, i, t)))
            it = refine_placement(layout, cfg, p).sr_final
            bf = brute_force_placement(layout, cfg, int(K), grid_points, p, budget=budget).sum_rate
            sr_it.append(it)
            sr_bf.append(bf)
            gaps.append(relative_gap(bf, it))
        mrg, xrg = mrg_xrg(gaps)
        cells.append(Table1Cell(int(K), float(snr), float(np.mean(sr_it)), float(np.mean(sr_bf)), mrg, xrg, trials))
    return cells


def _fmt(v) -> str:
    return repr(float(v))


def write_results_csv(path, records: list[MetricsRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULTS_HEADER)
        for r in records:
            w.writerow([r.scheme, r.sweep_var, _fmt(r.sweep_value), r.trial, r.seed, _fmt(r.sum_rate),
                        _fmt(r.min_rate), _fmt(r.outage), _fmt(r.wall_ms)])


def read_results_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULTS_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        rows = []
        for row in reader:
            for k in ("sweep_value", "sum_rate_bpshz", "min_rate_bpshz", "outage", "wall_ms"):
                row[k] = float(row[k])
            row["trial"], row["seed"] = int(row["trial"]), int(row["seed"])
            rows.append(row)
        return rows


def summarize(records: list[MetricsRecord]) -> dict:
    """Per (scheme, sweep value): mean, std, 95% normal CI, min-rate mean, outage fraction."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.scheme, r.sweep_value), []).append(r)
    out = []
    for (scheme, value), rs in groups.items():
        ok = [r for r in rs if not r.failed]
        sr = np.array([r.sum_rate for r in ok])
        n = len(sr)
        mean = float(sr.mean()) if n else math.nan
        std = float(sr.std(ddof=1)) if n > 1 else 0.0
        half = 1.96 * std / math.sqrt(n) if n else math.nan
        outs = [r.outage for r in ok if not math.isnan(r.outage)]
        out.append({
            "scheme": scheme, "sweep_value": value, "n": n, "failed": len(rs) - n,
            "mean_sum_rate": mean, "std_sum_rate": std, "ci95": [mean - half, mean + half],
            "mean_min_rate": float(np.mean([r.min_rate for r in ok])) if n else math.nan,
            "outage": float(np.mean(outs)) if outs else None,
        })
    return {"groups": out}


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, BoxplotStats):
        return {k: getattr(o, k) for k in BoxplotStats.__dataclass_fields__}
    raise TypeError(f"cannot serialise {type(o).__name__}")
