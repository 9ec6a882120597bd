"""JSON run configuration with unit-suffixed keys.

Sections and their keys (all optional; missing keys take the defaults
below, unknown keys are an error)::

    system:     fc_ghz, kappa, height_m, feed_x_m, d1_m, d2_m, noise_dbm,
                snr_db | power_dbm, antennas, users
    placement:  alpha, guard_m, step_m, fd_delta_m, tol, max_iters,
                max_halvings, armijo, step_growth
    train:      lr, batch, epochs, folds, decay, decay_steps, adam_beta1,
                adam_beta2, adam_eps, patience, min_delta, dropout
    dataset:    n_train, n_test, placement_mode
    experiment: schemes, sweep_var, sweep_values, trials, targets_bps,
                alphas, layouts, grid_points, ks, snrs_db
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .model import SystemConfig, dbm_to_w
from .neural.train import TrainConfig
from .placement import PlacementParams

SYSTEM_DEFAULTS = {
    "fc_ghz": 28.0, "kappa": 1.4, "height_m": 3.0, "feed_x_m": None, "d1_m": 10.0, "d2_m": 10.0,
    "noise_dbm": -90.0, "snr_db": None, "power_dbm": None, "antennas": 4, "users": 4,
}
PLACEMENT_DEFAULTS = {
    "alpha": 0.5, "guard_m": None, "step_m": 0.1, "fd_delta_m": None, "tol": 1e-6, "max_iters": 200,
    "max_halvings": 20, "armijo": 1e-4, "step_growth": 2.0,
}
TRAIN_DEFAULTS = {k: getattr(TrainConfig(), k) for k in TrainConfig.__dataclass_fields__ if k != "seed"}
DATASET_DEFAULTS = {"n_train": 4500, "n_test": 500, "placement_mode": "optimized"}
EXPERIMENT_DEFAULTS = {
    "schemes": ["CNN-NOMA", "C-NOMA", "FPA-NOMA", "PA-OMA", "C-OMA"],
    "sweep_var": "snr_db", "sweep_values": [10.0, 20.0, 30.0], "trials": 100,
    "targets_bps": [0.0, 0.5, 1.0, 2.0, 4.0], "alphas": [0.1, 0.3, 0.5, 0.7, 0.9], "layouts": 200,
    "grid_points": 12, "ks": [3, 4], "snrs_db": [10.0, 20.0],
}
SECTIONS = {
    "system": SYSTEM_DEFAULTS, "placement": PLACEMENT_DEFAULTS, "train": TRAIN_DEFAULTS,
    "dataset": DATASET_DEFAULTS, "experiment": EXPERIMENT_DEFAULTS,
}


@dataclass(frozen=True, eq=False)
class RunConfig:
    system: SystemConfig
    placement: PlacementParams
    train: TrainConfig
    dataset: dict = field(default_factory=lambda: dict(DATASET_DEFAULTS))
    experiment: dict = field(default_factory=lambda: dict(EXPERIMENT_DEFAULTS))
    placement_raw: dict = field(default_factory=lambda: dict(PLACEMENT_DEFAULTS))

    def placement_for(self, system: SystemConfig) -> PlacementParams:
        """Placement parameters re-derived for another scenario (bounds, guard)."""
        return build_placement(self.placement_raw, system)


def _merge(raw: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    for section in raw:
        if section not in SECTIONS:
            raise ConfigError(f"unknown section {section!r}")
    merged = {}
    for name, defaults in SECTIONS.items():
        body = raw.get(name, {})
        if not isinstance(body, dict):
            raise ConfigError(f"section {name!r} must be an object")
        for key in body:
            if key not in defaults:
                raise ConfigError(f"unknown key {name}.{key}")
        merged[name] = {**defaults, **body}
    return merged


def build_system(s: dict) -> SystemConfig:
    if s["snr_db"] is not None and s["power_dbm"] is not None:
        raise ConfigError("system.snr_db and system.power_dbm are mutually exclusive")
    try:
        noise = dbm_to_w(float(s["noise_dbm"]))
        if s["power_dbm"] is not None:
            power = dbm_to_w(float(s["power_dbm"]))
        else:
            snr = 10.0 if s["snr_db"] is None else float(s["snr_db"])
            power = noise * 10.0 ** (snr / 10.0)
        return SystemConfig(
            carrier_freq_hz=float(s["fc_ghz"]) * 1e9, kappa=float(s["kappa"]),
            waveguide_height_m=float(s["height_m"]),
            feed_x_m=None if s["feed_x_m"] is None else float(s["feed_x_m"]),
            region_d1_m=float(s["d1_m"]), region_d2_m=float(s["d2_m"]),
            total_power_w=power, noise_power_w=noise,
            antennas=int(s["antennas"]), users=int(s["users"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"system: {exc}") from exc


def build_placement(p: dict, system: SystemConfig) -> PlacementParams:
    try:
        return PlacementParams.for_config(
            system, alpha=float(p["alpha"]), guard_m=p["guard_m"], step=float(p["step_m"]),
            fd_delta_m=p["fd_delta_m"], tol=float(p["tol"]), max_iters=int(p["max_iters"]),
            max_halvings=int(p["max_halvings"]), armijo=float(p["armijo"]),
            step_growth=float(p["step_growth"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"placement: {exc}") from exc


def build_run_config(raw: dict, seed: int = 0) -> RunConfig:
    m = _merge(raw)
    system = build_system(m["system"])
    placement = build_placement(m["placement"], system)
    try:
        train = TrainConfig(**m["train"], seed=int(seed))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"train: {exc}") from exc
    return RunConfig(system, placement, train, m["dataset"], m["experiment"], m["placement"])


def load_config(path: str | None, seed: int = 0) -> RunConfig:
    if path is None:
        return build_run_config({}, seed)
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return build_run_config(raw, seed)
