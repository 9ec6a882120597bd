"""Command-line front end.

Exit codes: 0 ok, 1 configuration error, 2 infeasible problem, 3 corrupt
artifact, 4 validation failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from . import montecarlo as mc
from .config import RunConfig, load_config
from .errors import (
    BudgetExceeded,
    ConfigError,
    CorruptArtifact,
    DegenerateChannel,
    DegenerateGeometry,
    Infeasible,
    ShapeError,
)
from .model import ChannelState, UserLayout, channel_state
from .neural import (
    generate_dataset,
    infer_allocation,
    load_model,
    raw_allocation,
    read_dataset_csv,
    save_model,
    train,
    write_dataset_csv,
)
from .placement import refine_placement
from .power import maxmin_power
from .validate import run_validation

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_CORRUPT, EXIT_VALIDATION = 0, 1, 2, 3, 4


def _out(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _run_config(args) -> RunConfig:
    return load_config(args.config, seed=args.seed)


def _write_json(path, obj):
    mc.write_json(path, obj)


def _load_layout(path) -> UserLayout:
    try:
        with open(path) as fh:
            users = json.load(fh)["users"]
        xy = np.asarray(users, float).reshape(-1, 2)
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"layout file {path}: {exc}") from exc
    return UserLayout.from_xy(xy[:, 0], xy[:, 1])


def cmd_placement(args) -> int:
    rc = _run_config(args)
    cfg = rc.system
    if args.layout:
        layout = _load_layout(args.layout)
        cfg = cfg.replace(users=len(layout))
    else:
        layout = mc.sample_layout(cfg, np.random.default_rng(args.seed))
    params = rc.placement_for(cfg)
    sol = refine_placement(layout, cfg, params)
    _write_json(_out(args, "placement.json"), {
        "antenna_x_m": sol.placement.xs.tolist(), "init_x_m": sol.init.xs.tolist(),
        "users_xy_m": layout.positions[:, :2].tolist(), "sr_init_bpshz": sol.sr_init,
        "sr_final_bpshz": sol.sr_final, "iterations": sol.iterations,
    })
    with open(_out(args, "trace.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "sum_rate_bpshz"])
        for i, sr in enumerate(sol.trace):
            w.writerow([i, repr(float(sr))])
    print(f"SR_init={sol.sr_init!r} SR_final={sol.sr_final!r} iterations={sol.iterations}")
    return EXIT_OK


def _read_gains(path) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return np.array([complex(float(r["re_g"]), float(r["im_g"])) for r in rows])
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"gains file {path}: {exc}") from exc


def cmd_power(args) -> int:
    rc = _run_config(args)
    P = rc.system.total_power_w if args.power_w is None else args.power_w
    s2 = rc.system.noise_power_w if args.noise_w is None else args.noise_w
    state = ChannelState(_read_gains(args.gains))
    res = maxmin_power(state, P, s2)
    _write_json(_out(args, "allocation.json"), {
        "q_w": res.q_opt.q.tolist(), "t_opt": res.t_opt, "iterations": res.iterations,
        "achieved_sinrs_by_rank": res.achieved_sinrs.tolist(), "sic_order": state.sic_order.tolist(),
        "P_w": P, "sigma2_w": s2,
    })
    print(f"t_opt={res.t_opt!r} sum_q={res.q_opt.total!r}")
    return EXIT_OK


def cmd_dataset(args) -> int:
    rc = _run_config(args)
    n_train = rc.dataset["n_train"] if args.n_train is None else args.n_train
    n_test = rc.dataset["n_test"] if args.n_test is None else args.n_test
    mode = rc.dataset["placement_mode"] if args.mode is None else args.mode
    tr, te = generate_dataset(rc.system, int(n_train), int(n_test), mode, args.seed, rc.placement)
    write_dataset_csv(_out(args, "train.csv"), tr)
    write_dataset_csv(_out(args, "test.csv"), te)
    print(f"train={len(tr)} test={len(te)} mode={mode}")
    return EXIT_OK


def cmd_train(args) -> int:
    rc = _run_config(args)
    data = read_dataset_csv(args.data)
    tcfg = rc.train if args.epochs is None else replace(rc.train, epochs=args.epochs)
    res = train(data, tcfg)
    save_model(_out(args, "model.pcnn"), res.model)
    with open(_out(args, "curves.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fold", "epoch", "train_mae", "val_mae"])
        for f, e, tr, va in res.curves:
            w.writerow([f, e, repr(float(tr)), repr(float(va))])
    _write_json(_out(args, "folds.json"), {"best_fold": res.best_fold, "folds": [asdict(s) for s in res.folds]})
    print(f"best fold {res.best_fold} val MAE {res.folds[res.best_fold].best_val_mae!r}")
    return EXIT_OK


def cmd_infer(args) -> int:
    if not args.model:
        raise ConfigError("--model is required")
    model = load_model(args.model)
    data = read_dataset_csv(args.data)
    with open(_out(args, "allocations.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "k", "q_hat_w", "q_proj_w", "q_target_w"])
        for i, (state, P) in enumerate(zip(data.states(), data.budgets)):
            q_hat = raw_allocation(model, state, P)
            q = infer_allocation(model, state, P).q
            for k in range(len(state)):
                w.writerow([i, k, repr(float(q_hat[k])), repr(float(q[k])), repr(float(data.targets[i, k]))])
    print(f"inferred {len(data)} samples")
    return EXIT_OK


def _models_for(path, Ks) -> dict:
    if not path:
        return {}
    if os.path.isdir(path):
        out = {}
        for K in Ks:
            f = os.path.join(path, f"model_K{K}.pcnn")
            if os.path.exists(f):
                out[K] = load_model(f)
        return out
    m = load_model(path)
    return {m.trained_K: m}


def _spec(args, rc: RunConfig, **overrides) -> mc.ExperimentSpec:
    e = rc.experiment
    trials = e["trials"] if args.trials is None else args.trials
    values = tuple(float(v) for v in e["sweep_values"])
    kw = dict(schemes=tuple(e["schemes"]), sweep_var=e["sweep_var"], sweep_values=values,
              trials=int(trials), base_seed=args.seed, config=rc.system)
    kw.update(overrides)
    Ks = [int(v) for v in kw["sweep_values"]] if kw["sweep_var"] == "K" else [rc.system.users]
    kw["models"] = _models_for(args.model, Ks)
    spec = mc.ExperimentSpec(**kw)
    if "CNN-NOMA" in spec.schemes:
        missing = [K for K in Ks if K not in spec.models]
        if missing:
            raise ConfigError(f"CNN-NOMA needs a model for K={missing} (use --model)")
    return spec


def cmd_sweep(args) -> int:
    rc = _run_config(args)
    spec = _spec(args, rc)
    records = mc.run_experiment(spec, workers=args.workers, timing=args.timing)
    mc.write_results_csv(_out(args, "results.csv"), records)
    _write_json(_out(args, "summary.json"), {"sweep_var": spec.sweep_var, **mc.summarize(records)})
    print(f"{len(records)} records")
    return EXIT_OK


def cmd_outage(args) -> int:
    rc = _run_config(args)
    spec = _spec(args, rc, sweep_var="target_rate", sweep_values=(0.0,))
    targets = [float(t) for t in rc.experiment["targets_bps"]]
    cur = mc.outage_curve(spec, targets, workers=args.workers)
    with open(_out(args, "outage.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "target_bpshz", "outage"])
        for s in spec.schemes:
            for t, p in zip(targets, cur["outage"][s]):
                w.writerow([s, repr(t), repr(float(p))])
    mc.write_results_csv(_out(args, "results.csv"), cur["records"])
    _write_json(_out(args, "summary.json"), {"targets_bpshz": targets,
                                             "outage": {s: v.tolist() for s, v in cur["outage"].items()}})
    print(f"outage curves for {len(spec.schemes)} schemes")
    return EXIT_OK


def cmd_alpha(args) -> int:
    rc = _run_config(args)
    layouts = rc.experiment["layouts"] if args.trials is None else args.trials
    study = mc.alpha_study(rc.system, rc.experiment["alphas"], int(layouts), args.seed, rc.placement)
    with open(_out(args, "alpha_samples.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "layout", "seed", "delta_sr_bpshz"])
        for a in study.alphas:
            for i, (seed, d) in enumerate(zip(study.seeds, study.samples[a])):
                w.writerow([repr(a), i, seed, repr(float(d))])
    _write_json(_out(args, "summary.json"), {"stats": {repr(a): study.stats[a] for a in study.alphas}})
    print(f"{len(study.alphas)} alphas x {layouts} layouts")
    return EXIT_OK


def cmd_table1(args) -> int:
    rc = _run_config(args)
    e = rc.experiment
    trials = 30 if args.trials is None else args.trials
    cells = mc.table1_validation(e["ks"], e["snrs_db"], int(trials), int(e["grid_points"]), args.seed,
                                 rc.system)
    with open(_out(args, "table1.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["K", "snr_db", "sr_iterative_bpshz", "sr_brute_force_bpshz", "mrg", "xrg", "trials"])
        for c in cells:
            w.writerow([c.K, repr(c.snr_db), repr(c.sr_iterative), repr(c.sr_brute_force), repr(c.mrg),
                        repr(c.xrg), c.trials])
    _write_json(_out(args, "summary.json"), {"cells": [asdict(c) for c in cells]})
    for c in cells:
        print(f"K={c.K} SNR={c.snr_db:g} dB  MRG={c.mrg:.4f} XRG={c.xrg:.4f}")
    return EXIT_OK


def cmd_validate(args) -> int:
    results = run_validation(seed=args.seed, inject_fault=args.inject_fault)
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        print(f"{status} {r.name}: {r.passed}/{r.total} {r.detail}".rstrip())
    return EXIT_OK if all(r.ok for r in results) else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--model", help="model file (or directory of model_K<K>.pcnn)")
    common.add_argument("--trials", type=int)

    p = argparse.ArgumentParser(prog="pinchnoma", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("placement", parents=[common], help="optimise antenna positions for one layout")
    s.add_argument("--layout", help='JSON file {"users": [[x, y], ...]}')
    s.set_defaults(func=cmd_placement)

    s = sub.add_parser("power", parents=[common], help="max-min power for given gains")
    s.add_argument("--gains", required=True, help="CSV with columns re_g,im_g")
    s.add_argument("--power-w", type=float)
    s.add_argument("--noise-w", type=float)
    s.set_defaults(func=cmd_power)

    s = sub.add_parser("dataset", parents=[common], help="generate train/test CSV")
    s.add_argument("--n-train", type=int)
    s.add_argument("--n-test", type=int)
    s.add_argument("--mode", choices=("optimized", "fixed", "gaussian"))
    s.set_defaults(func=cmd_dataset)

    s = sub.add_parser("train", parents=[common], help="train the CNN on a dataset CSV")
    s.add_argument("--data", required=True)
    s.add_argument("--epochs", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("infer", parents=[common], help="predict allocations for a dataset CSV")
    s.add_argument("--data", required=True)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("sweep", parents=[common], help="sum-rate sweep over schemes")
    s.add_argument("--timing", action="store_true", help="record wall-clock ms (breaks bit-reproducibility)")
    s.set_defaults(func=cmd_sweep)

    for name, func, hlp in (("outage", cmd_outage, "far-user outage curves"),
                            ("alpha", cmd_alpha, "Stage I alpha robustness study"),
                            ("table1", cmd_table1, "iterative vs brute-force gap table")):
        sub.add_parser(name, parents=[common], help=hlp).set_defaults(func=func)

    s = sub.add_parser("validate", parents=[common], help="run the oracle suites")
    s.add_argument("--inject-fault", action="store_true", help="perturb the gradient-check fixture")
    s.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (Infeasible, DegenerateChannel, DegenerateGeometry, BudgetExceeded) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (CorruptArtifact, ShapeError) as exc:
        print(f"corrupt artifact: {exc}", file=sys.stderr)
        return EXIT_CORRUPT


if __name__ == "__main__":
    sys.exit(main())
