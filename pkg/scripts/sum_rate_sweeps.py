"""Sum-rate sweeps over SNR, M and D1 for all five schemes.

CNN-NOMA needs models from ``cnn_pipeline.py``; without ``--model`` it is
dropped from the scheme list.
"""
import os

from _common import parser, run

SCHEMES = ["CNN-NOMA", "C-NOMA", "FPA-NOMA", "PA-OMA", "C-OMA"]
SWEEPS = {
    "snr": ({"antennas": 8, "users": 5}, "snr_db", [0, 5, 10, 15, 20, 25, 30]),
    "antennas": ({"users": 3, "antennas": 3, "snr_db": 20}, "M", [2, 3, 4, 5, 6, 7, 8]),
    "region": ({"users": 3, "antennas": 4, "snr_db": 20}, "D1", [6, 8, 10, 12, 14]),
}

if __name__ == "__main__":
    p = parser(__doc__, trials=500)
    p.add_argument("--model", help="model file or directory of model_K<K>.pcnn")
    p.add_argument("--only", choices=sorted(SWEEPS))
    a = p.parse_args()
    schemes = SCHEMES if a.model else SCHEMES[1:]
    for name, (system, var, values) in SWEEPS.items():
        if a.only and name != a.only:
            continue
        out = os.path.join(a.out, f"sweep_{name}")
        cfg = {"system": system, "experiment": {"schemes": schemes, "sweep_var": var, "sweep_values": values}}
        argv = ["sweep", "--out", out, "--seed", str(a.seed), "--trials", str(a.trials),
                "--workers", str(a.workers)]
        run(out, "config", cfg, argv + (["--model", a.model] if a.model else []))
