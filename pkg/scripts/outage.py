"""Far-user outage probability against target rate (M=8, K=5)."""
import os

import numpy as np

from _common import parser, run

if __name__ == "__main__":
    p = parser(__doc__, trials=500)
    p.add_argument("--model", help="model file or directory of model_K<K>.pcnn")
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--max-target", type=float, default=1e-3, help="largest target rate, bps/Hz")
    a = p.parse_args()
    out = os.path.join(a.out, "outage")
    schemes = ["CNN-NOMA", "C-NOMA", "FPA-NOMA", "PA-OMA", "C-OMA"][0 if a.model else 1:]
    cfg = {"system": {"antennas": 8, "users": 5, "snr_db": a.snr_db},
           "experiment": {"schemes": schemes, "targets_bps": np.linspace(0, a.max_target, 41).tolist()}}
    argv = ["outage", "--out", out, "--seed", str(a.seed), "--trials", str(a.trials), "--workers", str(a.workers)]
    run(out, "config", cfg, argv + (["--model", a.model] if a.model else []))
