"""Stage II gain over Stage I for alpha in 0.1..0.9 (M=5, K=4, 10 dBm)."""
import os

from _common import parser, run

if __name__ == "__main__":
    a = parser(__doc__, trials=200).parse_args()
    out = os.path.join(a.out, "alpha")
    cfg = {"system": {"antennas": 5, "users": 4, "power_dbm": 10},
           "experiment": {"alphas": [round(0.1 * i, 1) for i in range(1, 10)]}}
    run(out, "config", cfg, ["alpha", "--out", out, "--seed", str(a.seed), "--trials", str(a.trials)])
