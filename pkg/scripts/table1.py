"""Iterative placement versus G=12 brute force, M = K in {3, 4} at 10 and 20 dB."""
import os

from _common import parser, run

if __name__ == "__main__":
    a = parser(__doc__, trials=30).parse_args()
    out = os.path.join(a.out, "table1")
    run(out, "config", {"experiment": {"ks": [3, 4], "snrs_db": [10, 20], "grid_points": 12}},
        ["table1", "--out", out, "--seed", str(a.seed), "--trials", str(a.trials)])
