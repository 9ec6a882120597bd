"""Dataset generation, 5-fold training and test-split inference for one (M, K).

Writes ``model_K<K>.pcnn`` into ``<out>/models`` so the sweep scripts can
pick it up with ``--model <out>/models``.
"""
import os
import shutil

from _common import parser, run

if __name__ == "__main__":
    p = parser(__doc__, trials=0)
    p.add_argument("--antennas", type=int, default=4)
    p.add_argument("--users", type=int, default=4)
    p.add_argument("--snr-db", type=float, default=10.0)
    p.add_argument("--n-train", type=int, default=1000)
    p.add_argument("--n-test", type=int, default=200)
    p.add_argument("--epochs", type=int, default=64)
    a = p.parse_args()
    out = os.path.join(a.out, f"cnn_M{a.antennas}_K{a.users}")
    cfg = {"system": {"antennas": a.antennas, "users": a.users, "snr_db": a.snr_db},
           "train": {"epochs": a.epochs},
           "dataset": {"n_train": a.n_train, "n_test": a.n_test, "placement_mode": "optimized"}}
    common = ["--out", out, "--seed", str(a.seed)]
    run(out, "config", cfg, ["dataset", *common])
    run(out, "config", cfg, ["train", "--data", os.path.join(out, "train.csv"), *common])
    run(out, "config", cfg, ["infer", "--model", os.path.join(out, "model.pcnn"),
                             "--data", os.path.join(out, "test.csv"), *common])
    models = os.path.join(a.out, "models")
    os.makedirs(models, exist_ok=True)
    shutil.copyfile(os.path.join(out, "model.pcnn"), os.path.join(models, f"model_K{a.users}.pcnn"))
