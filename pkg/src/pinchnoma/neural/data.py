"""Training pairs (channel -> max-min powers) and their CSV form."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import PinchError, ShapeError
from ..model import AntennaPlacement, ChannelState, SystemConfig, UserLayout, channel_state
from ..placement import PlacementParams, project_feasible, refine_placement
from ..power import maxmin_allocation

PLACEMENT_MODES = ("optimized", "fixed", "gaussian")
MAX_RESAMPLES = 100
CSV_HEADER = ("sample_id", "k", "re_g", "im_g", "q_target", "P_w", "sigma2_w", "M", "K")


@dataclass(eq=False)
class Dataset:
    """Channels and labels, both in user-index order.

    Network features and targets are derived in SIC-rank order, weakest
    user first; targets are fractions of the budget.
    """

    gains: np.ndarray       # (N, K) complex
    targets: np.ndarray     # (N, K) watts
    budgets: np.ndarray     # (N,)
    noise: np.ndarray       # (N,)
    antennas: int
    users: int
    split: str = "train"
    norm_mean: np.ndarray = field(default_factory=lambda: np.zeros(2))
    norm_std: np.ndarray = field(default_factory=lambda: np.ones(2))

    def __post_init__(self):
        self.gains = np.asarray(self.gains, complex).reshape(-1, self.users)
        self.targets = np.asarray(self.targets, float).reshape(-1, self.users)
        self.budgets = np.asarray(self.budgets, float).reshape(-1)
        self.noise = np.asarray(self.noise, float).reshape(-1)
        n = len(self.gains)
        if not (len(self.targets) == len(self.budgets) == len(self.noise) == n):
            raise ShapeError("dataset columns disagree on sample count")

    def __len__(self) -> int:
        return len(self.gains)

    def states(self) -> list[ChannelState]:
        return [ChannelState(g) for g in self.gains]

    def orders(self) -> np.ndarray:
        return np.argsort(np.abs(self.gains) ** 2, axis=1, kind="stable")

    def features(self) -> np.ndarray:
        """Raw (N, K, 2) real/imag features in SIC-rank order."""
        g = np.take_along_axis(self.gains, self.orders(), axis=1)
        return np.stack([g.real, g.imag], axis=-1)

    def fractions(self) -> np.ndarray:
        """Targets q / P in SIC-rank order."""
        q = np.take_along_axis(self.targets, self.orders(), axis=1)
        return q / self.budgets[:, None]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.gains[idx], self.targets[idx], self.budgets[idx], self.noise[idx],
                       self.antennas, self.users, self.split, self.norm_mean, self.norm_std)


def feature_stats(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column (real, imag) mean and std; zero spread falls back to 1."""
    f = np.asarray(features, float).reshape(-1, 2)
    if len(f) == 0:
        return np.zeros(2), np.ones(2)
    mean, std = f.mean(axis=0), f.std(axis=0)
    return mean, np.where(std > 0, std, 1.0)


def sample_layout(config: SystemConfig, rng: np.random.Generator) -> UserLayout:
    K = config.users
    x = rng.uniform(-config.region_d1_m / 2.0, config.region_d1_m / 2.0, K)
    y = rng.uniform(-config.region_d2_m / 2.0, config.region_d2_m / 2.0, K)
    return UserLayout.from_xy(x, y)


def _sample_gains(config: SystemConfig, mode: str, rng: np.random.Generator,
                  params: PlacementParams) -> np.ndarray:
    if mode == "gaussian":
        # circularly-symmetric, variance of a single antenna straight overhead
        s = math.sqrt(config.eta) / config.waveguide_height_m
        return s * (rng.standard_normal(config.users) + 1j * rng.standard_normal(config.users)) / math.sqrt(2.0)
    layout = sample_layout(config, rng)
    if mode == "optimized":
        placement = refine_placement(layout, config, params).placement
    else:
        lo, hi = params.bounds
        xs = project_feasible(np.linspace(lo, hi, config.antennas + 2)[1:-1], params)
        placement = AntennaPlacement(xs, config.waveguide_height_m)
    return channel_state(layout, placement, config).gains


def _draw(config, n, mode, rng, params):
    gains = np.empty((n, config.users), complex)
    targets = np.empty((n, config.users))
    P, s2 = config.total_power_w, config.noise_power_w
    for i in range(n):
        for attempt in range(MAX_RESAMPLES + 1):
            try:
                g = _sample_gains(config, mode, rng, params)
                q = maxmin_allocation(ChannelState(g), P, s2).q
                break
            except PinchError:
                if attempt == MAX_RESAMPLES:
                    raise
        gains[i], targets[i] = g, q
    return gains, targets


def generate_dataset(config: SystemConfig, n_train: int = 4500, n_test: int = 500,
                     placement_mode: str = "optimized", seed: int = 0,
                     params: PlacementParams | None = None) -> tuple[Dataset, Dataset]:
    """Labelled (channel, max-min q) pairs for a train and a test split.

    Train and test draw from independent child streams of ``seed``; the
    standardisation statistics come from the train split only.
    """
    if placement_mode not in PLACEMENT_MODES:
        raise ValueError(f"placement_mode must be one of {PLACEMENT_MODES}")
    if n_train < 0 or n_test < 0:
        raise ValueError("sample counts must be >= 0")
    params = PlacementParams.for_config(config) if params is None else params
    rng_train, rng_test = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    out = []
    for n, rng, split in ((n_train, rng_train, "train"), (n_test, rng_test, "test")):
        g, q = _draw(config, n, placement_mode, rng, params)
        out.append(Dataset(g, q, np.full(n, config.total_power_w), np.full(n, config.noise_power_w),
                           config.antennas, config.users, split))
    train, test = out
    mean, std = feature_stats(train.features())
    for d in out:
        d.norm_mean, d.norm_std = mean, std
    return train, test


def write_dataset_csv(path, data: Dataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for i in range(len(data)):
            for k in range(data.users):
                g = data.gains[i, k]
                w.writerow([i, k, repr(float(g.real)), repr(float(g.imag)), repr(float(data.targets[i, k])),
                            repr(float(data.budgets[i])), repr(float(data.noise[i])), data.antennas, data.users])


def read_dataset_csv(path, split: str = "train") -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ShapeError(f"{path}: expected header {','.join(CSV_HEADER)}")
    body = rows[1:]
    if not body:
        raise ShapeError(f"{path}: no samples")
    M, K = int(body[0][7]), int(body[0][8])
    n = len(body) // K
    if n * K != len(body):
        raise ShapeError(f"{path}: {len(body)} rows is not a multiple of K={K}")
    gains = np.empty((n, K), complex)
    targets = np.empty((n, K))
    budgets, noise = np.empty(n), np.empty(n)
    for row in body:
        i, k = int(row[0]), int(row[1])
        gains[i, k] = complex(float(row[2]), float(row[3]))
        targets[i, k] = float(row[4])
        budgets[i], noise[i] = float(row[5]), float(row[6])
    return Dataset(gains, targets, budgets, noise, M, K, split)
