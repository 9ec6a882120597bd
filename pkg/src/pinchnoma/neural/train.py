"""K-fold training with early stopping, and projected inference."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataTooSmall, ShapeError
from ..model import ChannelState, PowerAllocation
from ..power import simplex_project
from .cnn import AdamState, CnnModel, adam_step, forward, init_model, loss_and_grads
from .data import Dataset, feature_stats


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch: int = 200
    epochs: int = 64
    folds: int = 5
    decay: float = 0.96
    decay_steps: int = 10
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 8
    min_delta: float = 1e-6
    dropout: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2 or self.batch < 1 or not self.lr > 0:
            raise ValueError("need folds >= 2, batch >= 1, lr > 0")
        if self.epochs < 1 or self.patience < 1:
            raise ValueError("epochs and patience must be >= 1")


@dataclass(frozen=True)
class FoldSummary:
    fold: int
    epochs_run: int
    first_val_mae: float
    best_val_mae: float
    best_epoch: int


@dataclass(eq=False)
class TrainResult:
    model: CnnModel
    curves: list = field(default_factory=list)  # (fold, epoch, train_mae, val_mae)
    folds: list = field(default_factory=list)
    best_fold: int = 0


def _fit_fold(x_tr, y_tr, x_va, y_va, K, cfg: TrainConfig, rng: np.random.Generator, fold: int, curves: list):
    model = init_model(K, rng, cfg.dropout)
    state = AdamState.zeros_like(model.params)
    step = 0
    best, best_params, best_epoch, first, wait = np.inf, None, 0, None, 0
    epoch = 0
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(len(x_tr))
        losses = []
        for s in range(0, len(perm), cfg.batch):
            idx = perm[s:s + cfg.batch]
            loss, grads = loss_and_grads(model, x_tr[idx], y_tr[idx], rng=rng)
            model.params, state = adam_step(model.params, grads, state, step, cfg.lr, cfg.adam_beta1,
                                            cfg.adam_beta2, cfg.adam_eps, cfg.decay, cfg.decay_steps)
            losses.append(loss * len(idx))
            step += 1
        train_mae = sum(losses) / len(x_tr)
        val_mae = float(np.mean(np.abs(forward(model, x_va) - y_va)))
        curves.append((fold, epoch, train_mae, val_mae))
        if first is None:
            first = val_mae
        if val_mae < best - cfg.min_delta:
            best, best_epoch, wait = val_mae, epoch, 0
            best_params = {k: v.copy() for k, v in model.params.items()}
        else:
            wait += 1
            if wait >= cfg.patience:
                break
    if best_params is None:
        # never improved past min_delta: keep the epoch-1 weights' score
        best_params = {k: v.copy() for k, v in model.params.items()}
        best = val_mae
    model.params = best_params
    return model, FoldSummary(fold, epoch, first, best, best_epoch)


def train(dataset: Dataset, config: TrainConfig = TrainConfig()) -> TrainResult:
    """Shuffle, split into ``config.folds`` folds, train one model per fold.

    Each fold trains on the other folds and early-stops on its own
    validation MAE; the returned model is the fold with the lowest best
    validation MAE. Standardisation uses statistics of the whole training
    dataset (``dataset.norm_*`` when set by the generator).
    """
    n, K = len(dataset), dataset.users
    if n < config.folds:
        raise DataTooSmall(f"{n} samples cannot fill {config.folds} folds")
    mean, std = dataset.norm_mean, dataset.norm_std
    if np.all(mean == 0) and np.all(std == 1):
        mean, std = feature_stats(dataset.features())
    x = (dataset.features() - mean) / std
    y = dataset.fractions()
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    parts = np.array_split(perm, config.folds)
    curves, summaries, models = [], [], []
    for f, val_idx in enumerate(parts):
        tr_idx = np.concatenate([p for j, p in enumerate(parts) if j != f])
        fold_rng = np.random.default_rng([config.seed, f + 1])
        model, summary = _fit_fold(x[tr_idx], y[tr_idx], x[val_idx], y[val_idx], K, config, fold_rng, f, curves)
        models.append(model)
        summaries.append(summary)
    best = int(np.argmin([s.best_val_mae for s in summaries]))
    model = models[best]
    model.norm_mean, model.norm_std = np.asarray(mean, float).copy(), np.asarray(std, float).copy()
    return TrainResult(model, curves, summaries, best)


def raw_allocation(model: CnnModel, state: ChannelState, P: float) -> np.ndarray:
    """Unprojected q_hat in watts, user-index order."""
    if len(state) != model.trained_K:
        raise ShapeError(f"model trained for K={model.trained_K}, got K={len(state)}")
    g = state.gains[state.sic_order]
    frac = forward(model, model.standardize(np.column_stack([g.real, g.imag])))
    q = np.empty(len(state))
    q[state.sic_order] = frac * P
    return q


def infer_allocation(model: CnnModel, state: ChannelState, P: float) -> PowerAllocation:
    return simplex_project(raw_allocation(model, state, P), P).q_proj
