"""Adam optimization of the network on the MSE + L2 objective, with
mini-batching, early stopping on validation MSE, and grid search over
LSTM memory sizes.

Everything is deterministic given the config seed: shuffling, dropout and
initialization all derive from numpy Generators seeded from it.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .features import ExampleSet, Split
from .metrics import mse
from .model import PowerNetParams, backward_batch, forward_batch, init_params

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 500
    patience: int = 10
    dropout_rate: float = 0.1
    l2_lambda: float = 1e-4
    memory_size_grid: tuple = (64, 128, 256, 512)
    memory_size: int = 64          # used by train(); grid_search overrides
    d1: int = 32
    d2: int = 16
    d3: int = 32
    stack: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not self.memory_size_grid:
            raise ValueError("memory_size_grid must be non-empty")

    def to_dict(self):
        d = self.__dict__.copy()
        d["memory_size_grid"] = list(self.memory_size_grid)
        return d


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def for_params(cls, p: PowerNetParams) -> "AdamState":
        n = p.to_vector().size
        return cls(m=np.zeros(n), v=np.zeros(n))


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)    # per epoch
    val_mse: list = field(default_factory=list)       # per epoch, denormalized
    best_epoch: int = -1
    stopped_early: bool = False
    memory_size: int = 0
    wall_seconds: float = 0.0   # informational; excluded from serialization

    @property
    def best_val_mse(self) -> float:
        return self.val_mse[self.best_epoch]

    def to_json(self) -> str:
        # wall_seconds varies run to run and is deliberately left out so
        # identical configs produce byte-identical reports
        doc = {
            "train_loss": self.train_loss,
            "val_mse": self.val_mse,
            "best_epoch": self.best_epoch,
            "best_val_mse": self.best_val_mse,
            "stopped_early": self.stopped_early,
            "memory_size": self.memory_size,
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    def write_curves_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_mse"])
            for e, (tl, vm) in enumerate(zip(self.train_loss, self.val_mse)):
                writer.writerow([e, repr(tl), repr(vm)])


def loss(E, fw, fc, y, p: PowerNetParams, l2_lambda: float = 0.0,
         dropout_rate: float = 0.0, rng=None):
    """Batch loss (mean squared error + L2 on the fully-connected weights)
    and its exact parameter gradients.

    L2 covers w1..w4 only: the fully-connected layers, not the LSTM weights
    and not the biases.
    """
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise TrainingError("empty batch")
    yhat, trace = forward_batch(E, fw, fc, p, dropout_rate=dropout_rate,
                                train=dropout_rate > 0.0, rng=rng)
    resid = yhat - y
    value = float(np.mean(resid ** 2))
    grads = backward_batch(trace, 2.0 * resid / len(y), p)
    if l2_lambda > 0.0:
        for w in (p.w1, p.w2, p.w3, p.w4):
            value += l2_lambda * float(np.sum(w ** 2))
        grads.w1 = grads.w1 + 2.0 * l2_lambda * p.w1
        grads.w2 = grads.w2 + 2.0 * l2_lambda * p.w2
        grads.w3 = grads.w3 + 2.0 * l2_lambda * p.w3
        grads.w4 = grads.w4 + 2.0 * l2_lambda * p.w4
    return value, grads


def adam_step(p: PowerNetParams, grads: PowerNetParams, state: AdamState,
              lr: float) -> PowerNetParams:
    """One Adam update; mutates state, returns updated parameters."""
    theta = p.to_vector()
    g = grads.to_vector()
    state.t += 1
    state.m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * g
    state.v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * g * g
    m_hat = state.m / (1.0 - ADAM_BETA1 ** state.t)
    v_hat = state.v / (1.0 - ADAM_BETA2 ** state.t)
    theta = theta - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return p.from_vector(theta)


def _validation_mse(split: Split, p: PowerNetParams, spec) -> float:
    yhat, _ = forward_batch(split.E, split.FW, split.FC, p)
    return mse(spec.denormalize_kw(split.y), spec.denormalize_kw(yhat))


def train(data: ExampleSet, cfg: TrainConfig):
    """Full training loop; returns (best params, TrainReport).

    Stops when validation MSE has not improved for cfg.patience epochs and
    returns the parameters of the best validation epoch.
    """
    tr = data.train
    if len(tr) == 0 or len(data.validation) == 0:
        raise TrainingError("train and validation splits must be non-empty")
    t0 = time.monotonic()
    rng = np.random.default_rng(cfg.seed)
    p = init_params(cfg.memory_size, cfg.d1, cfg.d2, cfg.d3,
                    seed=cfg.seed, stack=cfg.stack)
    state = AdamState.for_params(p)
    report = TrainReport(memory_size=cfg.memory_size)
    best_vec = p.to_vector()
    best_mse = np.inf
    since_best = 0
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(tr))
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, len(tr), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            value, grads = loss(tr.E[idx], tr.FW[idx], tr.FC[idx], tr.y[idx],
                                p, l2_lambda=cfg.l2_lambda,
                                dropout_rate=cfg.dropout_rate, rng=rng)
            if not np.isfinite(value):
                raise TrainingError(f"training diverged at epoch {epoch} (loss={value})")
            p = adam_step(p, grads, state, cfg.learning_rate)
            epoch_loss += value
            n_batches += 1
        report.train_loss.append(epoch_loss / n_batches)
        val = _validation_mse(data.validation, p, data.spec)
        if not np.isfinite(val):
            raise TrainingError(f"validation diverged at epoch {epoch}")
        report.val_mse.append(val)
        if val < best_mse:
            best_mse = val
            best_vec = p.to_vector()
            report.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                report.stopped_early = True
                break
    report.wall_seconds = time.monotonic() - t0
    return p.from_vector(best_vec), report


def grid_search(data: ExampleSet, cfg: TrainConfig):
    """One full training run per memory size in the grid.

    Returns (best params, best TrainReport, {memory_size: TrainReport}).
    Divergent cells are skipped; ties go to the smaller memory size.
    """
    reports = {}
    best = None
    for k, m in enumerate(cfg.memory_size_grid):
        cell_cfg = replace(cfg, memory_size=m, seed=cfg.seed + k)
        try:
            params, rep = train(data, cell_cfg)
        except TrainingError:
            reports[m] = None
            continue
        reports[m] = rep
        if best is None or rep.best_val_mse < best[1].best_val_mse:
            best = (params, rep)
    if best is None:
        raise TrainingError("every grid cell diverged")
    return best[0], best[1], reports
