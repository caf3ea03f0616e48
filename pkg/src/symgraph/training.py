"""Multi-label loss and the mini-batch SGD training loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError, DomainError, TrainingError
from .model import ModelConfig, ModelParams, forward, init_params
from .rng import child_rng
from .tensor import Tape, Tensor, backward, sgd_step

LOG_EPS = 1e-12  # clamp inside log; keeps the loss finite at hard zeros


@dataclass
class Example:
    image_id: str
    scene_graph: object
    knowledge_graph: object
    labels: list


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    shuffle: bool = True
    loss_mode: str = "softmax_ce"  # or "sigmoid_bce"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.loss_mode not in ("softmax_ce", "sigmoid_bce"):
            raise ConfigError(f"unknown loss_mode '{self.loss_mode}'")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_macro_f: float
    seconds: float


@dataclass
class RunLog:
    records: list = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_macro_f,seconds"]
        for r in self.records:
            lines.append(
                f"{r.epoch},{r.train_loss:.12g},{r.val_macro_f:.12g},{r.seconds:.3f}"
            )
        return "\n".join(lines) + "\n"


def target_vector(labels, label_list) -> np.ndarray:
    """Multi-hot over the configured labels, normalized to sum 1."""
    if not labels:
        raise DomainError("empty label set")
    idx = {name: i for i, name in enumerate(label_list)}
    t = np.zeros(len(label_list))
    for name in set(labels):
        if name not in idx:
            raise DomainError(f"label '{name}' not in configured label list")
        t[idx[name]] = 1.0
    return t / t.sum()


def loss(probs: Tensor, labels, label_list, tape: Tape = None) -> Tensor:
    """Soft-target cross-entropy: -sum_c t_c log(p_c + eps)."""
    t = Tensor(target_vector(labels, label_list))
    return T.scale(
        T.sum_all(T.mul(t, T.log(T.add_const(probs, LOG_EPS, tape), tape), tape), tape),
        -1.0, tape,
    )


def bce_loss(logits: Tensor, labels, label_list, tape: Tape = None) -> Tensor:
    """Per-label binary cross-entropy on sigmoid outputs (alternative head)."""
    if not labels:
        raise DomainError("empty label set")
    y = np.isin(np.array(label_list), list(set(labels))).astype(float)
    p = T.sigmoid(logits, tape)
    pos = T.mul(Tensor(y), T.log(T.add_const(p, LOG_EPS, tape), tape), tape)
    neg = T.mul(
        Tensor(1.0 - y),
        T.log(T.add_const(T.scale(p, -1.0, tape), 1.0 + LOG_EPS, tape), tape),
        tape,
    )
    return T.scale(T.sum_all(T.add(pos, neg, tape), tape), -1.0, tape)


def example_loss(example, params, table, mconfig, label_list, loss_mode, tape=None):
    """Forward one example and build its traced loss; returns (loss, probs)."""
    probs, diag = forward(example, params, table, mconfig, tape)
    if loss_mode == "sigmoid_bce":
        return bce_loss(diag["logits"], example.labels, label_list, tape), probs
    return loss(probs, example.labels, label_list, tape), probs


def train_epoch(data, params: ModelParams, table, mconfig: ModelConfig,
                tconfig: TrainConfig, label_list, rng) -> float:
    """One pass over the data; batched, gradient-averaged SGD. Returns the
    mean per-example loss."""
    if not data:
        raise ConfigError("empty training data")
    order = np.arange(len(data))
    if tconfig.shuffle:
        order = rng.permutation(len(data))
    total = 0.0
    for start in range(0, len(data), tconfig.batch_size):
        batch = [data[i] for i in order[start:start + tconfig.batch_size]]
        for ex in batch:
            tape = Tape()
            lt, _ = example_loss(ex, params, table, mconfig, label_list,
                                 tconfig.loss_mode, tape)
            value = lt.item()
            if not np.isfinite(value):
                raise TrainingError(f"non-finite loss on example '{ex.image_id}'")
            total += value
            backward(tape, lt)
        for p in params:
            p.grad /= len(batch)
        sgd_step(params, tconfig.lr)
    return total / len(data)


def train(train_data, val_data, label_list, table, mconfig: ModelConfig,
          tconfig: TrainConfig, params: ModelParams = None, policy=None):
    """Full run: per-epoch SGD plus validation; returns
    (final params, RunLog, best params by validation macro F, best epoch)."""
    from .evaluation import ThresholdPolicy, evaluate_dataset

    if not train_data or not val_data:
        raise ConfigError("train and validation splits must be nonempty")
    if params is None:
        params = init_params(mconfig)
    if policy is None:
        policy = ThresholdPolicy()
    rng = child_rng(tconfig.seed, "shuffle")
    log = RunLog()
    best = params.copy()
    best_f = -1.0
    best_epoch = -1
    for epoch in range(tconfig.epochs):
        t0 = time.perf_counter()
        mean_loss = train_epoch(train_data, params, table, mconfig, tconfig,
                                label_list, rng)
        report = evaluate_dataset(val_data, params, table, mconfig, label_list,
                                  policy, loss_mode=tconfig.loss_mode)
        seconds = time.perf_counter() - t0
        log.records.append(EpochRecord(epoch, mean_loss, report.macro_f, seconds))
        if report.macro_f > best_f:
            best_f = report.macro_f
            best_epoch = epoch
            best = params.copy()
    return params, log, best, best_epoch
