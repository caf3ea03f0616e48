"""Prediction thresholding, F-score reporting, and ablation harnesses.

F-scores are reported on a 0..100 scale.  Per label, counts are pooled over
examples (micro within the label); the headline macro F is the unweighted
mean over labels.  A micro aggregate over pooled counts is emitted too.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError
from .model import ModelConfig, forward, init_params
from .training import TrainConfig


@dataclass
class ThresholdPolicy:
    """How a probability vector becomes a predicted label set."""

    kind: str = "uniform_prior"  # uniform_prior | top_k | fixed
    k: int = 1
    tau: float = 0.5

    def describe(self):
        if self.kind == "top_k":
            return f"top_k(k={self.k})"
        if self.kind == "fixed":
            return f"fixed(tau={self.tau})"
        return "uniform_prior"


@dataclass
class LabelRow:
    label: str
    frequency: int
    f_score: float
    tp: int = 0
    fp: int = 0
    fn: int = 0


@dataclass
class MetricsReport:
    macro_f: float
    micro_f: float
    per_label: list = field(default_factory=list)
    threshold: str = "uniform_prior"

    def per_label_csv(self) -> str:
        lines = ["label,frequency,f_score"]
        for row in self.per_label:
            lines.append(f"{row.label},{row.frequency},{row.f_score:.12g}")
        return "\n".join(lines) + "\n"


def predict_labels(probs, policy: ThresholdPolicy, label_list) -> set:
    """Threshold a probability vector into a label set.

    Default policy predicts labels with probability strictly above the
    uniform prior 1/C; an empty prediction set is allowed.
    """
    p = np.asarray(probs, dtype=float)
    if p.shape != (len(label_list),):
        raise DomainError(f"probs shape {p.shape} != ({len(label_list)},)")
    if policy.kind == "top_k":
        chosen = np.argsort(-p, kind="stable")[: policy.k]
        return {label_list[i] for i in chosen}
    cutoff = policy.tau if policy.kind == "fixed" else 1.0 / len(label_list)
    return {label_list[i] for i in range(len(label_list)) if p[i] > cutoff}


def f_scores(predictions, truth, label_list,
             policy: ThresholdPolicy = None) -> MetricsReport:
    """Pooled per-label F plus macro and micro aggregates, on a 0..100 scale."""
    if len(predictions) != len(truth):
        raise DomainError("predictions and truth have different lengths")
    labels = set(label_list)
    for sets in (predictions, truth):
        for s in sets:
            bad = set(s) - labels
            if bad:
                raise DomainError(f"label(s) outside configured list: {sorted(bad)}")
    rows = []
    for label in label_list:
        tp = fp = fn = freq = 0
        for pred, true in zip(predictions, truth):
            hit, want = label in pred, label in true
            freq += want
            tp += hit and want
            fp += hit and not want
            fn += want and not hit
        denom = 2 * tp + fp + fn
        f = 100.0 * 2 * tp / denom if denom else 0.0
        rows.append(LabelRow(label, freq, f, tp, fp, fn))
    tp = sum(r.tp for r in rows)
    fp = sum(r.fp for r in rows)
    fn = sum(r.fn for r in rows)
    micro = 100.0 * 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
    macro = float(np.mean([r.f_score for r in rows]))
    desc = policy.describe() if policy else "unspecified"
    return MetricsReport(macro, micro, rows, desc)


def evaluate_dataset(data, params, table, mconfig: ModelConfig, label_list,
                     policy: ThresholdPolicy = None,
                     loss_mode: str = "softmax_ce") -> MetricsReport:
    """Forward every example (untraced), threshold, and score."""
    if policy is None:
        policy = ThresholdPolicy()
    predictions, truth = [], []
    for ex in data:
        probs, diag = forward(ex, params, table, mconfig)
        scores = probs.data
        if loss_mode == "sigmoid_bce":
            scores = 1.0 / (1.0 + np.exp(-diag["logits"].data))
        predictions.append(predict_labels(scores, policy, label_list))
        truth.append(set(ex.labels))
    return f_scores(predictions, truth, label_list, policy)


def collect_attention(data, params, table, mconfig: ModelConfig):
    """Per-example fusion weights [(image_id, alpha_kg, alpha_sg), ...]."""
    rows = []
    for ex in data:
        _, diag = forward(ex, params, table, mconfig)
        a = diag["alpha"]
        if a is not None:
            rows.append((ex.image_id, float(a[0]), float(a[1])))
    return rows


# ---------------------------------------------------------------------------
# ablation harnesses


def ablate_layers(k_values, train_data, val_data, label_list, table,
                  mconfig: ModelConfig, tconfig: TrainConfig) -> dict:
    """Train one model per GCN depth with a shared seed; returns {K: RunLog}."""
    from .training import train

    logs = {}
    for k in k_values:
        cfg = replace(mconfig, gcn_layers=int(k))
        _, log, _, _ = train(train_data, val_data, label_list, table, cfg, tconfig)
        logs[int(k)] = log
    return logs


def ablate_graphs(train_data, val_data, label_list, table, mconfig: ModelConfig,
                  tconfig: TrainConfig, modes=("sg_only", "kg_only", "both")) -> dict:
    """Train single-graph and both-graph variants; returns {mode: RunLog}."""
    from .training import train

    logs = {}
    for mode in modes:
        cfg = replace(mconfig, graph_mode=mode)
        _, log, _, _ = train(train_data, val_data, label_list, table, cfg, tconfig)
        logs[mode] = log
    return logs


def ablation_csv(logs: dict) -> str:
    lines = ["variant,epoch,val_macro_f"]
    for variant, log in logs.items():
        for r in log.records:
            lines.append(f"{variant},{r.epoch},{r.val_macro_f:.12g}")
    return "\n".join(lines) + "\n"


def init_for_mode(mconfig: ModelConfig, mode: str):
    """Fresh params for a graph-mode variant (same seed, ablated factor only)."""
    return init_params(replace(mconfig, graph_mode=mode))
