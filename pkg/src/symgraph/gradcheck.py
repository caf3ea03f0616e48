"""Full-model gradient checking against central finite differences."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingTable
from .graphs import GraphEdge, GraphNode, LabeledGraph, validate_graph
from .model import ModelConfig, init_params
from .rng import child_rng
from .tensor import Tape, backward
from .training import Example, example_loss

# relative error of analytic vs numeric gradient; the +1e-6 floor keeps
# finite-difference noise on true-zero coordinates from registering
REL_EPS = 1e-6


@dataclass
class GradCheckReport:
    tolerance: float
    per_param: dict = field(default_factory=dict)  # name -> max relative error

    @property
    def max_error(self):
        return max(self.per_param.values()) if self.per_param else 0.0

    @property
    def ok(self):
        return self.max_error < self.tolerance

    def lines(self):
        out = []
        for name, err in sorted(self.per_param.items()):
            status = "ok" if err < self.tolerance else "FAIL"
            out.append(f"{name:16s} max_rel_err={err:.3e} [{status}]")
        return out


def random_toy_world(mconfig: ModelConfig, seed: int, n_nodes: int = 5):
    """Random embedding table plus one random example for checking."""
    rng = child_rng(seed, "gradcheck")
    tokens = [f"tok{i}" for i in range(12)] + ["self"]
    table = EmbeddingTable(
        mconfig.embed_dim,
        {t: rng.normal(size=mconfig.embed_dim) for t in tokens},
    )

    def random_graph(kind):
        nodes = [
            GraphNode(tokens[rng.integers(0, 10)], [tokens[rng.integers(0, 10)]])
            for _ in range(n_nodes)
        ]
        edges = [
            GraphEdge(int(rng.integers(0, n_nodes)), int(rng.integers(0, n_nodes)),
                      tokens[rng.integers(0, 12)])
            for _ in range(n_nodes + 2)
        ]
        return validate_graph(LabeledGraph(nodes, edges, kind=kind))

    labels = [f"label{i}" for i in range(mconfig.num_labels)]
    ex = Example("gradcheck-0", random_graph("scene"), random_graph("knowledge"),
                 [labels[0], labels[1 % len(labels)]])
    return table, ex, labels


def gradcheck(mconfig: ModelConfig, seed: int = 0, eps: float = 1e-5,
              tolerance: float = 1e-4, loss_mode: str = "softmax_ce",
              corrupt_param: str = None) -> GradCheckReport:
    """Compare analytic gradients of the full forward+loss against central
    finite differences, coordinate by coordinate.

    ``corrupt_param`` is a test-only fault hook: it perturbs the analytic
    gradient of one parameter group so the check must flag that group.
    """
    table, ex, labels = random_toy_world(mconfig, seed)
    params = init_params(mconfig)

    tape = Tape()
    lt, _ = example_loss(ex, params, table, mconfig, labels, loss_mode, tape)
    backward(tape, lt)
    analytic = {p.name: p.grad.copy() for p in params}
    if corrupt_param is not None:
        analytic[corrupt_param] += 0.1
    for p in params:
        p.zero_grad()

    def loss_at() -> float:
        value, _ = example_loss(ex, params, table, mconfig, labels, loss_mode)
        return value.item()

    report = GradCheckReport(tolerance=tolerance)
    for p in params:
        worst = 0.0
        flat = p.value.reshape(-1)
        ga = analytic[p.name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_at()
            flat[i] = orig - eps
            down = loss_at()
            flat[i] = orig
            gn = (up - down) / (2 * eps)
            err = abs(ga[i] - gn) / (abs(ga[i]) + abs(gn) + REL_EPS)
            worst = max(worst, err)
        report.per_param[p.name] = worst
    return report
