"""Two-tower graph network: node encoding, GCN stack, sum readout,
concat or attention fusion of the two graph vectors, and an MLP softmax head.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .embeddings import EmbeddingTable, embed_phrase
from .errors import ConfigError, DimensionError
from .graphs import LabeledGraph
from .rng import child_rng
from .tensor import Parameter, Tape, Tensor

SELF_RELATION = "self"  # reserved relation token for in-degree-0 fallback

FUSION_MODES = ("concat", "attention", "attention_learned")
GRAPH_MODES = ("both", "sg_only", "kg_only")
NONLINEARITIES = ("relu", "sigmoid")


@dataclass
class ModelConfig:
    num_labels: int
    embed_dim: int = 300
    hidden_dim: int = 512
    gcn_layers: int = 3
    fusion_mode: str = "concat"
    nonlinearity: str = "relu"
    share_towers: bool = False
    mlp_hidden: int = None  # defaults to hidden_dim
    graph_mode: str = "both"
    seed: int = 0

    def __post_init__(self):
        if self.mlp_hidden is None:
            self.mlp_hidden = self.hidden_dim
        if self.gcn_layers < 1:
            raise ConfigError(f"gcn_layers must be >= 1, got {self.gcn_layers}")
        if self.num_labels < 2:
            raise ConfigError(f"num_labels must be >= 2, got {self.num_labels}")
        if min(self.embed_dim, self.hidden_dim, self.mlp_hidden) < 1:
            raise ConfigError("dimensions must be >= 1")
        if self.fusion_mode not in FUSION_MODES:
            raise ConfigError(f"unknown fusion_mode '{self.fusion_mode}'")
        if self.graph_mode not in GRAPH_MODES:
            raise ConfigError(f"unknown graph_mode '{self.graph_mode}'")
        if self.nonlinearity not in NONLINEARITIES:
            raise ConfigError(f"unknown nonlinearity '{self.nonlinearity}'")

    @property
    def fusion_input_dim(self):
        return 3 * self.hidden_dim if self.fusion_mode == "concat" else self.hidden_dim


def tower_prefixes(config: ModelConfig) -> dict:
    """Parameter-name prefix per graph ('kg'/'sg'); None for an ablated tower."""
    prefixes = {"kg": None, "sg": None}
    if config.graph_mode in ("both", "kg_only"):
        prefixes["kg"] = "kg"
    if config.graph_mode in ("both", "sg_only"):
        prefixes["sg"] = "sg"
    if config.share_towers and config.graph_mode == "both":
        prefixes = {"kg": "shared", "sg": "shared"}
    return prefixes


def param_shapes(config: ModelConfig) -> list:
    """Ordered (name, shape) listing of every trainable tensor."""
    shapes = []
    seen = set()
    for g in ("kg", "sg"):
        prefix = tower_prefixes(config)[g]
        if prefix is None or prefix in seen:
            continue
        seen.add(prefix)
        shapes.append((f"{prefix}.enc", (config.hidden_dim, 2 * config.embed_dim)))
        for l in range(config.gcn_layers):
            shapes.append((f"{prefix}.gcn{l}", (config.hidden_dim, config.hidden_dim)))
    if config.fusion_mode == "attention_learned":
        shapes.append(("attn.score", (config.hidden_dim,)))
    shapes.append(("mlp.w1", (config.mlp_hidden, config.fusion_input_dim)))
    shapes.append(("mlp.b1", (config.mlp_hidden,)))
    shapes.append(("mlp.w2", (config.num_labels, config.mlp_hidden)))
    shapes.append(("mlp.b2", (config.num_labels,)))
    return shapes


class ModelParams:
    """Named collection of the model's trainable parameters."""

    def __init__(self, params):
        self._by_name = {}
        for p in params:
            if p.name in self._by_name:
                raise ConfigError(f"duplicate parameter name '{p.name}'")
            self._by_name[p.name] = p

    def __iter__(self):
        return iter(self._by_name.values())

    def __len__(self):
        return len(self._by_name)

    def __getitem__(self, name) -> Parameter:
        return self._by_name[name]

    def __contains__(self, name):
        return name in self._by_name

    def names(self):
        return list(self._by_name)

    def tensors(self, tape: Tape = None) -> dict:
        """Tensor view of every parameter, watched on the tape when tracing."""
        if tape is None:
            return {n: Tensor(p.value) for n, p in self._by_name.items()}
        return {n: tape.watch(p) for n, p in self._by_name.items()}

    def copy(self) -> "ModelParams":
        return ModelParams([Parameter(p.value.copy(), p.name) for p in self])


def init_params(config: ModelConfig) -> ModelParams:
    """Glorot-uniform weights and zero biases from the config seed."""
    rng = child_rng(config.seed, "init")
    params = []
    for name, shape in param_shapes(config):
        if len(shape) == 1 and name.startswith("mlp.b"):
            value = np.zeros(shape)
        else:
            fan_out, fan_in = (shape if len(shape) == 2 else (1, shape[0]))
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            value = rng.uniform(-bound, bound, size=shape)
        params.append(Parameter(value, name))
    return ModelParams(params)


def param_count(config: ModelConfig) -> int:
    """Exact number of trainable scalars under a config."""
    return sum(int(np.prod(shape)) for _, shape in param_shapes(config))


# ---------------------------------------------------------------------------
# forward components


def _nonlin(config):
    return T.relu if config.nonlinearity == "relu" else T.sigmoid


def node_input_vector(node, table: EmbeddingTable) -> np.ndarray:
    """Mean embedding of a node's object token and each attribute token."""
    vecs = [embed_phrase(table, node.name).data]
    vecs += [embed_phrase(table, a).data for a in node.attributes]
    return np.mean(vecs, axis=0)


def in_neighbor_lists(g: LabeledGraph) -> list:
    """In-edge source list per node (multiset); [i] self-loop when empty."""
    nbrs = [[] for _ in g.nodes]
    for e in g.edges:
        nbrs[e.dst].append(e.src)
    return [lst if lst else [i] for i, lst in enumerate(nbrs)]


def encode_nodes(g: LabeledGraph, table: EmbeddingTable, w_enc: Tensor,
                 config: ModelConfig, tape: Tape = None) -> Tensor:
    """Initial node states: nonlinearity of the per-node averaged
    [neighbor embedding ; relation embedding] input through the encoder weight.

    Isolated nodes fall back to a self-loop with the reserved relation token.
    """
    n = len(g.nodes)
    d = table.dim
    x = [node_input_vector(node, table) for node in g.nodes]
    e_self = embed_phrase(table, SELF_RELATION).data
    rows = np.zeros((n, 2 * d))
    counts = np.zeros(n)
    for e in g.edges:
        rows[e.dst, :d] += x[e.src]
        rows[e.dst, d:] += embed_phrase(table, e.relation).data
        counts[e.dst] += 1
    for i in range(n):
        if counts[i] == 0:
            rows[i, :d] = x[i]
            rows[i, d:] = e_self
            counts[i] = 1
    rows /= counts[:, None]
    return _nonlin(config)(T.matmul(Tensor(rows), T.transpose(w_enc, tape), tape), tape)


def gcn_layer(states: Tensor, g: LabeledGraph, w: Tensor, config: ModelConfig,
              tape: Tape = None, neighbors=None) -> Tensor:
    """One message-passing layer: nonlinearity of the in-neighbor mean of the
    previous states through the layer weight (no edge features past layer 0).
    """
    if states.shape[0] != len(g.nodes):
        raise DimensionError(
            f"state rows {states.shape[0]} != node count {len(g.nodes)}"
        )
    if neighbors is None:
        neighbors = in_neighbor_lists(g)
    agg = T.neighbor_mean(states, neighbors, tape)
    return _nonlin(config)(T.matmul(agg, T.transpose(w, tape), tape), tape)


def readout_sum(states: Tensor, hidden_dim: int, tape: Tape = None) -> Tensor:
    """Column-wise sum over nodes; the zero vector for an empty graph."""
    if states.shape[0] == 0:
        return Tensor(np.zeros(hidden_dim))
    return T.sum_rows(states, tape)


def fuse_concat(v_kg: Tensor, v_sg: Tensor, tape: Tape = None) -> Tensor:
    """[v_kg ; v_sg ; v_kg * v_sg]."""
    if v_kg.shape != v_sg.shape:
        raise DimensionError(f"fusion inputs disagree: {v_kg.shape} vs {v_sg.shape}")
    return T.concat([v_kg, v_sg, T.mul(v_kg, v_sg, tape)], tape)


def attention_fuse(v_kg: Tensor, v_sg: Tensor, tape: Tape = None,
                   score_w: Tensor = None):
    """Weighted average of the graph vectors.

    The per-graph score is the squared norm (or a learned dot product when
    ``score_w`` is given); the two scores go through a joint softmax.
    Returns (fused, alpha) with alpha ordered [kg, sg].
    """
    if v_kg.shape != v_sg.shape:
        raise DimensionError(f"fusion inputs disagree: {v_kg.shape} vs {v_sg.shape}")
    if score_w is None:
        s_kg = T.sum_all(T.mul(v_kg, v_kg, tape), tape)
        s_sg = T.sum_all(T.mul(v_sg, v_sg, tape), tape)
    else:
        s_kg = T.sum_all(T.mul(score_w, v_kg, tape), tape)
        s_sg = T.sum_all(T.mul(score_w, v_sg, tape), tape)
    alpha = T.softmax(T.stack([s_kg, s_sg], tape), tape)
    fused = T.add(
        T.smul(T.index(alpha, 0, tape), v_kg, tape),
        T.smul(T.index(alpha, 1, tape), v_sg, tape),
        tape,
    )
    return fused, alpha


def classify(fused: Tensor, watched: dict, config: ModelConfig, tape: Tape = None):
    """MLP head (one hidden layer) with a softmax output; returns (probs, logits)."""
    if fused.shape != (config.fusion_input_dim,):
        raise DimensionError(
            f"fused width {fused.shape} != expected ({config.fusion_input_dim},)"
        )
    h = _nonlin(config)(
        T.add(T.matmul(watched["mlp.w1"], fused, tape), watched["mlp.b1"], tape), tape
    )
    logits = T.add(T.matmul(watched["mlp.w2"], h, tape), watched["mlp.b2"], tape)
    return T.softmax(logits, tape), logits


def run_tower(g: LabeledGraph, prefix: str, watched: dict, table: EmbeddingTable,
              config: ModelConfig, tape: Tape = None):
    """Encoder plus GCN stack plus readout for one graph; returns
    (readout tensor, final per-node states)."""
    states = encode_nodes(g, table, watched[f"{prefix}.enc"], config, tape)
    neighbors = in_neighbor_lists(g)
    for l in range(config.gcn_layers):
        states = gcn_layer(states, g, watched[f"{prefix}.gcn{l}"], config, tape,
                           neighbors=neighbors)
    return readout_sum(states, config.hidden_dim, tape), states


def forward(example, params: ModelParams, table: EmbeddingTable,
            config: ModelConfig, tape: Tape = None):
    """Full pipeline on one example; returns (probs, diagnostics).

    Diagnostics carry the attention weights (None in concat mode), both
    readouts, per-node state norms, and the traced logits.
    """
    watched = params.tensors(tape)
    prefixes = tower_prefixes(config)
    zero = Tensor(np.zeros(config.hidden_dim))
    norms = {}
    if prefixes["kg"] is not None:
        v_kg, st = run_tower(example.knowledge_graph, prefixes["kg"], watched,
                             table, config, tape)
        norms["kg"] = np.linalg.norm(st.data, axis=1) if st.shape[0] else np.zeros(0)
    else:
        v_kg, norms["kg"] = zero, np.zeros(0)
    if prefixes["sg"] is not None:
        v_sg, st = run_tower(example.scene_graph, prefixes["sg"], watched,
                             table, config, tape)
        norms["sg"] = np.linalg.norm(st.data, axis=1) if st.shape[0] else np.zeros(0)
    else:
        v_sg, norms["sg"] = zero, np.zeros(0)

    alpha = None
    if config.fusion_mode == "concat":
        fused = fuse_concat(v_kg, v_sg, tape)
    else:
        score_w = watched.get("attn.score")
        fused, alpha = attention_fuse(v_kg, v_sg, tape, score_w=score_w)
    probs, logits = classify(fused, watched, config, tape)
    diagnostics = {
        "alpha": None if alpha is None else alpha.data.copy(),
        "readout_kg": v_kg.data.copy(),
        "readout_sg": v_sg.data.copy(),
        "node_norms": norms,
        "logits": logits,
    }
    return probs, diagnostics


# ---------------------------------------------------------------------------
# checkpointing

CHECKPOINT_VERSION = 1


def save_checkpoint(path, config: ModelConfig, params: ModelParams):
    """Write config plus named parameter tensors; values round-trip bit-exact."""
    arrays = {f"param/{p.name}": p.value for p in params}
    meta = json.dumps({"version": CHECKPOINT_VERSION, "config": asdict(config)})
    buf = io.BytesIO()
    np.savez(buf, __meta__=np.frombuffer(meta.encode("utf-8"), dtype=np.uint8),
             **arrays)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path):
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {meta.get('version')}")
        config = ModelConfig(**meta["config"])
        params = ModelParams([
            Parameter(data[k].copy(), k[len("param/"):])
            for k in data.files if k.startswith("param/")
        ])
    expected = {name for name, _ in param_shapes(config)}
    if set(params.names()) != expected:
        raise ConfigError("checkpoint parameters do not match its config")
    return config, params
