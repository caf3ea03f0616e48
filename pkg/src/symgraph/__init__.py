"""Scene-graph + knowledge-graph symbolic image classification.

Two GCN towers encode a per-image scene graph and a commonsense knowledge
graph; their sum readouts are fused (concatenation+product or norm-softmax
attention) and classified by an MLP softmax head, trained with plain SGD on
a taped reverse-mode autodiff core.
"""

from .embeddings import EmbeddingTable, embed_phrase, load_embeddings
from .evaluation import MetricsReport, ThresholdPolicy, f_scores, predict_labels
from .graphs import (DEFAULT_RELATIONS, FactStore, GraphEdge, GraphNode,
                     LabeledGraph, RelationWhitelist, build_knowledge_graph,
                     load_scene_graph, validate_graph)
from .model import (ModelConfig, ModelParams, attention_fuse, classify,
                    encode_nodes, forward, fuse_concat, gcn_layer, init_params,
                    param_count, readout_sum)
from .tensor import Parameter, Tape, Tensor, backward, sgd_step
from .training import Example, RunLog, TrainConfig, loss, train, train_epoch

__version__ = "0.1.0"
