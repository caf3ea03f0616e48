"""Dataset bundles: per-image example documents plus a split manifest.

A bundle directory holds ``examples/<image_id>.json``, ``labels.txt`` and
``splits.json`` ({"train": [...], "val": [...], "test": [...]}).
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

from .errors import SchemaError
from .graphs import (RelationWhitelist, add_reverse_edges, build_knowledge_graph,
                     graph_from_dict, graph_to_dict, load_facts,
                     load_scene_document, load_vocab, validate_graph)
from .embeddings import normalize_token
from .rng import child_rng
from .training import Example

log = logging.getLogger(__name__)

SPLIT_FRACTIONS = (0.6, 0.2)  # train, val; the rest is test


def split_ids(ids, seed: int) -> dict:
    """Seeded 60/20/20 split of image ids."""
    ids = sorted(ids)
    order = child_rng(seed, "split").permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n = len(ids)
    n_train = int(n * SPLIT_FRACTIONS[0])
    n_val = int(n * SPLIT_FRACTIONS[1])
    return {
        "train": shuffled[:n_train],
        "val": shuffled[n_train:n_train + n_val],
        "test": shuffled[n_train + n_val:],
    }


def example_to_dict(ex: Example) -> dict:
    return {
        "image_id": ex.image_id,
        "scene_graph": graph_to_dict(ex.scene_graph),
        "knowledge_graph": graph_to_dict(ex.knowledge_graph),
        "labels": sorted(ex.labels),
    }


def example_from_dict(d: dict) -> Example:
    return Example(d["image_id"], graph_from_dict(d["scene_graph"]),
                   graph_from_dict(d["knowledge_graph"]), list(d["labels"]))


def prepare(scene_dir, facts_path, vocab_path, labels_path,
            match_tail: bool = False, reverse_edges: bool = False):
    """Build per-image examples with 1-hop knowledge graphs.

    Returns (examples sorted by image id, label list).  The knowledge-graph
    vocabulary is the vocab file plus the label names.
    """
    store = load_facts(facts_path)
    whitelist = RelationWhitelist()
    label_list = read_labels(labels_path)
    vocab = load_vocab(vocab_path) | {normalize_token(l) for l in label_list}
    label_set = set(label_list)

    examples = []
    files = sorted(Path(scene_dir).glob("*.json"))
    if not files:
        raise SchemaError(f"no scene-graph documents in {scene_dir}")
    for path in files:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
            image_id, sg, labels = load_scene_document(doc)
        except (SchemaError, json.JSONDecodeError) as exc:
            raise SchemaError(f"{path}: {exc}") from exc
        if not labels:
            raise SchemaError(f"{path}: example has no labels")
        unknown = set(labels) - label_set
        if unknown:
            raise SchemaError(f"{path}: unknown label(s) {sorted(unknown)}")
        sg = validate_graph(sg)
        if not sg.nodes:
            log.warning("image %s has no detected objects; keeping empty graphs",
                        image_id)
        kg = build_knowledge_graph(sg.nodes, store, whitelist, vocab,
                                   match_tail=match_tail)
        if reverse_edges:
            sg = add_reverse_edges(sg)
            kg = add_reverse_edges(kg)
        examples.append(Example(image_id, sg, kg, sorted(set(labels))))
    examples.sort(key=lambda ex: ex.image_id)
    ids = [ex.image_id for ex in examples]
    if len(set(ids)) != len(ids):
        raise SchemaError("duplicate image ids in scene-graph directory")
    return examples, label_list


def read_labels(path) -> list:
    with open(path, encoding="utf-8") as fh:
        labels = [line.strip() for line in fh if line.strip()]
    if len(labels) < 2:
        raise SchemaError(f"{path}: need at least 2 labels")
    return labels


def write_bundle(out_dir, examples, label_list, splits: dict):
    out = Path(out_dir)
    (out / "examples").mkdir(parents=True, exist_ok=True)
    for ex in examples:
        doc = json.dumps(example_to_dict(ex), indent=1, sort_keys=True)
        (out / "examples" / f"{ex.image_id}.json").write_text(doc + "\n",
                                                              encoding="utf-8")
    (out / "labels.txt").write_text("\n".join(label_list) + "\n", encoding="utf-8")
    (out / "splits.json").write_text(
        json.dumps(splits, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_bundle(bundle_dir):
    """Returns (splits dict of Example lists, label list)."""
    bundle = Path(bundle_dir)
    label_list = read_labels(bundle / "labels.txt")
    with open(bundle / "splits.json", encoding="utf-8") as fh:
        split_map = json.load(fh)
    by_id = {}
    for path in sorted((bundle / "examples").glob("*.json")):
        with open(path, encoding="utf-8") as fh:
            ex = example_from_dict(json.load(fh))
        by_id[ex.image_id] = ex
    splits = {}
    for name, ids in split_map.items():
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise SchemaError(f"split '{name}' lists unknown image ids: {missing[:3]}")
        splits[name] = [by_id[i] for i in ids]
    return splits, label_list
