"""Fixed word-embedding table with phrase averaging and OOV-to-zero lookup."""

from __future__ import annotations

import re

import numpy as np

from .errors import EmbeddingParseError
from .tensor import Tensor

_WS = re.compile(r"\s+")
_SPLIT = re.compile(r"[\s_]+")


def normalize_token(token: str) -> str:
    """Lowercase, trim, collapse inner whitespace, underscores to spaces."""
    return _WS.sub(" ", token.replace("_", " ").strip().lower())


class EmbeddingTable:
    """token -> fixed vector of width ``dim``; read-only after construction."""

    def __init__(self, dim: int, entries: dict[str, np.ndarray]):
        self.dim = dim
        self.entries = {}
        for token, vec in entries.items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (dim,):
                raise EmbeddingParseError(
                    f"vector for '{token}' has length {vec.size}, expected {dim}"
                )
            key = normalize_token(token)
            if key not in self.entries:
                self.entries[key] = vec

    def __contains__(self, token):
        return normalize_token(token) in self.entries

    def __len__(self):
        return len(self.entries)

    def lookup_word(self, word: str):
        return self.entries.get(normalize_token(word))


def load_embeddings(path, dim: int = 300) -> EmbeddingTable:
    """Parse a text embedding file: one token then ``dim`` floats per line.

    Duplicate tokens keep the first occurrence; malformed lines raise with
    their line number.
    """
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split(" ")
            if len(fields) != dim + 1:
                raise EmbeddingParseError(
                    f"{path}:{lineno}: expected token + {dim} floats, "
                    f"got {len(fields) - 1} values"
                )
            token = fields[0]
            try:
                vec = np.array([float(v) for v in fields[1:]], dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingParseError(f"{path}:{lineno}: {exc}") from exc
            key = normalize_token(token)
            if key and key not in entries:
                entries[key] = vec
    if not entries:
        raise EmbeddingParseError(f"{path}: no embedding entries found")
    return EmbeddingTable(dim, entries)


def embed_phrase(table: EmbeddingTable, phrase: str) -> Tensor:
    """Mean of the found word vectors of a phrase; zero vector if all OOV.

    Words are split on whitespace and underscores after normalization, so
    multi-word concepts like ``part_of`` average their parts.
    """
    words = [w for w in _SPLIT.split(normalize_token(phrase)) if w]
    found = [table.entries[w] for w in words if w in table.entries]
    if not found:
        return Tensor(np.zeros(table.dim))
    return Tensor(np.mean(found, axis=0))
