"""Pretrained word-embedding store and phrase/cosine primitives.

The embedding file format is plain text: one ``token SP float ... float``
record per line, UTF-8, LF line endings, constant arity.  Tables are
immutable after load and safe for concurrent reads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageError, FormatError

__all__ = ["EmbeddingTable", "PhraseVector", "load_embeddings", "phrase_vector", "cosine"]


@dataclass(frozen=True)
class EmbeddingTable:
    """Token -> D-dimensional vector map.

    Every stored vector has exactly ``dimension`` finite components and is
    nonzero; tokens are unique, nonempty, lowercase.
    """

    dimension: int
    vectors: dict[str, np.ndarray] = field(repr=False)
    duplicate_count: int = 0

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, token: str) -> np.ndarray | None:
        return self.vectors.get(token)


def load_embeddings(path: str) -> EmbeddingTable:
    """Load an embedding table from a whitespace-delimited text file.

    Duplicate tokens keep the last occurrence and increment the table's
    ``duplicate_count``.  Raises FormatError on inconsistent arity, a zero
    vector, an unparsable float, or an empty file.
    """
    vectors: dict[str, np.ndarray] = {}
    dimension = None
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split(" ")
            if len(parts) < 2:
                raise FormatError(f"{path}:{lineno}: expected 'token value...' record")
            token = parts[0].lower()
            if not token:
                raise FormatError(f"{path}:{lineno}: empty token")
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad float: {exc}") from None
            if dimension is None:
                dimension = vec.shape[0]
            elif vec.shape[0] != dimension:
                raise FormatError(
                    f"{path}:{lineno}: expected {dimension} values, got {vec.shape[0]}"
                )
            if not np.all(np.isfinite(vec)):
                raise FormatError(f"{path}:{lineno}: non-finite value")
            if not np.any(vec):
                raise FormatError(f"{path}:{lineno}: zero vector")
            if token in vectors:
                duplicates += 1
            vec.setflags(write=False)
            vectors[token] = vec
    if dimension is None:
        raise FormatError(f"{path}: no entries")
    return EmbeddingTable(dimension=dimension, vectors=vectors, duplicate_count=duplicates)


@dataclass(frozen=True)
class PhraseVector:
    """Unit-norm mean of the in-vocabulary token vectors of a phrase."""

    vector: np.ndarray
    covered_tokens: int


def phrase_vector(tokens: list[str], table: EmbeddingTable) -> PhraseVector:
    """Average in-vocabulary token vectors and L2-normalize.

    Out-of-vocabulary tokens are skipped; raises CoverageError when no
    token is covered (the caller decides the fallback) or when the covered
    vectors cancel to zero.
    """
    hits = [table.vectors[t] for t in tokens if t in table.vectors]
    if not hits:
        raise CoverageError(f"no in-vocabulary token among {tokens!r}")
    mean = np.mean(hits, axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0.0:
        raise CoverageError(f"token vectors of {tokens!r} cancel to zero")
    return PhraseVector(vector=mean / norm, covered_tokens=len(hits))


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity, clamped into [-1, 1] against rounding."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine undefined for the zero vector")
    if np.array_equal(u, v):
        return 1.0
    return float(min(1.0, max(-1.0, np.dot(u, v) / (nu * nv))))
