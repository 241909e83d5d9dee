"""Semantic query generation and weak supervision.

Scores concept relevance against an event query in embedding space,
selects top concepts, computes per-video weak labels from free-form
descriptions, and partitions weakly-described videos into pseudo
positives/negatives.  All operations are pure functions over immutable
inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingTable, cosine, phrase_vector
from .errors import CoverageError
from .text import clean_text, tokenize

__all__ = [
    "Concept",
    "ConceptVocabulary",
    "EventQuery",
    "RelevanceVector",
    "VideoRecord",
    "PseudoLabels",
    "concept_relevance",
    "select_concepts",
    "weak_labels",
    "partition_pseudo",
]


@dataclass(frozen=True)
class Concept:
    concept_id: str
    name: str
    source: str = ""


@dataclass(frozen=True)
class ConceptVocabulary:
    """Ordered concept list; the order is the canonical score-column order."""

    concepts: list[Concept]

    def __post_init__(self):
        ids = [c.concept_id for c in self.concepts]
        if any(not i for i in ids):
            raise ValueError("empty concept_id")
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate concept_id")

    def __len__(self) -> int:
        return len(self.concepts)

    @property
    def ids(self) -> list[str]:
        return [c.concept_id for c in self.concepts]


@dataclass(frozen=True)
class EventQuery:
    event_id: str
    name: str
    description: str = ""

    def __post_init__(self):
        if not self.event_id or not self.name:
            raise ValueError("event_id and name must be nonempty")

    def text_tokens(self) -> list[str]:
        return tokenize(self.name + " " + self.description)


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    split: str  # "weak" or "test"
    description: str = ""

    def __post_init__(self):
        if self.split not in ("weak", "test"):
            raise ValueError(f"unknown split {self.split!r}")
        if self.split == "weak" and not self.description.strip():
            raise ValueError(f"weak video {self.video_id!r} needs a description")


@dataclass(frozen=True)
class RelevanceVector:
    """Per-concept relevance in [0, 1], aligned to the vocabulary order.

    ``oov_concepts`` flags concepts whose names were fully out of
    vocabulary (their relevance is the defined fallback 0).
    """

    values: np.ndarray
    oov_concepts: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        v = self.values
        if v.ndim != 1 or np.any(v < 0.0) or np.any(v > 1.0):
            raise ValueError("relevance values must be a 1-d array within [0, 1]")


@dataclass(frozen=True)
class PseudoLabels:
    """Disjoint, nonempty index sets of pseudo positives/negatives."""

    positives: tuple[int, ...]
    negatives: tuple[int, ...]

    def __post_init__(self):
        if not self.positives or not self.negatives:
            raise ValueError("pseudo positives and negatives must be nonempty")
        if set(self.positives) & set(self.negatives):
            raise ValueError("pseudo positives and negatives overlap")


def concept_relevance(
    query: EventQuery, vocab: ConceptVocabulary, table: EmbeddingTable
) -> RelevanceVector:
    """Clamped cosine between the query phrase and each concept-name phrase.

    Negative cosines are clamped to 0 so values live in [0, 1].  Concept
    names with no in-vocabulary token get 0 and are flagged; a fully
    out-of-vocabulary query raises CoverageError.
    """
    qvec = phrase_vector(query.text_tokens(), table).vector
    return _relevance_of_phrase(qvec, vocab, table)


def weak_labels(
    record: VideoRecord, vocab: ConceptVocabulary, table: EmbeddingTable
) -> RelevanceVector:
    """Concept relevance of a weak video's cleaned description."""
    if record.split != "weak":
        raise ValueError(f"weak labels need a weak-split record, got {record.split!r}")
    dvec = phrase_vector(clean_text(record.description), table).vector
    return _relevance_of_phrase(dvec, vocab, table)


def _relevance_of_phrase(
    vec: np.ndarray, vocab: ConceptVocabulary, table: EmbeddingTable
) -> RelevanceVector:
    values = np.zeros(len(vocab))
    oov = set()
    for k, concept in enumerate(vocab.concepts):
        try:
            cvec = phrase_vector(tokenize(concept.name), table).vector
        except CoverageError:
            oov.add(k)
            continue
        values[k] = max(0.0, cosine(vec, cvec))
    return RelevanceVector(values=values, oov_concepts=frozenset(oov))


def select_concepts(w: RelevanceVector, k: int, vocab: ConceptVocabulary) -> list[int]:
    """Indices of the K largest relevances, descending, ties by concept_id."""
    m = len(vocab)
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= K <= {m}, got {k}")
    order = sorted(range(m), key=lambda i: (-w.values[i], vocab.concepts[i].concept_id))
    return order[:k]


def partition_pseudo(
    query: EventQuery,
    weak_records: list[VideoRecord],
    table: EmbeddingTable,
    n_pos: int,
    n_neg: int,
) -> PseudoLabels:
    """Split weak videos into pseudo positives/negatives by query similarity.

    Videos are ranked by cosine between the cleaned-description phrase and
    the query phrase; the top ``n_pos`` become positives and the bottom
    ``n_neg`` negatives.  Ties break by ascending video_id, which makes the
    split deterministic.
    """
    if n_pos < 1 or n_neg < 1:
        raise ValueError("n_pos and n_neg must be >= 1")
    if n_pos + n_neg > len(weak_records):
        raise ValueError(
            f"n_pos + n_neg = {n_pos + n_neg} exceeds the {len(weak_records)} weak videos"
        )
    if any(r.split != "weak" for r in weak_records):
        raise ValueError("all records must be weak-split")
    qvec = phrase_vector(query.text_tokens(), table).vector
    sims = [
        cosine(qvec, phrase_vector(clean_text(r.description), table).vector)
        for r in weak_records
    ]
    ranked = sorted(
        range(len(weak_records)),
        key=lambda i: (-sims[i], weak_records[i].video_id),
    )
    return PseudoLabels(
        positives=tuple(ranked[:n_pos]),
        negatives=tuple(ranked[len(ranked) - n_neg :]),
    )
