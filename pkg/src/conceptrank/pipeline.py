"""End-to-end per-event ranking pipeline.

Each event runs independently: concept relevance, top-K selection, weak
labels, pseudo-label partition, score normalization, the alternating fit,
and finally the ranked test list.  Events are dispatched to a bounded
thread pool; one event's failure is recorded without aborting the others.
All shared inputs are immutable, and per-event outputs go to distinct
files, so identical configs and seeds produce byte-identical outputs.
"""

from __future__ import annotations

import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import io
from .composer import (
    SUPERVISED_COLUMN_ID,
    CompositionConfig,
    ScoreMatrix,
    fit,
    fuse_supervised,
    normalize_scores,
)
from .embeddings import EmbeddingTable, load_embeddings
from .errors import CoverageError, ValidationError
from .evaluation import (
    average_precision,
    borda_baseline,
    mean_average_precision,
    ranked_list,
)
from .query import (
    ConceptVocabulary,
    EventQuery,
    PseudoLabels,
    VideoRecord,
    concept_relevance,
    partition_pseudo,
    select_concepts,
    weak_labels,
)

__all__ = ["RunConfig", "run_rank", "run_select_concepts", "run_eval", "rank_one_event"]


def log_kv(**fields) -> None:
    """Line-delimited key=value log records on standard error."""
    print(" ".join(f"{k}={v}" for k, v in fields.items()), file=sys.stderr, flush=True)


@dataclass
class RunConfig:
    embeddings: str
    vocabulary: str
    videos: str
    scores: str
    events: str
    out_dir: str
    supervised: str | None = None
    ground_truth: str | None = None
    top_k: int = 30
    n_pos: int = 20
    n_neg: int = 100
    k_neighbors: int = 7
    k_candidates: int = 50
    gamma: float | None = None
    lambda_push: float = 1.0
    weight_cap: float | None = 1.0
    tol: float = 1e-6
    max_outer_iters: int = 100
    max_inner_iters: int = 500
    solver: str = "reference"
    seed: int = 0
    workers: int | None = None
    stdout: bool = False

    def required_paths(self) -> list[str]:
        paths = [self.embeddings, self.vocabulary, self.videos, self.scores, self.events]
        if self.supervised:
            paths.append(self.supervised)
        if self.ground_truth:
            paths.append(self.ground_truth)
        return paths

    def validate(self) -> None:
        missing = [p for p in self.required_paths() if not os.path.isfile(p)]
        if missing:
            raise ValidationError(f"missing input files: {missing}")
        if self.top_k < 1:
            raise ValidationError("top-k must be >= 1")
        if self.n_pos < 1 or self.n_neg < 1:
            raise ValidationError("n-pos and n-neg must be >= 1")
        if self.k_neighbors < 1 or self.k_candidates < 2:
            raise ValidationError("k-neighbors >= 1 and k-candidates >= 2 required")
        CompositionConfig(
            lambda_push=self.lambda_push,
            gamma=self.gamma,
            tol=self.tol,
            max_outer_iters=self.max_outer_iters,
            solver=self.solver,
            weight_cap=self.weight_cap,
        )

    def composition_config(self) -> CompositionConfig:
        return CompositionConfig(
            lambda_push=self.lambda_push,
            gamma=self.gamma,
            k_neighbors=self.k_neighbors,
            k_candidates=self.k_candidates,
            max_outer_iters=self.max_outer_iters,
            tol=self.tol,
            solver=self.solver,
            weight_cap=self.weight_cap,
            max_inner_iters=self.max_inner_iters,
            seed=self.seed,
        )


def _select_score_columns(S: ScoreMatrix, selected: list[int]) -> ScoreMatrix:
    return ScoreMatrix(
        values=S.values[:, selected],
        video_ids=list(S.video_ids),
        l=S.l,
        u=S.u,
        concept_ids=[S.concept_ids[k] for k in selected],
    )


def rank_one_event(
    event: EventQuery,
    vocab: ConceptVocabulary,
    table: EmbeddingTable,
    videos: list[VideoRecord],
    scores: ScoreMatrix,
    supervised: dict[str, float] | None,
    config: RunConfig,
):
    """Full pipeline for a single event.

    Returns (ranking, fit_result, weak_label_rows, selected_indices).
    Weak videos whose cleaned description has no vocabulary coverage are
    excluded from the pseudo-label pool (they stay in the score matrix and
    are ranked via the graph like any unlabeled row).
    """
    relevance = concept_relevance(event, vocab, table)
    k = min(config.top_k, len(vocab))
    selected = select_concepts(relevance, k, vocab)

    weak_records = [r for r in videos if r.split == "weak"]
    weak_rows = []
    covered: list[int] = []
    for idx, record in enumerate(weak_records):
        try:
            weak_rows.append((record.video_id, weak_labels(record, vocab, table)))
            covered.append(idx)
        except CoverageError:
            log_kv(
                stage="weak_labels",
                event=event.event_id,
                video=record.video_id,
                skipped="no_vocabulary_coverage",
            )
    covered_records = [weak_records[i] for i in covered]
    labels_covered = partition_pseudo(
        event, covered_records, table, config.n_pos, config.n_neg
    )
    labels = PseudoLabels(
        positives=tuple(covered[i] for i in labels_covered.positives),
        negatives=tuple(covered[i] for i in labels_covered.negatives),
    )

    S_sel = normalize_scores(_select_score_columns(scores, selected))
    w_init = relevance.values[selected]
    if supervised is not None:
        missing = [v for v in S_sel.video_ids if v not in supervised]
        if missing:
            raise ValidationError(f"supervised scores missing for videos: {missing[:10]}")
        sup_vec = np.array([supervised[v] for v in S_sel.video_ids])
        S_fit = fuse_supervised(S_sel, sup_vec)
        w_init = np.append(w_init, w_init.max() if w_init.size else 1.0)
    else:
        S_fit = S_sel

    result = fit(S_fit, labels, w_init, config.composition_config())
    ranking = ranked_list(S_fit.test_ids(), result.scores[S_fit.l :])
    return ranking, result, weak_rows, selected, S_sel


def _write_weak_labels(path: str, vocab: ConceptVocabulary, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["video_id"] + vocab.ids)
        for vid, rel in rows:
            writer.writerow([vid] + [repr(float(x)) for x in rel.values])


def run_rank(config: RunConfig) -> tuple[int, dict]:
    """Rank every event; returns (exit_code, metrics dict)."""
    config.validate()
    os.makedirs(config.out_dir, exist_ok=True)
    table = load_embeddings(config.embeddings)
    vocab = io.read_vocabulary(config.vocabulary)
    videos = io.read_videos(config.videos)
    events = io.read_events(config.events)
    scores = io.read_scores(config.scores, vocab, videos)
    supervised = io.read_supervised(config.supervised) if config.supervised else None
    truth = io.read_ground_truth(config.ground_truth) if config.ground_truth else None
    if config.top_k > len(vocab):
        log_kv(stage="rank", note="top_k_clipped", top_k=config.top_k, m=len(vocab))

    def worker(event: EventQuery):
        return rank_one_event(event, vocab, table, videos, scores, supervised, config)

    results: dict[str, tuple] = {}
    failures: dict[str, str] = {}
    max_workers = config.workers or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {e.event_id: pool.submit(worker, e) for e in events}
        for event in events:
            try:
                results[event.event_id] = futures[event.event_id].result()
            except Exception as exc:  # noqa: BLE001 - isolate per-event failures
                failures[event.event_id] = f"{type(exc).__name__}: {exc}"
                log_kv(stage="rank", event=event.event_id, error=failures[event.event_id])

    metrics: dict = {"failures": failures}
    per_event_ap: dict[str, float] = {}
    per_event_borda: dict[str, float] = {}
    for event in events:
        if event.event_id not in results:
            continue
        ranking, result, weak_rows, selected, S_sel = results[event.event_id]
        io.write_ranking(io.ranking_path(config.out_dir, event.event_id), ranking)
        _write_weak_labels(
            os.path.join(config.out_dir, f"{event.event_id}_weak_labels.csv"),
            vocab,
            weak_rows,
        )
        log_kv(
            stage="rank",
            event=event.event_id,
            iterations=result.iterations,
            converged=result.converged,
            objective=result.objective_trace[-1],
        )
        if truth is not None and event.event_id in truth:
            positives = {v for v, lab in truth[event.event_id].items() if lab == 1}
            per_event_ap[event.event_id] = average_precision(ranking, positives)
            per_event_borda[event.event_id] = average_precision(
                borda_baseline(S_sel), positives
            )
    if per_event_ap:
        report = mean_average_precision(per_event_ap)
        metrics.update(report.as_dict())
        borda_report = mean_average_precision(per_event_borda)
        metrics["borda"] = borda_report.as_dict()
    io.write_metrics(os.path.join(config.out_dir, "metrics.json"), metrics)

    if failures and not results:
        return 2, metrics
    if failures:
        return 3, metrics
    return 0, metrics


def run_select_concepts(config: RunConfig) -> tuple[int, str]:
    """Emit the per-event top-K concepts with relevance values as CSV."""
    missing = [
        p for p in (config.embeddings, config.vocabulary, config.events)
        if not os.path.isfile(p)
    ]
    if missing:
        raise ValidationError(f"missing input files: {missing}")
    os.makedirs(config.out_dir, exist_ok=True)
    table = load_embeddings(config.embeddings)
    vocab = io.read_vocabulary(config.vocabulary)
    events = io.read_events(config.events)
    path = os.path.join(config.out_dir, "selected_concepts.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["event_id", "rank", "concept_id", "relevance"])
        for event in events:
            relevance = concept_relevance(event, vocab, table)
            k = min(config.top_k, len(vocab))
            for rank, idx in enumerate(select_concepts(relevance, k, vocab), start=1):
                writer.writerow(
                    [
                        event.event_id,
                        str(rank),
                        vocab.concepts[idx].concept_id,
                        repr(float(relevance.values[idx])),
                    ]
                )
    return 0, path


def run_eval(
    rankings_dir: str, ground_truth_path: str, out_path: str | None = None
) -> tuple[int, dict]:
    """Score existing ranking files against a ground-truth file."""
    if not os.path.isfile(ground_truth_path):
        raise ValidationError(f"missing input files: ['{ground_truth_path}']")
    truth = io.read_ground_truth(ground_truth_path)
    per_event: dict[str, float] = {}
    for event_id in sorted(truth):
        path = io.ranking_path(rankings_dir, event_id)
        if not os.path.isfile(path):
            raise ValidationError(f"missing ranking file for {event_id}: {path}")
        ranking = io.read_ranking(path)
        ranked_ids = {vid for vid, _ in ranking}
        unknown = sorted(set(truth[event_id]) - ranked_ids)
        if unknown:
            raise ValidationError(
                f"ground-truth videos absent from {event_id} ranking: {unknown[:10]}"
            )
        positives = {v for v, lab in truth[event_id].items() if lab == 1}
        per_event[event_id] = average_precision(ranking, positives)
    report = mean_average_precision(per_event).as_dict()
    if out_path is None:
        out_path = os.path.join(rankings_dir, "eval_metrics.json")
    io.write_metrics(out_path, report)
    return 0, report
