"""Shared generators for solver-level tests."""

import numpy as np

from conceptrank.composer import ScoreMatrix
from conceptrank.graph import (
    NeighborMatrix,
    candidate_neighbors,
    gamma_for_k,
    update_neighbor_rows,
)
from conceptrank.query import PseudoLabels


def random_instance(rng, n_max=30, m_max=5):
    """Random normalized score matrix, pseudo labels, and neighbor graph."""
    n = int(rng.integers(6, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    l = max(2, n // 2)
    u = n - l
    vals = rng.uniform(0, 1, (n, m))
    S = ScoreMatrix(
        values=vals,
        video_ids=[f"v{i:03d}" for i in range(n)],
        l=l,
        u=u,
        concept_ids=[f"c{j}" for j in range(m)],
    )
    n_pos = int(rng.integers(1, max(2, l // 2)))
    n_neg = int(rng.integers(1, max(2, l - n_pos)))
    perm = rng.permutation(l)
    labels = PseudoLabels(
        positives=tuple(int(i) for i in perm[:n_pos]),
        negatives=tuple(int(i) for i in perm[n_pos : n_pos + n_neg]),
    )
    k_cand = min(5, n - 1)
    cands = candidate_neighbors(vals, k_cand)
    f0 = vals @ rng.uniform(0, 1, m)
    D = np.square(f0[:, None] - f0[cands])
    gammas = np.array(
        [
            gamma_for_k(D[i], min(3, k_cand - 1)) if k_cand > 1 else 1.0
            for i in range(n)
        ]
    )
    probs = update_neighbor_rows(D, gammas)
    neighbors = NeighborMatrix(candidates=cands, probs=probs, gamma=gammas)
    W0 = np.tile(rng.uniform(0, 1, m), (n, 1))
    lam = float(rng.uniform(0.3, 3.0))
    return S, labels, neighbors, W0, lam


def random_scores_and_labels(rng, n_max=40):
    n = int(rng.integers(4, n_max + 1))
    scores = rng.normal(0, 1.5, n)
    n_pos = int(rng.integers(1, max(2, n // 2)))
    n_neg = int(rng.integers(1, max(2, n - n_pos)))
    perm = rng.permutation(n)
    labels = PseudoLabels(
        positives=tuple(int(i) for i in perm[:n_pos]),
        negatives=tuple(int(i) for i in perm[n_pos : n_pos + n_neg]),
    )
    return scores, labels
