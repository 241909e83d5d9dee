"""Adaptive neighbor probabilities from aggregated-score distances.

Each video row i gets a probability vector a_i over a fixed candidate
neighbor set, minimizing  sum_j d_ij a_ij + gamma_i sum_j a_ij^2  on the
probability simplex.  The minimizer is the Euclidean projection of
-d_i / (2 gamma_i) onto the simplex, so every row update is exact and in
closed form.  Rows are mutually independent given the score vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

__all__ = [
    "NeighborMatrix",
    "score_distances",
    "simplex_project",
    "update_neighbors",
    "update_neighbor_rows",
    "gamma_for_k",
    "candidate_neighbors",
    "support_size",
]

# entries at or below this are treated as zero when counting a row's support;
# matches the nudge scale used by gamma_for_k
SUPPORT_TOL = 1e-12


@dataclass
class NeighborMatrix:
    """Row-stochastic neighbor probabilities over per-row candidate sets.

    ``candidates[i]`` lists the columns row i may assign mass to (never
    including i itself); ``probs[i]`` are the matching probabilities and
    sum to 1.  ``gamma[i]`` is the row regularizer used to produce it.
    """

    candidates: np.ndarray  # (n, k_cand) int
    probs: np.ndarray  # (n, k_cand) float, rows sum to 1
    gamma: np.ndarray  # (n,) float, > 0

    @property
    def n_rows(self) -> int:
        return self.candidates.shape[0]

    def to_dense(self) -> np.ndarray:
        n = self.n_rows
        A = np.zeros((n, n))
        np.put_along_axis(A, self.candidates, self.probs, axis=1)
        return A


def score_distances(f: np.ndarray, candidates: np.ndarray, i: int) -> np.ndarray:
    """Squared aggregated-score gaps d_ij = (f_i - f_j)^2 for row i."""
    candidates = np.asarray(candidates)
    if np.any(candidates == i):
        raise ValueError(f"row {i} may not be its own candidate")
    diff = f[i] - f[candidates]
    return diff * diff


def simplex_project(v: np.ndarray, total: float = 1.0) -> np.ndarray:
    """Euclidean projection of v onto {a : a >= 0, sum(a) = total}."""
    v = np.asarray(v, dtype=np.float64)
    return _kernels.simplex_project_rows(v[None, :], total)[0]


def update_neighbors(d: np.ndarray, gamma: float) -> np.ndarray:
    """Closed-form row minimizer: simplex projection of -d / (2 gamma).

    All-zero distances give the uniform vector (the analytic limit), and
    gamma -> infinity approaches uniform for any bounded d.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    d = np.asarray(d, dtype=np.float64)
    return simplex_project(-d / (2.0 * gamma))


def update_neighbor_rows(D: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Batched update_neighbors for a (n, k_cand) distance matrix."""
    if np.any(gamma <= 0):
        raise ValueError("all gamma values must be positive")
    return _kernels.simplex_project_rows(-D / (2.0 * gamma[:, None]), 1.0)


def gamma_for_k(d: np.ndarray, k: int) -> float:
    """Row regularizer giving update_neighbors a support of exactly k.

    Uses the boundary value (k d_(k+1) - sum_{j<=k} d_(j)) / 2 on the
    ascending-sorted distances.  When ties make support exactly k
    unattainable, k is widened to the end of the tie run and the same
    boundary formula is applied, so the result has the smallest attainable
    support >= k.  Degenerate (non-positive) values are nudged to 1e-12.
    """
    d = np.sort(np.asarray(d, dtype=np.float64))
    n = d.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < {n}, got {k}")
    kk = k
    while kk < n and d[kk] == d[kk - 1]:
        kk += 1
    if kk < n:
        gamma = (kk * d[kk] - d[:kk].sum()) / 2.0
    else:
        gamma = (n * d[-1] - d.sum()) / 2.0
    if gamma <= 0.0:
        gamma += 1e-12
    return float(gamma)


def candidate_neighbors(S: np.ndarray, k_cand: int) -> np.ndarray:
    """k_cand nearest rows of S per row (Euclidean), self excluded.

    Distance ties break by ascending row index, making the candidate sets
    deterministic.  Computed once before optimization.
    """
    n = S.shape[0]
    if not 1 <= k_cand <= n - 1:
        raise ValueError(f"need 1 <= k_candidates <= {n - 1}, got {k_cand}")
    sq = np.sum(S * S, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (S @ S.T)
    np.fill_diagonal(d2, np.inf)
    idx = np.arange(n)
    order = np.lexsort((np.broadcast_to(idx, (n, n)), d2), axis=1)
    return np.ascontiguousarray(order[:, :k_cand])


def support_size(a: np.ndarray, tol: float = SUPPORT_TOL) -> int:
    """Number of entries meaningfully above zero."""
    return int(np.count_nonzero(np.asarray(a) > tol))
