"""Local Outlier Factor novelty scoring over document vectors.

Definitions used throughout (k = n_neighbors, all distances Euclidean):

  k-distance(p)   = k-th smallest distance from p to the reference set
                    (p itself excluded when it is a member)
  neighborhood(p) = every point at distance <= k-distance(p); ties are
                    included, so the set may exceed k points
  reach(p, o)     = max(k-distance(o), d(p, o)), floored at 1e-12 so
                    exact duplicates keep lrd finite
  lrd(p)          = 1 / mean of reach(p, o) over o in neighborhood(p)
  LOF(p)          = mean of lrd(o) / lrd(p) over o in neighborhood(p)

A fitted model calibrates offset = contamination-quantile (lower tail,
linear interpolation) of the training raw scores (-LOF), and a test
point's decision score is (-LOF) - offset: negative means more outlying
than the calibrated training quantile.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateData,
    DimensionMismatch,
    InvalidParams,
    TooFewPoints,
)
from .embedding import DocVector

_DUPLICATE_FLOOR = 1e-12
_CHUNK_CELLS = 4_000_000  # distance-matrix cells held at once (~32 MB)


@dataclass
class NoveltyParams:
    n_neighbors: int = 20
    contamination: float = 0.5
    decision_threshold: float = 0.0

    def __post_init__(self):
        if self.n_neighbors < 1:
            raise InvalidParams("n_neighbors must be >= 1")
        if not 0.0 < self.contamination <= 0.5:
            raise InvalidParams("contamination must be in (0, 0.5]")


@dataclass
class DecisionScore:
    event_id: str
    score: float


@dataclass
class NoveltyModel:
    """Immutable fitted state: the training matrix plus its centered copy
    and squared norms form the exact k-NN index; lrd_cache and kdist feed
    reachability for query points."""

    train_points: np.ndarray
    n_neighbors: int
    center: np.ndarray
    centered: np.ndarray
    sq_norms: np.ndarray
    kdist: np.ndarray
    lrd_cache: np.ndarray
    train_lof: np.ndarray
    offset: float


def _as_matrix(vectors: Sequence[DocVector]) -> np.ndarray:
    rows = [np.asarray(v.values, dtype=np.float64).ravel() for v in vectors]
    width = rows[0].shape[0]
    for i, row in enumerate(rows):
        if row.shape[0] != width:
            raise DimensionMismatch(
                f"vector {vectors[i].event_id!r} has length {row.shape[0]}, expected {width}"
            )
    return np.vstack(rows)


def _distance_block(queries: np.ndarray, points: np.ndarray, point_sq: np.ndarray) -> np.ndarray:
    """Euclidean distances from each query row to every point.

    Uses the |q|^2 + |x|^2 - 2 q.x expansion for speed, then recomputes
    exactly any cell that lands within rounding noise of zero, so exact
    duplicates come out as exactly 0 and the lrd floor behaves as
    documented.
    """
    query_sq = np.einsum("ij,ij->i", queries, queries)
    d2 = query_sq[:, None] + point_sq[None, :]
    d2 -= 2.0 * (queries @ points.T)
    np.maximum(d2, 0.0, out=d2)
    noise = (query_sq[:, None] + point_sq[None, :]) * 1e-12
    suspect = d2 <= noise
    if suspect.any():
        rows, cols = np.nonzero(suspect)
        for r, c in zip(rows, cols):
            diff = queries[r] - points[c]
            d2[r, c] = float(diff @ diff)
    return np.sqrt(d2, out=d2)


def _neighborhoods(
    queries: np.ndarray,
    points: np.ndarray,
    point_sq: np.ndarray,
    k: int,
    self_offset: int | None,
) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    """k-distances and tie-inclusive neighbor index/distance lists for each
    query row. When self_offset is given, queries are rows of `points`
    starting at that index and each excludes itself."""
    n_queries = queries.shape[0]
    kdist = np.empty(n_queries, dtype=np.float64)
    neighbor_idx: list[np.ndarray] = []
    neighbor_dist: list[np.ndarray] = []
    chunk = max(1, _CHUNK_CELLS // max(1, points.shape[0]))
    for start in range(0, n_queries, chunk):
        stop = min(start + chunk, n_queries)
        dists = _distance_block(queries[start:stop], points, point_sq)
        if self_offset is not None:
            for local in range(stop - start):
                dists[local, self_offset + start + local] = np.inf
        block_kdist = np.partition(dists, k - 1, axis=1)[:, k - 1]
        kdist[start:stop] = block_kdist
        for local in range(stop - start):
            idx = np.flatnonzero(dists[local] <= block_kdist[local])
            d = dists[local, idx]
            order = np.lexsort((idx, d))
            neighbor_idx.append(idx[order])
            neighbor_dist.append(d[order])
    return kdist, neighbor_idx, neighbor_dist


def knn(
    points: np.ndarray | Sequence[Sequence[float]],
    query: np.ndarray | Sequence[float],
    k: int,
    exclude_index: int | None = None,
) -> np.ndarray:
    """Indices of the k-distance neighborhood of `query` within `points`.

    All points at distance <= the k-th smallest are returned (ties
    included), sorted by distance then index. Pass exclude_index when the
    query is itself a member of `points` so it does not count as its own
    neighbor.
    """
    if k < 1:
        raise InvalidParams("k must be >= 1")
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    q = np.asarray(query, dtype=np.float64).ravel()
    if q.shape[0] != pts.shape[1]:
        raise DimensionMismatch(f"query has length {q.shape[0]}, points have {pts.shape[1]}")
    effective = pts.shape[0] - (1 if exclude_index is not None else 0)
    if effective < k:
        raise TooFewPoints(f"need at least {k} candidate points, have {effective}")
    diff = pts - q
    dists = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    if exclude_index is not None:
        dists[exclude_index] = np.inf
    kth = np.partition(dists, k - 1)[k - 1]
    idx = np.flatnonzero(dists <= kth)
    return idx[np.lexsort((idx, dists[idx]))]


def _lrd(kdist_ref: np.ndarray, idx: np.ndarray, dist: np.ndarray) -> float:
    reach = np.maximum(kdist_ref[idx], dist)
    np.maximum(reach, _DUPLICATE_FLOOR, out=reach)
    return 1.0 / float(reach.mean())


def fit(train: Sequence[DocVector], params: NoveltyParams) -> NoveltyModel:
    """Fit LOF state on the training vectors and calibrate the score offset."""
    k = params.n_neighbors
    if len(train) <= k:
        raise TooFewPoints(f"need more than n_neighbors={k} training points, have {len(train)}")
    matrix = _as_matrix(train)
    if bool(np.all(matrix == matrix[0])):
        raise DegenerateData("all training points are identical")

    center = matrix.mean(axis=0)
    centered = matrix - center
    sq_norms = np.einsum("ij,ij->i", centered, centered)

    kdist, idx_lists, dist_lists = _neighborhoods(centered, centered, sq_norms, k, self_offset=0)
    n = matrix.shape[0]
    lrd = np.empty(n, dtype=np.float64)
    for i in range(n):
        lrd[i] = _lrd(kdist, idx_lists[i], dist_lists[i])
    lof = np.empty(n, dtype=np.float64)
    for i in range(n):
        lof[i] = float(lrd[idx_lists[i]].mean()) / lrd[i]

    offset = float(np.quantile(-lof, params.contamination))
    return NoveltyModel(
        train_points=matrix,
        n_neighbors=k,
        center=center,
        centered=centered,
        sq_norms=sq_norms,
        kdist=kdist,
        lrd_cache=lrd,
        train_lof=lof,
        offset=offset,
    )


def lof_scores(model: NoveltyModel, test: Sequence[DocVector]) -> np.ndarray:
    """Raw LOF of each test vector measured against the training set."""
    if not test:
        return np.empty(0, dtype=np.float64)
    matrix = _as_matrix(test)
    if matrix.shape[1] != model.train_points.shape[1]:
        raise DimensionMismatch(
            f"test vectors have {matrix.shape[1]} dims, model has {model.train_points.shape[1]}"
        )
    centered = matrix - model.center
    kdist, idx_lists, dist_lists = _neighborhoods(
        centered, model.centered, model.sq_norms, model.n_neighbors, self_offset=None
    )
    lof = np.empty(matrix.shape[0], dtype=np.float64)
    for i in range(matrix.shape[0]):
        lrd_x = _lrd(model.kdist, idx_lists[i], dist_lists[i])
        lof[i] = float(model.lrd_cache[idx_lists[i]].mean()) / lrd_x
    return lof


def decision_scores(model: NoveltyModel, test: Sequence[DocVector]) -> list[DecisionScore]:
    """Signed score per test vector: (-LOF) - offset, negative => novel."""
    lof = lof_scores(model, test)
    return [
        DecisionScore(vec.event_id, float(-lof[i] - model.offset))
        for i, vec in enumerate(test)
    ]


def filter_novel(scores: Sequence[DecisionScore], threshold: float = 0.0) -> list[str]:
    """Event ids whose score is strictly below the threshold, input order."""
    return [s.event_id for s in scores if s.score < threshold]
