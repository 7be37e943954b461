"""Open-set queries against a surfel map.

A query is a unit vector in concept space. Every map point gets a cosine
score, a threshold policy turns scores into a mask, and the masked points
are grouped into spatial clusters (connected components at radius eps, small
components dropped). Scores are computed in float64 regardless of how the
concepts are stored, so results match a naive per-point loop to far better
than 1e-9.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import DegenerateFeatureError, InputError
from .geometry import COSINE_EPS, ConceptVector
from .fusion import SurfelMap

# Spatial grouping defaults: points closer than eps are the same object
# candidate; components below min_points are discarded as noise.
CLUSTER_EPS_M = 0.05
CLUSTER_MIN_POINTS = 10

_SCORE_CHUNK = 131072


@dataclass(frozen=True)
class ThresholdPolicy:
    """How to binarize scores.

    kind is one of "fixed" (keep scores >= value), "mean_std" (keep scores
    >= mean + value * std), or "percentile" (keep the top value percent).
    """

    kind: str = "mean_std"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("fixed", "mean_std", "percentile"):
            raise InputError(f"unknown threshold policy {self.kind!r}")
        if self.kind == "percentile" and not 0 < self.value <= 100:
            raise InputError("percentile must be in (0, 100]")

    @staticmethod
    def fixed(value: float) -> "ThresholdPolicy":
        return ThresholdPolicy("fixed", value)

    @staticmethod
    def mean_std(k: float = 1.0) -> "ThresholdPolicy":
        return ThresholdPolicy("mean_std", k)

    @staticmethod
    def percentile(p: float) -> "ThresholdPolicy":
        return ThresholdPolicy("percentile", p)

    def cutoff(self, scores: np.ndarray) -> float:
        """The score value at which this policy starts keeping points."""
        if self.kind == "fixed":
            return float(self.value)
        if scores.size == 0:
            return float("inf")
        if self.kind == "mean_std":
            return float(scores.mean() + self.value * scores.std())
        return float(np.percentile(scores, 100.0 - self.value))


@dataclass
class ClusterRegion:
    """One connected group of retained points."""

    indices: np.ndarray  # map point indices, ascending
    centroid: np.ndarray  # (3,)
    aabb_min: np.ndarray  # (3,)
    aabb_max: np.ndarray  # (3,)
    peak_score: float
    mean_score: float

    @property
    def size(self) -> int:
        return int(self.indices.size)


@dataclass
class QueryResult:
    scores: np.ndarray  # (N,) float64, one per map point
    threshold: float
    clusters: list[ClusterRegion] = field(default_factory=list)

    def to_dict(self, *, score_stride: int = 1) -> dict:
        """JSON-ready form; the service returns exactly this structure.

        An empty map has no threshold; it serializes as null.
        """
        if score_stride < 1:
            raise InputError("score_stride must be >= 1")
        threshold = float(self.threshold)
        return {
            "point_count": int(self.scores.size),
            "score_stride": int(score_stride),
            "scores": [float(s) for s in self.scores[::score_stride]],
            "threshold": threshold if np.isfinite(threshold) else None,
            "clusters": [
                {
                    "indices": [int(i) for i in c.indices],
                    "centroid": [float(x) for x in c.centroid],
                    "aabb": {
                        "min": [float(x) for x in c.aabb_min],
                        "max": [float(x) for x in c.aabb_max],
                    },
                    "peak_score": float(c.peak_score),
                    "mean_score": float(c.mean_score),
                    "size": c.size,
                }
                for c in self.clusters
            ],
        }


def score_map(surfels: SurfelMap, query: ConceptVector) -> np.ndarray:
    """Cosine score of every stored concept against the query.

    Stored concepts are unnormalized running means; their norms are taken
    here (cached on the map), with the same epsilon guard as
    :func:`surfelmap.geometry.cosine_similarity`. The query is used as
    given: normalizing it first would move the epsilon term and shift
    scores by a few parts in 1e9.
    """
    q = query if isinstance(query, ConceptVector) else ConceptVector(query)
    if q.norm() == 0.0:
        raise DegenerateFeatureError("query vector has zero norm")
    if q.dim != surfels.dim:
        raise InputError(f"query dim {q.dim} != map dim {surfels.dim}")
    n = surfels.count
    if n == 0:
        return np.empty(0, dtype=np.float64)
    qv = q.values
    qnorm = float(np.linalg.norm(qv))
    concepts = surfels.concepts
    norms = surfels.concept_norms()
    dots = np.empty(n, dtype=np.float64)
    for lo in range(0, n, _SCORE_CHUNK):
        hi = min(lo + _SCORE_CHUNK, n)
        dots[lo:hi] = concepts[lo:hi].astype(np.float64) @ qv
    return dots / (norms * qnorm + COSINE_EPS)


def click_query(surfels: SurfelMap, index: int) -> ConceptVector:
    """Turn a clicked map point into a query: its concept, normalized."""
    if surfels.count == 0:
        raise InputError("cannot click into an empty map")
    if not 0 <= index < surfels.count:
        raise InputError(f"click index {index} out of range [0, {surfels.count})")
    concept = surfels.concepts[index].astype(np.float64)
    norm = float(np.linalg.norm(concept))
    if norm == 0.0:
        raise DegenerateFeatureError(f"point {index} has a zero concept vector")
    return ConceptVector(concept / norm, normalized=True)


def threshold_scores(scores: np.ndarray, policy: ThresholdPolicy) -> np.ndarray:
    """Boolean keep-mask for the given policy; the cutoff is inclusive."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        return np.zeros(0, dtype=bool)
    return scores >= policy.cutoff(scores)


def cluster_regions(
    surfels: SurfelMap,
    mask: np.ndarray,
    scores: np.ndarray,
    *,
    eps: float = CLUSTER_EPS_M,
    min_points: int = CLUSTER_MIN_POINTS,
    top_k: int | None = None,
) -> list[ClusterRegion]:
    """Group retained points into eps-connected components.

    Single linkage: two points are in one cluster iff a chain of retained
    points with hops <= eps connects them. Components smaller than
    min_points are discarded. Clusters come back sorted by peak score
    descending (ties on the smallest member index) and truncated to top_k.
    """
    if eps <= 0:
        raise InputError("eps must be positive")
    if min_points < 1:
        raise InputError("min_points must be >= 1")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (surfels.count,):
        raise InputError("mask length must equal the map point count")
    kept = np.flatnonzero(mask)
    if kept.size == 0:
        return []
    pts = surfels.positions[kept]
    tree = cKDTree(pts)
    pairs = tree.query_pairs(r=eps, output_type="ndarray")
    m = kept.size
    if pairs.size:
        graph = coo_matrix(
            (np.ones(pairs.shape[0], dtype=np.int8), (pairs[:, 0], pairs[:, 1])),
            shape=(m, m),
        )
        _, labels = connected_components(graph, directed=False)
    else:
        labels = np.arange(m)

    clusters: list[ClusterRegion] = []
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    boundaries = np.flatnonzero(np.diff(sorted_labels)) + 1
    for group in np.split(order, boundaries):
        if group.size < min_points:
            continue
        idx = np.sort(kept[group])
        p = surfels.positions[idx]
        s = scores[idx]
        clusters.append(
            ClusterRegion(
                indices=idx,
                centroid=p.mean(axis=0),
                aabb_min=p.min(axis=0),
                aabb_max=p.max(axis=0),
                peak_score=float(s.max()),
                mean_score=float(s.mean()),
            )
        )
    clusters.sort(key=lambda c: (-c.peak_score, int(c.indices[0])))
    if top_k is not None:
        if top_k < 1:
            raise InputError("top_k must be >= 1")
        clusters = clusters[:top_k]
    return clusters


def query(
    surfels: SurfelMap,
    vector,
    *,
    policy: ThresholdPolicy | None = None,
    eps: float = CLUSTER_EPS_M,
    min_points: int = CLUSTER_MIN_POINTS,
    top_k: int | None = None,
) -> QueryResult:
    """Score, threshold, and cluster in one go, under the map's read lock."""
    policy = policy or ThresholdPolicy()
    with surfels.reader():
        scores = score_map(surfels, vector)
        if scores.size == 0:
            return QueryResult(scores=scores, threshold=float("inf"), clusters=[])
        cutoff = policy.cutoff(scores)
        mask = scores >= cutoff
        clusters = cluster_regions(
            surfels, mask, scores, eps=eps, min_points=min_points, top_k=top_k
        )
        return QueryResult(scores=scores, threshold=cutoff, clusters=clusters)
