"""Scoring, thresholding, and clustering against loop-based references.

score_map stores concepts in float32 but must reproduce the float64
per-point loop to 1e-9; clustering must carve exactly the same
eps-connected components as the union-find oracle.
"""

from __future__ import annotations

import numpy as np
import pytest

import oracles
from conftest import random_map
from surfelmap import (
    ConceptVector,
    DegenerateFeatureError,
    InputError,
    SurfelMap,
    ThresholdPolicy,
    click_query,
    cluster_regions,
    query,
    score_map,
    threshold_scores,
)


def test_scores_match_float64_loop(rng):
    for _ in range(5):
        n = int(rng.integers(1, 400))
        dim = int(rng.integers(2, 33))
        surfels = random_map(rng, n, dim)
        qv = ConceptVector(rng.normal(size=dim))
        got = score_map(surfels, qv)
        want = oracles.naive_scores(surfels.concepts, qv.values)
        np.testing.assert_allclose(got, want, atol=1e-9, rtol=0)


def test_scores_zero_concept_is_zero():
    surfels = SurfelMap(dim=3)
    surfels.extend(
        np.zeros((1, 3)), np.array([[0.0, 0.0, 1.0]]), np.ones(1),
        np.zeros((1, 3), dtype=np.float32),
    )
    got = score_map(surfels, ConceptVector(np.array([1.0, 0.0, 0.0])))
    assert got[0] == 0.0


def test_scores_empty_map():
    got = score_map(SurfelMap(dim=4), ConceptVector(np.ones(4)))
    assert got.shape == (0,)


def test_scores_dim_mismatch():
    with pytest.raises(InputError):
        score_map(SurfelMap(dim=4), ConceptVector(np.ones(3)))


# -- threshold policies ----------------------------------------------------


def test_fixed_policy_inclusive():
    scores = np.array([0.1, 0.5, 0.9])
    mask = threshold_scores(scores, ThresholdPolicy.fixed(0.5))
    np.testing.assert_array_equal(mask, [False, True, True])


def test_mean_std_policy(rng):
    scores = rng.normal(size=500)
    policy = ThresholdPolicy.mean_std(1.5)
    cutoff = policy.cutoff(scores)
    assert cutoff == pytest.approx(scores.mean() + 1.5 * scores.std())
    np.testing.assert_array_equal(threshold_scores(scores, policy),
                                  scores >= cutoff)


def test_default_policy_is_mean_plus_one_std(rng):
    scores = rng.normal(size=100)
    assert ThresholdPolicy().cutoff(scores) == pytest.approx(
        scores.mean() + scores.std()
    )


def test_percentile_policy(rng):
    scores = rng.normal(size=1000)
    mask = threshold_scores(scores, ThresholdPolicy.percentile(10.0))
    # the top decile, within the rounding of the percentile estimate
    assert 95 <= mask.sum() <= 105
    all_of_it = threshold_scores(scores, ThresholdPolicy.percentile(100.0))
    assert all_of_it.all()


def test_policy_validation():
    with pytest.raises(InputError):
        ThresholdPolicy("median", 1.0)
    with pytest.raises(InputError):
        ThresholdPolicy.percentile(0.0)
    with pytest.raises(InputError):
        ThresholdPolicy.percentile(101.0)


# -- clustering ------------------------------------------------------------


def clusters_as_sets(clusters):
    return {frozenset(int(i) for i in c.indices) for c in clusters}


def test_clusters_match_union_find(rng):
    for _ in range(10):
        n = int(rng.integers(5, 120))
        surfels = SurfelMap(dim=2)
        # tight spread so eps actually links points into components
        positions = rng.uniform(-0.4, 0.4, size=(n, 3))
        z = np.tile([0.0, 0.0, 1.0], (n, 1))
        surfels.extend(positions, z, np.ones(n),
                       rng.normal(size=(n, 2)).astype(np.float32))
        scores = rng.uniform(size=n)
        mask = np.ones(n, dtype=bool)
        eps = float(rng.uniform(0.03, 0.12))
        min_points = int(rng.integers(1, 6))

        got = cluster_regions(surfels, mask, scores, eps=eps,
                              min_points=min_points)
        want = oracles.connected_clusters(positions, eps, min_points)
        assert clusters_as_sets(got) == {frozenset(g) for g in want}


def test_clusters_respect_mask(rng):
    surfels = random_map(rng, 50, 2, spread=0.01)
    scores = np.linspace(0.0, 1.0, 50)
    mask = scores >= 0.5
    clusters = cluster_regions(surfels, mask, scores, eps=1.0, min_points=1)
    included = {int(i) for c in clusters for i in c.indices}
    assert included == set(np.flatnonzero(mask).tolist())


def test_cluster_statistics():
    surfels = SurfelMap(dim=2)
    positions = np.array([
        [0.0, 0.0, 0.0], [0.04, 0.0, 0.0], [0.08, 0.0, 0.0],
    ])
    z = np.tile([0.0, 0.0, 1.0], (3, 1))
    surfels.extend(positions, z, np.ones(3),
                   np.zeros((3, 2), dtype=np.float32))
    scores = np.array([0.2, 0.9, 0.4])
    (cluster,) = cluster_regions(surfels, np.ones(3, dtype=bool), scores,
                                 eps=0.05, min_points=3)
    np.testing.assert_array_equal(cluster.indices, [0, 1, 2])
    np.testing.assert_allclose(cluster.centroid, [0.04, 0.0, 0.0])
    np.testing.assert_allclose(cluster.aabb_min, [0.0, 0.0, 0.0])
    np.testing.assert_allclose(cluster.aabb_max, [0.08, 0.0, 0.0])
    assert cluster.peak_score == pytest.approx(0.9)
    assert cluster.mean_score == pytest.approx(0.5)
    assert cluster.size == 3


def test_clusters_sorted_by_peak_then_first_index():
    surfels = SurfelMap(dim=2)
    # two separated pairs with equal peak scores
    positions = np.array([
        [0.0, 0.0, 0.0], [0.01, 0.0, 0.0],
        [1.0, 0.0, 0.0], [1.01, 0.0, 0.0],
        [2.0, 0.0, 0.0], [2.01, 0.0, 0.0],
    ])
    z = np.tile([0.0, 0.0, 1.0], (6, 1))
    surfels.extend(positions, z, np.ones(6),
                   np.zeros((6, 2), dtype=np.float32))
    scores = np.array([0.5, 0.5, 0.9, 0.1, 0.5, 0.5])
    clusters = cluster_regions(surfels, np.ones(6, dtype=bool), scores,
                               eps=0.05, min_points=2)
    assert [int(c.indices[0]) for c in clusters] == [2, 0, 4]
    top = cluster_regions(surfels, np.ones(6, dtype=bool), scores,
                          eps=0.05, min_points=2, top_k=1)
    assert len(top) == 1
    assert int(top[0].indices[0]) == 2


def test_min_points_discards_small_groups():
    surfels = SurfelMap(dim=2)
    positions = np.array([
        [0.0, 0.0, 0.0], [0.01, 0.0, 0.0], [0.02, 0.0, 0.0],
        [5.0, 0.0, 0.0],
    ])
    z = np.tile([0.0, 0.0, 1.0], (4, 1))
    surfels.extend(positions, z, np.ones(4),
                   np.zeros((4, 2), dtype=np.float32))
    scores = np.ones(4)
    clusters = cluster_regions(surfels, np.ones(4, dtype=bool), scores,
                               eps=0.05, min_points=3)
    assert len(clusters) == 1
    assert clusters[0].size == 3


# -- click queries ---------------------------------------------------------


def test_click_query_normalizes(rng):
    surfels = random_map(rng, 10, 4)
    vec = click_query(surfels, 3)
    assert vec.norm() == pytest.approx(1.0, abs=1e-12)
    want = surfels.concepts[3].astype(np.float64)
    want /= np.linalg.norm(want)
    np.testing.assert_allclose(vec.values, want, atol=1e-12)


def test_click_query_errors(rng):
    with pytest.raises(InputError):
        click_query(SurfelMap(dim=4), 0)
    surfels = random_map(rng, 5, 4)
    with pytest.raises(InputError):
        click_query(surfels, 5)
    with pytest.raises(InputError):
        click_query(surfels, -1)
    zeroed = SurfelMap(dim=2)
    zeroed.extend(np.zeros((1, 3)), np.array([[0.0, 0.0, 1.0]]), np.ones(1),
                  np.zeros((1, 2), dtype=np.float32))
    with pytest.raises(DegenerateFeatureError):
        click_query(zeroed, 0)


# -- the full query path ---------------------------------------------------


def planted_map(rng):
    """Two clumps with orthogonal concepts over a noise background."""
    surfels = SurfelMap(dim=8)
    z = np.array([0.0, 0.0, 1.0])
    for center, axis in [((0.0, 0.0, 1.0), 0), ((1.0, 0.0, 1.0), 1)]:
        n = 40
        pos = np.asarray(center) + rng.normal(size=(n, 3)) * 0.01
        feats = np.zeros((n, 8))
        feats[:, axis] = 1.0
        feats += rng.normal(size=(n, 8)) * 0.02
        surfels.extend(pos, np.tile(z, (n, 1)), np.ones(n),
                       feats.astype(np.float32))
    n = 60
    pos = rng.uniform(-3.0, 3.0, size=(n, 3))
    feats = rng.normal(size=(n, 8)) * 0.1 + 0.3
    surfels.extend(pos, np.tile(z, (n, 1)), np.ones(n),
                   feats.astype(np.float32))
    return surfels


def test_query_finds_planted_object(rng):
    surfels = planted_map(rng)
    result = query(surfels, ConceptVector(np.eye(8)[0]))
    assert result.clusters
    best = result.clusters[0]
    # the clump around the origin, nothing else
    assert set(int(i) for i in best.indices) == set(range(40))
    assert np.isfinite(result.threshold)
    assert result.scores.shape == (surfels.count,)


def test_query_empty_map():
    result = query(SurfelMap(dim=4), ConceptVector(np.ones(4)))
    assert result.scores.shape == (0,)
    assert result.clusters == []
    assert not np.isfinite(result.threshold)


def test_query_result_to_dict(rng):
    surfels = planted_map(rng)
    result = query(surfels, ConceptVector(np.eye(8)[1]))
    payload = result.to_dict(score_stride=7)
    assert payload["point_count"] == surfels.count
    assert len(payload["scores"]) == len(range(0, surfels.count, 7))
    assert payload["threshold"] == pytest.approx(result.threshold)
    c = payload["clusters"][0]
    assert set(c) == {"indices", "centroid", "aabb", "peak_score",
                      "mean_score", "size"}
    empty = query(SurfelMap(dim=4), ConceptVector(np.ones(4)))
    assert empty.to_dict()["threshold"] is None


def test_query_rejects_zero_vector():
    with pytest.raises(DegenerateFeatureError):
        query(SurfelMap(dim=4), ConceptVector(np.zeros(4)))
