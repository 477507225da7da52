import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_model
from oracles import brute_nearest
from pointdream.classifier import forward
from pointdream.geometry import PointCloud, union
from pointdream.metrics import (
    KdTree,
    MetricsError,
    SparsityReport,
    chamfer_directed,
    compare_runs,
    confidence_trajectory,
    coverage,
    nn_distances,
    report_json,
)

grid_coords = st.integers(-3, 3).map(float)
small_clouds = st.integers(1, 60).flatmap(lambda n: arrays(np.float32, (n, 3), elements=grid_coords)).map(PointCloud)


def rand_cloud(n, seed):
    return PointCloud(np.random.default_rng(seed).normal(size=(n, 3)))


def test_nn_distances_examples():
    assert nn_distances(PointCloud([[0, 0, 0], [1, 0, 0]])).tolist() == [1.0, 1.0]
    pc = rand_cloud(50, 0)
    assert not nn_distances(union(pc, pc)).any()
    with pytest.raises(MetricsError):
        nn_distances(PointCloud([[0, 0, 0]]))


def test_nn_distances_match_brute_force_2000():
    pc = rand_cloud(2000, 1)
    _, d2 = brute_nearest(pc.points, pc.points, exclude_self=True)
    assert np.array_equal(nn_distances(pc), np.sqrt(d2))


@pytest.mark.parametrize("seed", range(20))
def test_kdtree_equals_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 2001))
    pts = rng.normal(size=(n, 3)) * rng.uniform(0.1, 10, size=3)
    if seed % 4 == 0:
        pts = np.round(pts)  # many exact ties and duplicates
    pc = PointCloud(pts)
    queries = PointCloud(rng.normal(size=(300, 3)) * 2)
    tree = KdTree(pc)
    idx, d2 = tree.query(queries)
    bidx, bd2 = brute_nearest(pc.points, queries.points)
    assert np.array_equal(idx, bidx) and np.array_equal(d2, bd2)
    idx, d2 = tree.query(pc, exclude_self=True)
    bidx, bd2 = brute_nearest(pc.points, pc.points, exclude_self=True)
    assert np.array_equal(idx, bidx) and np.array_equal(d2, bd2)


@settings(max_examples=60)
@given(small_clouds, small_clouds)
def test_kdtree_ties_break_to_lower_index(a, b):
    idx, d2 = KdTree(a).query(b)
    bidx, bd2 = brute_nearest(a.points, b.points)
    assert np.array_equal(idx, bidx) and np.array_equal(d2, bd2)


def test_chamfer_examples():
    pc = rand_cloud(100, 2)
    assert chamfer_directed(pc, pc) == 0.0
    assert chamfer_directed(PointCloud([[0, 0, 0]]), PointCloud([[3, 4, 0]])) == 25.0
    with pytest.raises(MetricsError):
        chamfer_directed(PointCloud.empty(), pc)


@settings(max_examples=60)
@given(small_clouds, small_clouds)
def test_chamfer_zero_iff_contained(a, b):
    rows = {tuple(p) for p in b.points.tolist()}
    contained = all(tuple(p) in rows for p in a.points.tolist())
    assert (chamfer_directed(a, b) == 0.0) == contained


def test_coverage_examples():
    pc = rand_cloud(100, 3)
    assert coverage(pc, pc, 1e-9) == 1.0
    assert coverage(PointCloud([[0, 0, 0]]), PointCloud([[1, 0, 0]]), 0.5) == 0.0
    with pytest.raises(MetricsError):
        coverage(pc, pc, 0.0)


@settings(max_examples=40)
@given(small_clouds, small_clouds, st.floats(0.01, 5), st.floats(0.01, 5))
def test_coverage_monotone_in_eps(a, b, e1, e2):
    lo, hi = sorted((e1, e2))
    c_lo, c_hi = coverage(a, b, lo), coverage(a, b, hi)
    assert 0.0 <= c_lo <= c_hi <= 1.0


def test_confidence_trajectory_iter0_and_errors():
    model = random_model(0)
    pc = rand_cloud(40, 4)
    traj = confidence_trajectory(model, {0: pc}, 1)
    assert traj[0][0] == 0
    assert traj[0][1] == float(forward(model, pc)[1])
    with pytest.raises(MetricsError):
        confidence_trajectory(model, {}, 1)


def test_compare_runs_tie_and_schema():
    model = random_model(1)
    inp = rand_cloud(64, 5)
    report = compare_runs(inp, inp, inp, model, 2, eps=0.05)
    assert report["verdict"] == "tie"
    fields = set(SparsityReport.__dataclass_fields__)
    assert set(report["naive"]) == fields and set(report["add"]) == fields
    assert fields == {
        "count",
        "mean_nn",
        "median_nn",
        "max_nn",
        "chamfer_input_to_output",
        "coverage",
        "eps",
        "initial_logit",
        "initial_prob",
        "final_logit",
        "final_prob",
    }
    doc = json.loads(report_json(report))
    assert doc["naive"] == doc["add"]
    assert doc["add"]["coverage"] == 1.0 and doc["add"]["chamfer_input_to_output"] == 0.0


def test_compare_runs_verdict_directions():
    model = random_model(2)
    inp = rand_cloud(200, 6)
    rng = np.random.default_rng(0)
    spread = PointCloud(inp.points + rng.normal(scale=0.5, size=inp.points.shape))
    dense = union(inp, PointCloud(inp.points + 1e-3))
    assert compare_runs(inp, spread, dense, model, 0)["verdict"] == "ADD"
    assert compare_runs(inp, dense, spread, model, 0)["verdict"] == "naive"
