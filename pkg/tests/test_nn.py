import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pointdream import nn


def leafs(tape, *values):
    return [tape.leaf(np.asarray(v, dtype=np.float32)) for v in values]


def central_diff(f, x, h):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def test_affine_examples():
    t = nn.Tape()
    x, W, b = leafs(t, [[1, 2]], np.eye(2), [3, 4])
    assert nn.affine(t, x, W, b).value.tolist() == [[4, 6]]
    x, W, b = leafs(t, np.zeros((2, 3)), np.ones((3, 4)), np.zeros(4))
    assert not nn.affine(t, x, W, b).value.any()


def test_affine_matches_triple_loop():
    rng = np.random.default_rng(0)
    xv, Wv, bv = rng.normal(size=(7, 5)), rng.normal(size=(5, 3)), rng.normal(size=3)
    t = nn.Tape()
    out = nn.affine(t, *leafs(t, xv, Wv, bv)).value
    xv, Wv, bv = (a.astype(np.float32).astype(np.float64) for a in (xv, Wv, bv))
    ref = np.zeros((7, 3))
    for i in range(7):
        for j in range(3):
            ref[i, j] = bv[j] + sum(xv[i, k] * Wv[k, j] for k in range(5))
    assert np.abs(out - ref).max() <= 1e-5


def test_affine_shape_error_names_shapes():
    t = nn.Tape()
    x, W, b = leafs(t, np.zeros((4, 3)), np.zeros((2, 5)), np.zeros(5))
    with pytest.raises(nn.ShapeError, match=r"\(4, 3\).*\(2, 5\)"):
        nn.affine(t, x, W, b)


def test_affine_batched_backward_matches_unbatched():
    rng = np.random.default_rng(1)
    xv, Wv, bv = rng.normal(size=(2, 6, 3)), rng.normal(size=(3, 4)), rng.normal(size=4)
    t = nn.Tape()
    x, W, b = leafs(t, xv, Wv, bv)
    out = nn.affine(t, x, W, b)
    t.backward(nn.softmax_cross_entropy(t, nn.max_pool_points(t, out), [1, 3]))
    gW = np.zeros((3, 4), np.float32)
    for k, lab in enumerate([1, 3]):
        t2 = nn.Tape()
        x2, W2, b2 = leafs(t2, xv[k], Wv, bv)
        t2.backward(nn.softmax_cross_entropy(t2, nn.max_pool_points(t2, nn.affine(t2, x2, W2, b2)), lab))
        assert np.allclose(x.grad[k], x2.grad / 2, atol=1e-6)
        gW += W2.grad / 2
    assert np.allclose(W.grad, gW, atol=1e-6)


def test_relu_forward_and_mask():
    t = nn.Tape()
    (x,) = leafs(t, [-1, 0, 2])
    assert nn.relu(t, x).value.tolist() == [0, 0, 2]
    t = nn.Tape()
    (x,) = leafs(t, [[-1, 2]])
    y = nn.relu(t, x)
    W, b = leafs(t, [[5], [5]], [0])
    t.backward(nn.affine(t, y, W, b))
    assert x.grad.tolist() == [[0, 5]]


def test_relu_gradient_zero_at_kink():
    t = nn.Tape()
    x, W, b = leafs(t, [[0.0, 1.0]], [[1.0], [1.0]], [0.0])
    t.backward(nn.affine(t, nn.relu(t, x), W, b))
    assert x.grad.tolist() == [[0.0, 1.0]]


def test_relu_finite_differences_away_from_kink():
    rng = np.random.default_rng(2)
    xv = rng.normal(size=(4, 6))
    xv[np.abs(xv) < 0.1] = 0.5
    wv = rng.normal(size=(6, 1))
    t = nn.Tape()
    x, W, b = leafs(t, xv, wv, [0.0])
    t.backward(nn.max_pool_points(t, nn.affine(t, nn.relu(t, x), W, b)))
    ref = central_diff(lambda z: (np.maximum(z, 0) @ wv.astype(np.float32)).max(), xv.astype(np.float32), 1e-3)
    assert np.abs(x.grad - ref).max() <= 1e-2


def test_max_pool_examples():
    t = nn.Tape()
    (x,) = leafs(t, [[1, 5], [3, 2]])
    y = nn.max_pool_points(t, x)
    assert y.value.tolist() == [3, 5]
    assert y.cache.tolist() == [1, 0]
    W, b = leafs(t, [[1], [1]], [0])
    t.backward(nn.affine(t, y, W, b))
    assert x.grad.tolist() == [[0, 1], [1, 0]]


def test_max_pool_tie_goes_to_lowest_index():
    t = nn.Tape()
    (x,) = leafs(t, [[2], [2]])
    y = nn.max_pool_points(t, x)
    assert y.cache.tolist() == [0]
    W, b = leafs(t, [[1]], [0])
    t.backward(nn.affine(t, y, W, b))
    assert x.grad.tolist() == [[1], [0]]


def test_max_pool_empty_set():
    t = nn.Tape()
    (x,) = leafs(t, np.zeros((0, 4)))
    with pytest.raises(nn.ShapeError, match="empty set"):
        nn.max_pool_points(t, x)


@settings(max_examples=50)
@given(arrays(np.float32, st.tuples(st.integers(1, 30), st.integers(1, 8)), elements=st.floats(-1e3, 1e3, width=32)), st.randoms())
def test_max_pool_permutation_invariant(xv, rnd):
    perm = list(range(len(xv)))
    rnd.shuffle(perm)
    t = nn.Tape()
    a = nn.max_pool_points(t, t.leaf(xv)).value
    b = nn.max_pool_points(t, t.leaf(xv[perm])).value
    assert a.tobytes() == b.tobytes()


def test_softmax_cross_entropy_examples():
    t = nn.Tape()
    (z,) = leafs(t, [0, 0])
    loss = nn.softmax_cross_entropy(t, z, 0)
    assert float(loss.value) == pytest.approx(math.log(2), abs=1e-6)
    t.backward(loss)
    assert np.allclose(z.grad, [-0.5, 0.5])
    t = nn.Tape()
    (z,) = leafs(t, [10, -10])
    loss = nn.softmax_cross_entropy(t, z, 0)
    assert float(loss.value) == pytest.approx(math.log1p(math.exp(-20)), rel=1e-5)
    assert float(loss.value) == pytest.approx(2.061e-9, rel=1e-3)


def test_softmax_cross_entropy_label_range():
    t = nn.Tape()
    (z,) = leafs(t, [0, 0, 0])
    with pytest.raises(ValueError, match="out of range"):
        nn.softmax_cross_entropy(t, z, 3)
    with pytest.raises(ValueError, match="out of range"):
        nn.softmax_cross_entropy(t, z, -1)


def test_softmax_cross_entropy_finite_differences():
    rng = np.random.default_rng(3)
    for trial in range(5):
        zv = rng.normal(scale=2.0, size=5)
        label = trial % 5
        t = nn.Tape()
        (z,) = leafs(t, zv)
        t.backward(nn.softmax_cross_entropy(t, z, label))

        def ref(v):
            v = v - v.max()
            return -(v[label] - np.log(np.exp(v).sum()))

        fd = central_diff(ref, zv.astype(np.float32), 1e-4)
        assert np.allclose(z.grad, fd, rtol=1e-3, atol=1e-6)


def test_backward_linear_and_disconnected():
    t = nn.Tape()
    x, w, b = leafs(t, [[1, 2]], [[3], [4]], [0])
    (unused,) = leafs(t, np.ones((2, 2)))
    out = nn.affine(t, x, w, b)
    grads = t.backward(out)
    assert x.grad.tolist() == [[3, 4]]
    assert grads[unused].shape == (2, 2) and not grads[unused].any()


def test_backward_requires_scalar():
    t = nn.Tape()
    (x,) = leafs(t, [1, 2])
    with pytest.raises(nn.ShapeError, match="scalar"):
        t.backward(nn.relu(t, x))


def test_backward_visits_ops_in_reverse():
    t = nn.Tape()
    x, W, b = leafs(t, np.ones((3, 2)), np.ones((2, 2)), np.zeros(2))
    h = nn.relu(t, nn.affine(t, x, W, b))
    out = nn.select(t, nn.max_pool_points(t, h), 1)
    t.backward(out)
    assert t.visited == [3, 2, 1, 0]
    assert [op[0] for op in t.ops] == ["affine", "relu", "max_pool_points", "select"]


def test_non_finite_forward_is_reported_with_op_name():
    t = nn.Tape()
    x, W, b = leafs(t, [[1e30, 1e30]], [[1e30], [1e30]], [0])
    with np.errstate(over="ignore"):
        with pytest.raises(nn.NonFiniteError, match="affine"):
            nn.affine(t, x, W, b)


def test_select_bounds():
    t = nn.Tape()
    (z,) = leafs(t, [1, 2, 3])
    assert float(nn.select(t, z, 2).value) == 3
    with pytest.raises(ValueError):
        nn.select(t, z, 3)
