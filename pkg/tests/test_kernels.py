import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from czoom import _kernels_py
from czoom._backend import BACKEND, kernels

from oracles import ref_iou, ref_star_cover

try:
    from czoom import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_c = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def rand_boxes(rng, n, span=100.0):
    xy = rng.uniform(0, span, size=(n, 2))
    wh = rng.uniform(1, 40, size=(n, 2))
    return np.hstack([xy, xy + wh])


@st.composite
def adjacency(draw, max_n=10):
    n = draw(st.integers(0, max_n))
    upper = draw(arrays(bool, (n, n)))
    a = np.triu(upper, 1)
    return a | a.T


def test_backend_reported():
    assert BACKEND in ("cython", "python")
    assert kernels.NAME == BACKEND


def test_iou_matrix_matches_reference():
    rng = np.random.default_rng(0)
    a, b = rand_boxes(rng, 7), rand_boxes(rng, 5)
    m = _kernels_py.iou_matrix(a, b)
    for i in range(7):
        for j in range(5):
            assert m[i, j] == ref_iou(a[i], b[j])


def test_crowd_uses_detection_area():
    d = np.array([[0.0, 0.0, 10.0, 10.0]])
    g = np.array([[0.0, 0.0, 100.0, 100.0]])
    assert _kernels_py.iou_matrix(d, g, crowd=np.array([True]))[0, 0] == 1.0
    assert _kernels_py.iou_matrix(d, g, crowd=np.array([False]))[0, 0] == 0.01


@settings(max_examples=200, deadline=None)
@given(adjacency(), st.integers(1, 3))
def test_star_cover_matches_graph_reference(adj, min_degree):
    got = _kernels_py.star_cover(adj, min_degree)
    assert got == ref_star_cover(adj.tolist(), min_degree)
    flat = [m for g in got for m in g]
    assert len(flat) == len(set(flat))


def test_star_cover_tie_goes_to_lowest_index():
    # path 0-1-2-3: nodes 1 and 2 both have degree 2
    adj = np.zeros((4, 4), bool)
    for i, j in [(0, 1), (1, 2), (2, 3)]:
        adj[i, j] = adj[j, i] = True
    assert _kernels_py.star_cover(adj, 1) == [[1, 0, 2]]


def test_greedy_match_prefers_regular_then_highest_iou():
    ious = np.array([[0.6, 0.9, 0.7], [0.6, 0.9, 0.7]])
    ignore = np.array([False, True, False])
    match, on_ign = _kernels_py.greedy_match(ious, ignore, np.zeros(3, bool), [0.5])
    assert match.tolist() == [[2, 0]]
    assert not on_ign.any()


@needs_c
class TestCompiledTwin:
    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(0, 25))
    def test_iou_bitwise(self, seed, n):
        rng = np.random.default_rng(seed)
        a, b = rand_boxes(rng, n), rand_boxes(rng, max(n - 3, 0))
        crowd = rng.random(len(b)) < 0.3
        assert np.array_equal(_ckernels.iou_matrix(a, b), _kernels_py.iou_matrix(a, b))
        assert np.array_equal(_ckernels.iou_matrix(a, b, crowd), _kernels_py.iou_matrix(a, b, crowd))
        assert np.array_equal(_ckernels.pairwise_iou(a), _kernels_py.pairwise_iou(a))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(0, 30), st.sampled_from([0.3, 0.5, 0.7]))
    def test_nms_identical(self, seed, n, thr):
        rng = np.random.default_rng(seed)
        boxes = rand_boxes(rng, n)
        order = np.argsort(-np.round(rng.random(n), 1), kind="stable").astype(np.intp)
        labels = rng.integers(1, 3, n).astype(np.int64)
        assert np.array_equal(_ckernels.nms_keep(boxes, order, labels, thr),
                              _kernels_py.nms_keep(boxes, order, labels, thr))

    @settings(max_examples=200, deadline=None)
    @given(adjacency(max_n=14), st.integers(1, 3))
    def test_star_cover_identical(self, adj, min_degree):
        assert _ckernels.star_cover(adj, min_degree) == _kernels_py.star_cover(adj, min_degree)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(0, 15), st.integers(0, 8))
    def test_greedy_match_identical(self, seed, n_d, n_g):
        rng = np.random.default_rng(seed)
        ious = np.round(rng.random((n_d, n_g)), 1)
        ignore = rng.random(n_g) < 0.3
        crowd = ignore & (rng.random(n_g) < 0.5)
        thr = np.round(0.5 + 0.05 * np.arange(10), 2)
        c = _ckernels.greedy_match(ious, ignore, crowd, thr)
        p = _kernels_py.greedy_match(ious, ignore, crowd, thr)
        assert np.array_equal(c[0], p[0]) and np.array_equal(c[1], p[1])
