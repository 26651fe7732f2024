import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbffd.exceptions import StencilError
from rbffd.stencil import assign_evaluation_points, build_stencils, default_stencil_size, poly_dim


def brute_knn(points, centers, n):
    out = []
    for c in centers:
        d = np.linalg.norm(points - points[c], axis=1)
        out.append(np.lexsort((np.arange(len(points)), d))[:n])
    return np.array(out)


def test_1d_example():
    x = np.linspace(0, 1, 11)
    st_ = build_stencils(x[:, None], 3, centers=[5])
    assert list(st_.indices[0]) == [5, 4, 6]
    np.testing.assert_allclose(x[st_.indices[0]], [0.5, 0.4, 0.6])


def test_sizes():
    assert poly_dim(3, 2) == 10
    assert default_stencil_size(3, 2) == 20
    assert poly_dim(2, 3) == 10
    assert poly_dim(0, 2) == 1


def test_matches_brute_force(rng):
    pts = rng.random((400, 2))
    pts[0] = [0.0, 0.0]  # a corner centre gives a one-sided stencil
    n = 20
    table = build_stencils(pts, n)
    ref = brute_knn(pts, range(len(pts)), n)
    dist = np.linalg.norm(pts[table.indices] - pts[:, None], axis=2)
    dref = np.linalg.norm(pts[ref] - pts[:, None], axis=2)
    np.testing.assert_allclose(dist, dref, atol=0)
    assert np.all(table.indices[:, 0] == np.arange(len(pts)))


def test_ties_broken_by_index():
    g = np.stack(np.meshgrid(np.arange(5.0), np.arange(5.0)), -1).reshape(-1, 2)
    table = build_stencils(g, 5, centers=[12])
    np.testing.assert_array_equal(table.indices[0], brute_knn(g, [12], 5)[0])


def test_stencil_larger_than_set():
    with pytest.raises(StencilError, match="stencil larger than node set"):
        build_stencils(np.zeros((3, 2)) + np.arange(3)[:, None], 4)


def test_assignment_examples():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert assign_evaluation_points(X, X).tolist() == [0, 1, 2]
    assert assign_evaluation_points(np.array([[0.5, 0.0]]), X).tolist() == [0]
    assert assign_evaluation_points(np.array([[0.5, 0.5]]), X, candidates=[1, 2]).tolist() == [1]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_assignment_matches_argmin(seed):
    r = np.random.default_rng(seed)
    X = r.random((60, 2))
    Y = r.random((200, 2))
    d = np.linalg.norm(Y[:, None] - X[None], axis=2)
    np.testing.assert_array_equal(assign_evaluation_points(Y, X), np.argmin(d, axis=1))
