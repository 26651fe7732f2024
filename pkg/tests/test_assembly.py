import numpy as np
import pytest
import scipy.sparse as sp

from rbffd.assembly import (
    ROW_DIRICHLET,
    ROW_EXTRA,
    ROW_INTERIOR,
    ROW_NEUMANN,
    ScalingSpec,
    assemble,
    assemble_dense,
    eliminate_dirichlet,
    load_triplets,
    plan_rows,
    residual,
    save_triplets,
)
from rbffd.exceptions import AssemblyError
from rbffd.geometry import BoundaryClass
from rbffd.local_weights import KIND_FIRST_ORDER, KIND_IDENTITY, KIND_LAPLACIAN, PhsBasis
from rbffd.nodes import add_ghost_layer, generate_evaluation_set, generate_nodes
from rbffd.problems import rational_sine
from rbffd.stencil import assign_evaluation_points, build_stencils


def setup(domain, X, Y, p=3):
    basis = PhsBasis(p, X.dim)
    st = build_stencils(X.points, 2 * basis.m)
    asg = assign_evaluation_points(Y.points, X.points, np.flatnonzero(~X.ghost_mask))
    return basis, st, asg


@pytest.mark.parametrize("ghost", [False, True])
def test_sparse_matches_dense(star, star_nodes, ghost):
    X, Y = star_nodes
    if ghost:
        X = add_ghost_layer(X, X.h, star)
    basis, st, asg = setup(star, X, Y)
    sc = ScalingSpec.inverse_h(X.h)
    op = assemble(X, Y, basis, st, asg, star, sc, boundary_laplacian=ghost)
    D, E, beta = assemble_dense(X, Y, basis, st, asg, star, sc, boundary_laplacian=ghost)
    scale = np.abs(D).max()
    np.testing.assert_allclose(op.D.toarray(), D, rtol=1e-12, atol=1e-12 * scale)
    np.testing.assert_allclose(op.E.toarray(), E, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(op.beta, beta, rtol=1e-14)


def test_collocation_shapes(star, star_nodes):
    X, _ = star_nodes
    basis, st, asg = setup(star, X, X)
    op = assemble(X, X, basis, st, asg, star)
    assert op.D.shape == (len(X), len(X))
    np.testing.assert_allclose(op.E.toarray(), np.eye(len(X)), atol=1e-10)
    el = eliminate_dirichlet(op)
    assert el.Dbar.shape[0] == el.Dbar.shape[1] == len(X) - X.count(BoundaryClass.DIRICHLET)


def test_least_squares_and_ghost_shapes(star, star_nodes):
    X, Y = star_nodes
    basis, st, asg = setup(star, X, Y)
    op = assemble(X, Y, basis, st, asg, star)
    assert op.D.shape == (len(Y), len(X))
    assert 2.4 < len(Y) / len(X) < 3.75
    G = add_ghost_layer(X, X.h, star)
    basis, st, asg = setup(star, G, Y)
    op = assemble(G, Y, basis, st, asg, star, boundary_laplacian=True)
    Ng = G.count(BoundaryClass.GHOST)
    assert op.D.shape == (len(Y) + Ng, len(X) + Ng)
    assert op.n_ghost == Ng


def test_nnz_per_row_bounded(small_ls):
    D = small_ls.operator.D
    assert np.diff(D.indptr).max() <= small_ls.stencils.n


def test_row_operator_audit(star):
    X = generate_nodes(star, 0.15)
    Y = generate_evaluation_set(star, X, 2.0)
    mixed = plan_rows(X, Y)
    assert np.all(mixed.kinds[mixed.region == ROW_DIRICHLET] == KIND_IDENTITY)
    assert np.all(mixed.kinds[mixed.region == ROW_NEUMANN] == KIND_FIRST_ORDER)
    assert np.all(mixed.kinds[mixed.region == ROW_INTERIOR] == KIND_LAPLACIAN)
    neu = mixed.region == ROW_NEUMANN
    np.testing.assert_allclose(mixed.vectors[neu], Y.normals[neu])
    Xd = generate_nodes(star, 0.15, bc_mode="dirichlet")
    Yd = generate_evaluation_set(star, Xd, 2.0, bc_mode="dirichlet")
    pure = plan_rows(Xd, Yd)
    assert not np.any(pure.region == ROW_NEUMANN)
    assert np.all(pure.kinds[Yd.boundary_mask] == KIND_IDENTITY)
    extra = plan_rows(X, Y, boundary_laplacian=True)
    assert np.sum(extra.region == ROW_EXTRA) == int(np.sum(X.boundary_mask))


def test_row_scaling(star, star_nodes):
    X, Y = star_nodes
    basis, st, asg = setup(star, X, Y)
    op = assemble(X, Y, basis, st, asg, star, ScalingSpec.inverse_h(X.h))
    d_meas, n_meas = star.boundary_measures()
    M0 = np.sum(op.region == ROW_DIRICHLET)
    M2 = np.sum(op.region == ROW_INTERIOR)
    np.testing.assert_allclose(op.beta[op.region == ROW_DIRICHLET], np.sqrt(d_meas / M0) / X.h)
    np.testing.assert_allclose(op.beta[op.region == ROW_INTERIOR], np.sqrt(star.volume() / M2))
    assert op.eval_scale == pytest.approx(np.sqrt(star.volume() / len(Y)))


def test_region_residual_decomposition(star, star_nodes):
    # the scaled residual norm splits into the three region contributions
    X, Y = star_nodes
    basis, st, asg = setup(star, X, Y)
    op = assemble(X, Y, basis, st, asg, star, problem=rational_sine)
    u = rational_sine.u(X.points)
    r = residual(op.Dbar, u, op.Fbar)
    parts = sum(np.sum(r[op.region == k] ** 2) for k in (ROW_DIRICHLET, ROW_NEUMANN, ROW_INTERIOR))
    assert np.sum(r ** 2) == pytest.approx(parts)
    np.testing.assert_allclose(residual(op.Dbar, np.zeros(len(X)), op.Fbar), -op.Fbar)


def test_elimination_homogeneous(star, star_nodes):
    X, Y = star_nodes
    basis, st, asg = setup(star, X, Y)
    op = assemble(X, Y, basis, st, asg, star, problem=rational_sine)
    el = eliminate_dirichlet(op, dirichlet_values=np.zeros(len(op.dirichlet_nodes)))
    np.testing.assert_allclose(el.rhs, op.Fbar[el.rows])
    assert el.Dbar.shape[1] == len(X) - len(op.dirichlet_nodes)
    full = el.expand(np.arange(len(el.free), dtype=float))
    assert np.all(full[op.dirichlet_nodes] == 0.0)


def test_elimination_is_consistent(star, star_nodes):
    # the exact nodal vector gives the same residual with and without elimination
    X, Y = star_nodes
    basis, st, asg = setup(star, X, Y)
    op = assemble(X, Y, basis, st, asg, star, problem=rational_sine)
    el = eliminate_dirichlet(op)
    u = rational_sine.u(X.points)
    full = residual(op.Dbar, u, op.Fbar)[el.rows]
    reduced = residual(el.Dbar, u[el.free], el.rhs)
    np.testing.assert_allclose(reduced, full, atol=1e-10 * np.abs(op.Fbar).max())
    np.testing.assert_allclose(el.expand(u[el.free]), u)
    dropped = np.setdiff1d(np.arange(op.D.shape[0]), el.rows)
    assert len(dropped) == len(op.dirichlet_nodes)


def test_triplet_round_trip(tmp_path, small_ls):
    A = small_ls.operator.Dbar
    path = tmp_path / "D.txt"
    save_triplets(path, A)
    assert path.read_text().startswith(f"%% {A.shape[0]} {A.shape[1]} ")
    B = load_triplets(path)
    assert (abs(B - A) > 0).nnz == 0
    empty = tmp_path / "z.txt"
    save_triplets(empty, sp.csr_matrix((2, 3)))
    assert load_triplets(empty).shape == (2, 3)


def test_assembly_errors(star, star_nodes):
    X, Y = star_nodes
    basis, st, asg = setup(star, X, Y)
    with pytest.raises(AssemblyError):
        assemble(X, Y, basis, st, asg[:-1], star)
    with pytest.raises(AssemblyError):
        ScalingSpec.from_rule("sqrt", 0.1)
