"""Global rectangular RBF-FD matrices.

Rows are evaluation points ``y_i`` (plus, optionally, extra Laplacian rows at
the boundary nodes of X); columns are trial nodes (plus ghost nodes). Each row
carries the stencil weights of the operator dictated by the location of
``y_i``: the PDE operator inside, the identity on the Dirichlet part and the
normal derivative on the Neumann part. Rows are scaled by

    beta(y) = sqrt(|region| / M_region) * beta_region

and Dirichlet nodes of X are eliminated (strong imposition).
"""
from dataclasses import dataclass, field, replace
import math

import numpy as np
import scipy.sparse as sp

from .exceptions import AssemblyError
from .geometry import BoundaryClass
from .local_weights import (
    KIND_FIRST_ORDER,
    KIND_IDENTITY,
    KIND_LAPLACIAN,
    LAPLACIAN,
    IDENTITY,
    LocalSystem,
    Operator,
    stencil_weights,
)
from .problems import evaluate_rhs

__all__ = [
    "ScalingSpec",
    "RowPlan",
    "GlobalOperator",
    "EliminatedSystem",
    "plan_rows",
    "row_weights",
    "assemble",
    "assemble_dense",
    "build_rhs",
    "with_problem",
    "eliminate_dirichlet",
    "residual",
    "save_triplets",
    "load_triplets",
]

# row region codes
ROW_INTERIOR = 0
ROW_DIRICHLET = 1
ROW_NEUMANN = 2
ROW_EXTRA = 3


@dataclass(frozen=True)
class ScalingSpec:
    """Region weights; the default ``beta0 = 1/h`` rule is built by :meth:`inverse_h`."""

    beta0: float = 1.0
    beta1: float = 1.0
    beta2: float = 1.0

    @classmethod
    def inverse_h(cls, h):
        return cls(beta0=1.0 / h, beta1=1.0, beta2=1.0)

    @classmethod
    def from_rule(cls, rule, h):
        if rule in ("inv_h", "inverse_h"):
            return cls.inverse_h(h)
        if rule == "one":
            return cls()
        raise AssemblyError(f"unknown beta0 rule {rule!r}")


@dataclass(frozen=True, eq=False)
class RowPlan:
    """Location, region and operator of every row of ``D``."""

    points: np.ndarray
    region: np.ndarray
    kinds: np.ndarray
    vectors: np.ndarray
    eval_index: np.ndarray  # index into Y, or -1 for extra rows
    node_index: np.ndarray  # index into X for extra rows, else -1
    n_eval: int


def plan_rows(X, Y, pde_operator=LAPLACIAN, boundary_laplacian=False):
    """Decide which operator every row of ``D`` samples."""
    M = len(Y)
    d = Y.dim
    region = np.full(M, ROW_INTERIOR, dtype=np.int8)
    region[Y.tags == BoundaryClass.DIRICHLET] = ROW_DIRICHLET
    region[Y.tags == BoundaryClass.NEUMANN] = ROW_NEUMANN
    if np.any(Y.tags == BoundaryClass.GHOST):
        raise AssemblyError("ghost points cannot be evaluation points")
    kinds = np.full(M, pde_operator.kind, dtype=int)
    vectors = np.zeros((M, d))
    if pde_operator.kind == KIND_FIRST_ORDER:
        vectors[:] = pde_operator.vector
    kinds[region == ROW_DIRICHLET] = KIND_IDENTITY
    neu = region == ROW_NEUMANN
    kinds[neu] = KIND_FIRST_ORDER
    vectors[neu] = Y.normals[neu]
    pts = Y.points
    eval_index = np.arange(M)
    node_index = np.full(M, -1)
    if boundary_laplacian:
        b = np.flatnonzero(X.boundary_mask)
        pts = np.concatenate([pts, X.points[b]])
        region = np.concatenate([region, np.full(len(b), ROW_EXTRA, np.int8)])
        extra_vec = np.zeros((len(b), d))
        if pde_operator.kind == KIND_FIRST_ORDER:
            extra_vec[:] = pde_operator.vector
        kinds = np.concatenate([kinds, np.full(len(b), pde_operator.kind)])
        vectors = np.concatenate([vectors, extra_vec])
        eval_index = np.concatenate([eval_index, np.full(len(b), -1)])
        node_index = np.concatenate([node_index, b])
    return RowPlan(pts, region, kinds, vectors, eval_index, node_index, M)


def row_weights(X, Y, basis, stencils, assignment, plan):
    """Weights of ``E`` (identity at every y) and of every ``D`` row.

    Dirichlet rows of ``D`` reuse the ``E`` weights. Extra rows at boundary
    nodes use the stencil of the nearest non-ghost centre, i.e. their own.
    """
    M = plan.n_eval
    row_stencil = np.empty(len(plan.points), dtype=np.intp)
    row_stencil[:M] = assignment
    extra = plan.node_index >= 0
    row_stencil[extra] = assignment_of_nodes(X, plan.node_index[extra])
    need = np.flatnonzero(plan.kinds[:M] != KIND_IDENTITY)
    need = np.concatenate([need, np.flatnonzero(extra)])
    req_pts = np.concatenate([Y.points, plan.points[need]])
    req_st = np.concatenate([assignment, row_stencil[need]])
    req_kind = np.concatenate([np.full(M, KIND_IDENTITY), plan.kinds[need]])
    req_vec = np.concatenate([np.zeros((M, Y.dim)), plan.vectors[need]])
    W, cond = stencil_weights(X.points, stencils.indices, basis, req_pts, req_st, req_kind, req_vec,
                              return_condition=True)
    WE = W[:M]
    WD = np.empty((len(plan.points), stencils.n))
    WD[:M] = WE
    WD[need] = W[M:]
    return WE, WD, row_stencil, cond


def assignment_of_nodes(X, idx):
    # a non-ghost node is its own nearest centre (distance zero)
    if np.any(X.ghost_mask[idx]):
        raise AssemblyError("ghost nodes have no Voronoi cell")
    return np.asarray(idx, dtype=np.intp)


def _sparse(weights, row_stencil, stencils, shape):
    R, n = weights.shape
    rows = np.repeat(np.arange(R), n)
    cols = stencils.indices[row_stencil].ravel()
    return sp.csr_matrix((weights.ravel(), (rows, cols)), shape=shape)


@dataclass(eq=False)
class GlobalOperator:
    """Unscaled ``D`` and ``E`` with row scaling and bookkeeping.

    ``D`` has one row per evaluation point (plus extra rows); ``E`` has one
    row per evaluation point. Columns are all nodes of X (ghosts included).
    """

    D: sp.csr_matrix
    E: sp.csr_matrix
    beta: np.ndarray
    region: np.ndarray
    rhs: np.ndarray
    dirichlet_nodes: np.ndarray
    dirichlet_values: np.ndarray
    eval_scale: float
    n_eval: int
    n_ghost: int
    plan: RowPlan = field(repr=False, default=None)
    local_condition: np.ndarray = field(repr=False, default=None)

    @property
    def shape(self):
        return self.D.shape

    @property
    def Dbar(self):
        return sp.diags(self.beta) @ self.D

    @property
    def Ebar(self):
        return self.eval_scale * self.E

    @property
    def Fbar(self):
        return None if self.rhs is None else self.beta * self.rhs


def region_factors(domain, region, bc_mode, scaling, dim, measures=None):
    """``sqrt(|region| / M_region) * beta_region`` for every row.

    ``measures`` overrides the ``(|dOmega_0|, |dOmega_1|)`` pair of the domain.
    """
    d_meas, n_meas = domain.boundary_measures(bc_mode) if measures is None else measures
    vol = domain.volume()
    counts = {r: int(np.sum(region == r)) for r in (ROW_INTERIOR, ROW_DIRICHLET, ROW_NEUMANN)}
    beta = np.empty(len(region))
    table = {
        ROW_DIRICHLET: (d_meas, counts[ROW_DIRICHLET], scaling.beta0),
        ROW_NEUMANN: (n_meas, counts[ROW_NEUMANN], scaling.beta1),
        ROW_INTERIOR: (vol, counts[ROW_INTERIOR], scaling.beta2),
        ROW_EXTRA: (vol, counts[ROW_INTERIOR], scaling.beta2),
    }
    for r, (meas, cnt, b) in table.items():
        sel = region == r
        if not np.any(sel):
            continue
        if cnt == 0 or meas <= 0:
            raise AssemblyError(f"inconsistent region measures: region {r} has measure {meas} and {cnt} points")
        beta[sel] = math.sqrt(meas / cnt) * b
    if np.any(beta <= 0):
        raise AssemblyError("row scaling factors must be positive")
    return beta


def assemble(X, Y, basis, stencils, assignment, domain, scaling=None, problem=None,
             pde_operator=LAPLACIAN, boundary_laplacian=False, bc_mode="mixed", weights=None,
             measures=None):
    """Assemble ``D``, ``E``, row scaling and (if ``problem`` is given) the data ``F``.

    ``weights`` may hold a precomputed ``(plan, row_weights(...))`` pair so the
    local-weight stage can be timed separately.
    """
    scaling = scaling or ScalingSpec()
    if len(assignment) != len(Y):
        raise AssemblyError("evaluation point with no assigned stencil")
    if weights is None:
        plan = plan_rows(X, Y, pde_operator, boundary_laplacian)
        WE, WD, row_stencil, cond = row_weights(X, Y, basis, stencils, assignment, plan)
    else:
        plan, (WE, WD, row_stencil, cond) = weights
    N = len(X)
    M = plan.n_eval
    D = _sparse(WD, row_stencil, stencils, (len(plan.points), N))
    E = _sparse(WE, row_stencil[:M], stencils, (M, N))
    beta = region_factors(domain, plan.region, bc_mode, scaling, X.dim, measures)
    dnodes = np.flatnonzero(X.tags == BoundaryClass.DIRICHLET)
    rhs = dvals = None
    if problem is not None:
        rhs, dvals = build_rhs(plan, X, problem, pde_operator)
    return GlobalOperator(
        D=D,
        E=E,
        beta=beta,
        region=plan.region,
        rhs=rhs,
        dirichlet_nodes=dnodes,
        dirichlet_values=dvals,
        eval_scale=math.sqrt(domain.volume() / M),
        n_eval=M,
        n_ghost=int(np.sum(X.ghost_mask)),
        plan=plan,
        local_condition=cond,
    )


def build_rhs(plan, X, problem, pde_operator=LAPLACIAN):
    """Unscaled data ``F`` for every row and Dirichlet values at the Dirichlet nodes of X."""
    region = plan.region
    tags = np.select(
        [region == ROW_DIRICHLET, region == ROW_NEUMANN],
        [BoundaryClass.DIRICHLET, BoundaryClass.NEUMANN],
        default=BoundaryClass.INTERIOR,
    )
    normals = np.zeros_like(plan.points)
    neu = region == ROW_NEUMANN
    normals[neu] = plan.vectors[neu]
    rhs = evaluate_rhs(problem, plan.points, tags, normals)
    if pde_operator.kind == KIND_FIRST_ORDER:
        inner = (region == ROW_INTERIOR) | (region == ROW_EXTRA)
        rhs[inner] = problem.grad(plan.points[inner]) @ np.asarray(pde_operator.vector)
    elif pde_operator.kind == KIND_IDENTITY:
        inner = (region == ROW_INTERIOR) | (region == ROW_EXTRA)
        rhs[inner] = problem.u(plan.points[inner])
    dnodes = np.flatnonzero(X.tags == BoundaryClass.DIRICHLET)
    return rhs, problem.u(X.points[dnodes])


def with_problem(op, X, problem, pde_operator=LAPLACIAN):
    """Copy of ``op`` carrying the data of another manufactured solution."""
    rhs, dvals = build_rhs(op.plan, X, problem, pde_operator)
    return replace(op, rhs=rhs, dirichlet_values=dvals)


def assemble_dense(X, Y, basis, stencils, assignment, domain, scaling=None, problem=None,
                   pde_operator=LAPLACIAN, boundary_laplacian=False, bc_mode="mixed", measures=None):
    """Row-by-row dense assembly through :class:`LocalSystem`; an oracle for small N."""
    scaling = scaling or ScalingSpec()
    plan = plan_rows(X, Y, pde_operator, boundary_laplacian)
    N, M = len(X), plan.n_eval
    D = np.zeros((len(plan.points), N))
    E = np.zeros((M, N))
    systems = {}

    def system(k):
        if k not in systems:
            systems[k] = LocalSystem(X.points[stencils.indices[k]], basis, stencil=k)
        return systems[k]

    for i in range(len(plan.points)):
        if i < M:
            k = int(assignment[i])
        else:
            k = int(plan.node_index[i])
        ls = system(k)
        cols = stencils.indices[k]
        if plan.kinds[i] == KIND_IDENTITY:
            op = IDENTITY
        elif plan.kinds[i] == KIND_LAPLACIAN:
            op = LAPLACIAN
        else:
            op = Operator(KIND_FIRST_ORDER, tuple(plan.vectors[i]))
        D[i, cols] = ls.operator_weights(plan.points[i], op)
        if i < M:
            E[i, cols] = ls.operator_weights(plan.points[i], IDENTITY)
    beta = region_factors(domain, plan.region, bc_mode, scaling, X.dim, measures)
    return D, E, beta


@dataclass(eq=False)
class EliminatedSystem:
    """``Dbar`` restricted to free columns and rows that carry information."""

    Dbar: sp.csr_matrix
    Ebar: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    rows: np.ndarray
    dirichlet_nodes: np.ndarray
    dirichlet_values: np.ndarray
    n_total: int

    def expand(self, u_free):
        """Full nodal vector with the Dirichlet data re-inserted."""
        u = np.zeros(self.n_total)
        u[self.free] = u_free
        if len(self.dirichlet_nodes):
            u[self.dirichlet_nodes] = self.dirichlet_values
        return u


def eliminate_dirichlet(op, dirichlet_values=None, drop_identity_rows=True):
    """Strong Dirichlet imposition on a scaled operator.

    Columns of Dirichlet nodes are removed and their contribution
    ``Dbar(Y, X_D) f0`` is moved to the right-hand side. Rows whose evaluation
    point *is* a Dirichlet node reduce to ``0 = 0`` and are dropped when
    ``drop_identity_rows`` is set, which keeps the collocation system square.
    """
    Dbar = op.Dbar.tocsc()
    N = Dbar.shape[1]
    dn = op.dirichlet_nodes
    f0 = op.dirichlet_values if dirichlet_values is None else np.asarray(dirichlet_values, dtype=float)
    if f0 is None:
        f0 = np.zeros(len(dn))
    free = np.setdiff1d(np.arange(N), dn)
    Fbar = op.Fbar if op.rhs is not None else np.zeros(Dbar.shape[0])
    F = Fbar - Dbar[:, dn] @ f0 if len(dn) else Fbar.copy()
    rows = np.arange(Dbar.shape[0])
    if drop_identity_rows and len(dn):
        plan = op.plan
        ev = plan.eval_index
        dir_rows = np.flatnonzero(plan.region == ROW_DIRICHLET)
        # a Dirichlet row sits on a Dirichlet node iff its E row is a unit vector there
        on_node = _rows_on_nodes(op.E, ev[dir_rows], dn)
        rows = np.setdiff1d(rows, dir_rows[on_node])
    Dfree = Dbar[:, free].tocsr()[rows]
    Efree = op.Ebar.tocsc()[:, free].tocsr()
    return EliminatedSystem(Dfree, Efree, F[rows], free, rows, dn, f0, N)


def _rows_on_nodes(E, eval_rows, nodes):
    if len(eval_rows) == 0:
        return np.zeros(0, bool)
    sub = E[eval_rows].tocsr()
    sub_nodes = sub[:, nodes]
    # cardinal property: weight 1 at the node itself
    return np.isclose(np.asarray(sub_nodes.max(axis=1).todense()).ravel(), 1.0, atol=1e-9, rtol=0.0)


def residual(Dbar, u, F):
    return Dbar @ u - F


def save_triplets(path, A):
    A = sp.coo_matrix(A)
    with open(path, "w") as fh:
        fh.write(f"%% {A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for r, c, v in zip(A.row, A.col, A.data):
            fh.write(f"{r} {c} {float(v)!r}\n")


def load_triplets(path):
    with open(path) as fh:
        header = fh.readline().split()
        if header[0] != "%%":
            raise AssemblyError("missing %% header in triplet file")
        nr, nc, nnz = int(header[1]), int(header[2]), int(header[3])
        if nnz == 0:
            return sp.csr_matrix((nr, nc))
        data = np.loadtxt(fh, ndmin=2)
    if len(data) != nnz:
        raise AssemblyError(f"header announces {nnz} entries, file has {len(data)}")
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(nr, nc))
