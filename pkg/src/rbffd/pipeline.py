"""One discretization from node sets to solution and stability quantities.

The stages are timed separately: ``r1`` covers neighbour search and the
local interpolation systems, ``r2`` covers global assembly, elimination and
the solve. Node generation is a preprocessing step and is not timed.
"""
from dataclasses import dataclass
from time import perf_counter

import numpy as np

from .assembly import ScalingSpec, assemble, eliminate_dirichlet, plan_rows, row_weights, with_problem
from .exceptions import RBFFDError, StageError
from .geometry import BoundaryClass
from .local_weights import LAPLACIAN, PhsBasis
from .nodes import add_ghost_layer, generate_evaluation_set, generate_nodes, with_tags
from .problems import relative_error
from .solver import NormalFactor, solve_least_squares, solve_square, stability_report
from .stencil import assign_evaluation_points, build_stencils, default_stencil_size

__all__ = [
    "MethodSpec",
    "METHODS",
    "parse_method",
    "NodeCache",
    "Discretization",
    "Solution",
    "prepare_nodes",
    "inflow_tags",
]


@dataclass(frozen=True)
class MethodSpec:
    name: str
    ghost: bool
    collocation: bool


METHODS = {
    "ls": MethodSpec("ls", False, False),
    "ls-ghost": MethodSpec("ls-ghost", True, False),
    "c": MethodSpec("c", False, True),
    "c-ghost": MethodSpec("c-ghost", True, True),
}


def parse_method(name):
    key = str(name).lower().replace("_", "-")
    aliases = {"rbf-fd-ls": "ls", "rbf-fd-c": "c", "collocation": "c", "lsghost": "ls-ghost",
               "cghost": "c-ghost", "least-squares": "ls"}
    key = aliases.get(key, key)
    if key not in METHODS:
        raise RBFFDError(f"unknown method {name!r}; choose from {sorted(METHODS)}")
    return METHODS[key]


class NodeCache:
    """Memoizes trial and evaluation sets so sweeps can share them."""

    def __init__(self):
        self._x = {}
        self._y = {}

    def trial(self, domain, h, seed, bc_mode):
        key = (repr(domain), float(h), int(seed), bc_mode)
        if key not in self._x:
            self._x[key] = generate_nodes(domain, h, seed, bc_mode)
        return self._x[key]

    def evaluation(self, domain, X, q, seed, bc_mode):
        key = (repr(domain), X.digest(), float(q), int(seed), bc_mode)
        if key not in self._y:
            self._y[key] = generate_evaluation_set(domain, X, q, seed, bc_mode)
        return self._y[key]


def prepare_nodes(domain, h, q, method, seed=0, bc_mode="mixed", cache=None):
    """Trial set (with ghosts if requested) and evaluation set of one run."""
    cache = cache or NodeCache()
    try:
        X = cache.trial(domain, h, seed, bc_mode)
        Y = cache.evaluation(domain, X, 1.0 if method.collocation else q, seed + 1, bc_mode)
    except RBFFDError as exc:
        raise StageError("nodes", exc) from exc
    if method.ghost:
        X = add_ghost_layer(X, h, domain)
    return X, Y


def inflow_tags(nodes):
    """Dirichlet on boundary points with polar angle in [0, pi], PDE rows elsewhere."""
    theta = np.arctan2(nodes.points[:, 1], nodes.points[:, 0])
    tags = nodes.tags.copy()
    bnd = nodes.boundary_mask
    tags[bnd] = np.where(theta[bnd] >= 0.0, BoundaryClass.DIRICHLET, BoundaryClass.INTERIOR)
    return with_tags(nodes, tags)


@dataclass
class Solution:
    u_nodes: np.ndarray
    u_eval: np.ndarray
    error: float
    residual_norm: float
    refinement_steps: int
    r2: float
    pointwise_error: np.ndarray


class Discretization:
    """Stencils, weights, global matrices and the factorization of one setup.

    Parameters
    ----------
    domain : Domain
    X, Y : NodeSet
        Trial nodes (ghosts included) and evaluation points.
    p : int
        Polynomial degree.
    method : MethodSpec
    scaling : ScalingSpec
    """

    def __init__(self, domain, X, Y, p, method, scaling=None, phs_k=2, stencil_size=None,
                 bc_mode="mixed", pde_operator=LAPLACIAN, boundary_laplacian=None, measures=None):
        self.domain = domain
        self.X = X
        self.Y = Y
        self.method = method
        self.pde_operator = pde_operator
        self.scaling = scaling or ScalingSpec.inverse_h(X.h)
        extra = method.ghost if boundary_laplacian is None else bool(boundary_laplacian)
        d = X.dim
        self.basis = PhsBasis(p, d, phs_k)
        n = stencil_size or default_stencil_size(p, d)

        t0 = perf_counter()
        try:
            self.stencils = build_stencils(X.points, n)
            centers = np.flatnonzero(~X.ghost_mask)
            self.assignment = assign_evaluation_points(Y.points, X.points, centers)
            plan = plan_rows(X, Y, pde_operator, extra)
            w = row_weights(X, Y, self.basis, self.stencils, self.assignment, plan)
        except RBFFDError as exc:
            raise StageError("weights", exc) from exc
        self.r1 = perf_counter() - t0

        t0 = perf_counter()
        try:
            self.operator = assemble(X, Y, self.basis, self.stencils, self.assignment, domain, self.scaling,
                                     pde_operator=pde_operator, boundary_laplacian=extra, bc_mode=bc_mode,
                                     weights=(plan, w), measures=measures)
            self.system = eliminate_dirichlet(self.operator)
        except RBFFDError as exc:
            raise StageError("assembly", exc) from exc
        self.r2_assembly = perf_counter() - t0
        self._factor = None

    @property
    def square(self):
        return self.system.Dbar.shape[0] == self.system.Dbar.shape[1]

    @property
    def local_condition(self):
        return self.operator.local_condition

    @property
    def factor(self):
        if self._factor is None:
            try:
                self._factor = NormalFactor(self.system.Dbar)
            except RBFFDError as exc:
                raise StageError("solve", exc) from exc
        return self._factor

    def solve(self, problem):
        """Solve for one manufactured solution; ``r2`` includes assembly time."""
        t0 = perf_counter()
        try:
            op = with_problem(self.operator, self.X, problem, self.pde_operator)
            el = eliminate_dirichlet(op)
            if self.method.collocation and self.square:
                res = solve_square(el.Dbar, el.rhs)
            else:
                res = solve_least_squares(el.Dbar, el.rhs, factor=self.factor)
            u = el.expand(res.x)
            uy = op.E @ u
        except RBFFDError as exc:
            raise StageError("solve", exc) from exc
        r2 = self.r2_assembly + perf_counter() - t0
        exact = problem.u(self.Y.points)
        err = relative_error(uy, exact)
        return Solution(u, uy, err, res.residual_norm, res.refinement_steps, r2, uy - exact)

    def stability(self):
        try:
            return stability_report(self.system.Ebar, self.system.Dbar, self.operator.E, self.factor)
        except RBFFDError as exc:
            raise StageError("stability", exc) from exc
