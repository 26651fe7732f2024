"""Estimator-style front ends.

:class:`RBFFDInterpolator` is the global RBF-FD interpolant ``I_h`` of nodal
data (piecewise over the Voronoi cells of the centres). :class:`PoissonRBFFD`
solves a manufactured Poisson problem on a domain; ``fit`` takes the problem
instead of ``(X, y)`` because the data of a PDE are functions, not samples.
"""
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .assembly import ScalingSpec
from .exceptions import RBFFDError
from .geometry import Domain, make_domain
from .local_weights import (
    IDENTITY,
    KIND_FIRST_ORDER,
    LAPLACIAN,
    Operator,
    PhsBasis,
    stencil_weights,
)
from .pipeline import Discretization, NodeCache, parse_method, prepare_nodes
from .problems import Problem, make_problem
from .stencil import assign_evaluation_points, build_stencils, default_stencil_size

__all__ = ["RBFFDInterpolator", "PoissonRBFFD"]

_OPERATORS = {"identity": IDENTITY, "laplacian": LAPLACIAN}


def _as_operator(op):
    if isinstance(op, Operator):
        return op
    try:
        return _OPERATORS[str(op).lower()]
    except KeyError:
        raise ValueError(f"unknown operator {op!r}; use 'identity', 'laplacian' or an Operator") from None


class RBFFDInterpolator(RegressorMixin, BaseEstimator):
    """Stencil-based interpolant of scattered data.

    Each query point uses the stencil of its nearest centre, so the result
    is discontinuous across Voronoi edges.

    Parameters
    ----------
    p : int
        Degree of the polynomial augmentation.
    phs_k : int
        PHS exponent index, ``phi = r**(2k-1)``.
    stencil_size : int or None
        Defaults to twice the polynomial dimension.
    """

    def __init__(self, p=3, phs_k=2, stencil_size=None):
        self.p = p
        self.phs_k = phs_k
        self.stencil_size = stencil_size

    def fit(self, X, y, centers=None):
        """Store nodes ``X`` with values ``y`` and build the stencils.

        ``centers`` (boolean mask or indices) restricts which nodes own a
        Voronoi cell; all nodes still take part in the stencils.
        """
        X = check_array(X, dtype=float)
        y = check_array(y, dtype=float, ensure_2d=False)
        if y.ndim != 1 or len(y) != len(X):
            raise ValueError(f"y must be a vector of length {len(X)}")
        if self.p < 0:
            raise ValueError("p must be nonnegative")
        d = X.shape[1]
        self.basis_ = PhsBasis(self.p, d, self.phs_k)
        n = self.stencil_size or default_stencil_size(self.p, d)
        self.stencils_ = build_stencils(X, n)
        if centers is None:
            self.centers_ = np.arange(len(X))
        else:
            c = np.asarray(centers)
            self.centers_ = np.flatnonzero(c) if c.dtype == bool else c.astype(np.intp)
        self.nodes_ = X
        self.values_ = y
        self.n_features_in_ = d
        return self

    def _check_points(self, points):
        check_is_fitted(self, "nodes_")
        pts = check_array(points, dtype=float)
        if pts.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} coordinates, got {pts.shape[1]}")
        return pts

    def weights(self, points, operator="identity", stencil=None):
        """Weights and stencil index for every query point.

        ``stencil`` forces a given stencil (centre index) for all points,
        which gives one-sided evaluations across a Voronoi edge.
        """
        pts = self._check_points(points)
        op = _as_operator(operator)
        if stencil is None:
            idx = assign_evaluation_points(pts, self.nodes_, self.centers_)
        else:
            idx = np.full(len(pts), int(stencil), dtype=np.intp)
        vec = np.zeros_like(pts)
        if op.kind == KIND_FIRST_ORDER:
            vec[:] = op.vector
        W = stencil_weights(self.nodes_, self.stencils_.indices, self.basis_, pts, idx,
                            np.full(len(pts), op.kind), vec)
        return W, idx

    def predict(self, X, operator="identity", stencil=None):
        W, idx = self.weights(X, operator, stencil)
        return np.sum(W * self.values_[self.stencils_.indices[idx]], axis=1)

    def cardinal(self, X, j, operator="identity"):
        """Values of the cardinal function ``Psi_j`` at ``X``."""
        W, idx = self.weights(X, operator)
        members = self.stencils_.indices[idx] == j
        return np.sum(np.where(members, W, 0.0), axis=1)


class PoissonRBFFD(BaseEstimator):
    """RBF-FD solver for the Poisson model problem with mixed boundary data.

    Parameters
    ----------
    domain : str or Domain
    h : float
        Target node spacing.
    p : int
        Polynomial degree.
    q : float
        Oversampling ratio; ignored by collocation methods.
    method : {'ls', 'ls-ghost', 'c', 'c-ghost'}
    bc_mode : {'mixed', 'dirichlet'}
    phs_k : int
    beta0 : {'inv_h', 'one'}
        Rule for the Dirichlet row weight.
    seed : int
    """

    def __init__(self, domain="star", h=0.05, p=5, q=3.0, method="ls", bc_mode="mixed", phs_k=2,
                 beta0="inv_h", seed=0):
        self.domain = domain
        self.h = h
        self.p = p
        self.q = q
        self.method = method
        self.bc_mode = bc_mode
        self.phs_k = phs_k
        self.beta0 = beta0
        self.seed = seed

    def _validate(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.p < 2:
            raise ValueError("p must be at least 2")
        if self.q < 1:
            raise ValueError("q must be at least 1")
        if self.bc_mode not in ("mixed", "dirichlet"):
            raise ValueError(f"unknown bc_mode {self.bc_mode!r}")
        return parse_method(self.method)

    def fit(self, problem, y=None, cache=None):
        """Generate nodes, assemble and solve for the manufactured ``problem``."""
        method = self._validate()
        problem = problem if isinstance(problem, Problem) else make_problem(problem)
        domain = self.domain if isinstance(self.domain, Domain) else make_domain(self.domain)
        X, Y = prepare_nodes(domain, self.h, self.q, method, self.seed, self.bc_mode, cache or NodeCache())
        disc = Discretization(domain, X, Y, self.p, method, ScalingSpec.from_rule(self.beta0, self.h),
                              phs_k=self.phs_k, bc_mode=self.bc_mode)
        sol = disc.solve(problem)
        self.domain_ = domain
        self.problem_ = problem
        self.nodes_ = X
        self.eval_nodes_ = Y
        self.discretization_ = disc
        self.solution_ = sol
        self.u_ = sol.u_nodes
        self.error_ = sol.error
        self.n_features_in_ = X.dim
        self.interpolant_ = RBFFDInterpolator(self.p, self.phs_k, disc.stencils.n)
        self.interpolant_.basis_ = disc.basis
        self.interpolant_.stencils_ = disc.stencils
        self.interpolant_.centers_ = np.flatnonzero(~X.ghost_mask)
        self.interpolant_.nodes_ = np.asarray(X.points)
        self.interpolant_.values_ = sol.u_nodes
        self.interpolant_.n_features_in_ = X.dim
        return self

    def predict(self, X, operator="identity"):
        """Evaluate ``I_h u_h`` (or an operator applied to it) at points ``X``."""
        check_is_fitted(self, "u_")
        return self.interpolant_.predict(X, operator)

    def score(self, X, y=None):
        """Negative relative l2 error against the exact solution at ``X``."""
        check_is_fitted(self, "u_")
        X = check_array(X, dtype=float)
        exact = self.problem_.u(X) if y is None else np.asarray(y, dtype=float)
        num = np.linalg.norm(self.predict(X) - exact)
        den = np.linalg.norm(exact)
        if den == 0:
            raise RBFFDError("relative error undefined for a vanishing reference")
        return -float(num / den)

    def stability(self):
        check_is_fitted(self, "u_")
        return self.discretization_.stability()
