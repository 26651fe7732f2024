"""Local PHS + polynomial interpolation and differentiation weights.

For a stencil ``X_k`` with ``n`` nodes the saddle-point matrix

    [[A, P], [P^T, 0]],   A_ij = phi(|x_i - x_j|),  P_ij = p_j(x_i)

is assembled in coordinates shifted to the stencil centre and scaled by the
stencil radius. Weights for a linear operator ``L`` at a point ``y`` are the
first ``n`` entries of ``b_L A~^{-1}`` where ``b_L`` holds ``L`` applied to
every basis function at ``y``. Scaled-coordinate weights are mapped back to
physical space by dividing by ``scale**order``.

Two entry points exist: :class:`LocalSystem` (one stencil, LU-factored) and
:func:`stencil_weights`, a chunked batch version used by global assembly.
"""
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations_with_replacement
from math import comb
import warnings

import numpy as np
import scipy.linalg as sla

from .exceptions import SingularStencilError, StencilError

__all__ = [
    "PhsBasis",
    "Operator",
    "IDENTITY",
    "LAPLACIAN",
    "normal_derivative",
    "directional",
    "phs_value",
    "phs_gradient",
    "phs_laplacian",
    "monomial_exponents",
    "poly_basis",
    "LocalSystem",
    "build_local_system",
    "stencil_weights",
    "COND_WARN",
    "COND_ERROR",
]

COND_WARN = 1e12
COND_ERROR = 1e15

# operator kinds used in batched requests
KIND_IDENTITY = 0
KIND_LAPLACIAN = 1
KIND_FIRST_ORDER = 2


@dataclass(frozen=True)
class PhsBasis:
    """Cubic (``k=2``) or higher odd polyharmonic spline plus degree-``p`` polynomials."""

    p: int
    d: int
    k: int = 2

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("PHS exponent index k must be >= 2 (phi = r**(2k-1))")
        if self.p < 0:
            raise ValueError("polynomial degree must be >= 0")

    @property
    def exponent(self):
        return 2 * self.k - 1

    @property
    def m(self):
        return comb(self.p + self.d, self.d)

    @cached_property
    def exponents(self):
        return monomial_exponents(self.p, self.d)


@dataclass(frozen=True)
class Operator:
    """A linear operator: identity, Laplacian, or ``vector . grad``."""

    kind: int
    vector: tuple = ()

    @property
    def order(self):
        return {KIND_IDENTITY: 0, KIND_LAPLACIAN: 2, KIND_FIRST_ORDER: 1}[self.kind]

    @property
    def name(self):
        return {KIND_IDENTITY: "identity", KIND_LAPLACIAN: "laplacian", KIND_FIRST_ORDER: "first_order"}[self.kind]


IDENTITY = Operator(KIND_IDENTITY)
LAPLACIAN = Operator(KIND_LAPLACIAN)


def normal_derivative(normal):
    n = np.asarray(normal, dtype=float)
    return Operator(KIND_FIRST_ORDER, tuple(n / np.linalg.norm(n)))


def directional(g):
    return Operator(KIND_FIRST_ORDER, tuple(float(v) for v in g))


# -- radial function -----------------------------------------------------------

def phs_value(r, k=2):
    return np.abs(np.asarray(r, dtype=float)) ** (2 * k - 1)


def phs_gradient(offset, k=2):
    """Gradient of ``phi(|x|)`` with respect to ``x`` evaluated at ``offset``."""
    offset = np.asarray(offset, dtype=float)
    r = np.linalg.norm(offset, axis=-1, keepdims=True)
    return (2 * k - 1) * r ** (2 * k - 3) * offset


def phs_laplacian(r, k=2, d=2):
    """``phi'' + (d-1) phi'/r = (2k-1)(2k-3+d) r^(2k-3)``."""
    r = np.abs(np.asarray(r, dtype=float))
    return (2 * k - 1) * (2 * k - 3 + d) * r ** (2 * k - 3)


# -- polynomials ---------------------------------------------------------------

def monomial_exponents(p, d):
    """Exponent tuples of all monomials of degree <= p, graded lexicographic order."""
    out = []
    for deg in range(p + 1):
        degree_block = []
        for combo in combinations_with_replacement(range(d), deg):
            e = [0] * d
            for a in combo:
                e[a] += 1
            degree_block.append(tuple(e))
        out.extend(sorted(degree_block, reverse=True))
    return np.array(out, dtype=int).reshape(-1, d)


def _monomials(pts, exps, shift=None):
    """Derivative ``d^shift`` of every monomial at ``pts``; shape (..., m)."""
    pts = np.asarray(pts, dtype=float)
    d = exps.shape[1]
    if shift is None:
        shift = np.zeros(d, dtype=int)
    e = exps - shift[None, :]
    coef = np.ones(len(exps))
    for a in range(d):
        for s in range(shift[a]):
            coef = coef * (exps[:, a] - s)
    valid = np.all(e >= 0, axis=1) & (coef != 0)
    out = np.zeros(pts.shape[:-1] + (len(exps),))
    if not np.any(valid):
        return out
    ev = e[valid]
    top = int(ev.max())
    # power table: pw[e, ..., a] = pts[..., a] ** e
    pw = np.empty((top + 1,) + pts.shape)
    pw[0] = 1.0
    for j in range(1, top + 1):
        pw[j] = pw[j - 1] * pts
    vals = pw[ev[:, 0], ..., 0]
    for a in range(1, d):
        vals = vals * pw[ev[:, a], ..., a]
    out[..., valid] = np.moveaxis(vals, 0, -1) * coef[valid]
    return out


def poly_basis(pts, p, d=None, op=None):
    """Monomials of degree <= ``p`` (or ``op`` applied to them) at ``pts``.

    ``op`` is ``None``/identity, ``"laplacian"``, ``"gradient"`` (adds a
    trailing axis of length d), or an :class:`Operator`.
    """
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :] if d is not None and pts.shape[0] == d else pts[:, None]
    d = pts.shape[-1] if d is None else d
    exps = monomial_exponents(p, d)
    return _poly_op(pts, exps, op)


def _poly_op(pts, exps, op):
    d = exps.shape[1]
    if op is None or op == "identity" or (isinstance(op, Operator) and op.kind == KIND_IDENTITY):
        return _monomials(pts, exps)
    if op == "laplacian" or (isinstance(op, Operator) and op.kind == KIND_LAPLACIAN):
        return sum(_monomials(pts, exps, 2 * np.eye(d, dtype=int)[a]) for a in range(d))
    grads = np.stack([_monomials(pts, exps, np.eye(d, dtype=int)[a]) for a in range(d)], axis=-1)
    if op == "gradient":
        return grads
    return grads @ np.asarray(op.vector, dtype=float)


# -- local systems -------------------------------------------------------------

def _saddle_matrices(xi, basis):
    """Saddle matrices for a batch of scaled stencils ``xi`` of shape (B, n, d)."""
    B, n, d = xi.shape
    m = basis.m
    diff = xi[:, :, None, :] - xi[:, None, :, :]
    A = phs_value(np.linalg.norm(diff, axis=-1), basis.k)
    P = _monomials(xi, basis.exponents)
    M = np.zeros((B, n + m, n + m))
    M[:, :n, :n] = A
    M[:, :n, n:] = P
    M[:, n:, :n] = np.swapaxes(P, 1, 2)
    return M


def _rhs(eta, xi, basis, kinds, vectors):
    """Right-hand sides ``b_L`` in scaled coordinates.

    ``eta`` (R, d) evaluation points, ``xi`` (R, n, d) stencil nodes,
    ``kinds`` (R,) operator kinds and ``vectors`` (R, d) first-order directions.
    """
    R, n, d = xi.shape
    m = basis.m
    off = eta[:, None, :] - xi
    r = np.linalg.norm(off, axis=-1)
    b = np.zeros((R, n + m))
    sel = kinds == KIND_IDENTITY
    if np.any(sel):
        b[sel, :n] = phs_value(r[sel], basis.k)
        b[sel, n:] = _monomials(eta[sel], basis.exponents)
    sel = kinds == KIND_LAPLACIAN
    if np.any(sel):
        b[sel, :n] = phs_laplacian(r[sel], basis.k, d)
        b[sel, n:] = sum(_monomials(eta[sel], basis.exponents, 2 * np.eye(d, dtype=int)[a]) for a in range(d))
    sel = kinds == KIND_FIRST_ORDER
    if np.any(sel):
        v = vectors[sel]
        b[sel, :n] = np.einsum("rjd,rd->rj", phs_gradient(off[sel], basis.k), v)
        grads = np.stack(
            [_monomials(eta[sel], basis.exponents, np.eye(d, dtype=int)[a]) for a in range(d)], axis=-1
        )
        b[sel, n:] = np.einsum("rmd,rd->rm", grads, v)
    return b


def _order_of(kinds):
    return np.where(kinds == KIND_LAPLACIAN, 2, np.where(kinds == KIND_FIRST_ORDER, 1, 0))


def _check_condition(cond, stencil):
    if not np.isfinite(cond) or cond > COND_ERROR:
        raise SingularStencilError(
            f"local system of stencil {stencil} is numerically singular (cond ~ {cond:.3g})",
            stencil=stencil,
            condition=cond,
        )
    if cond > COND_WARN:
        warnings.warn(f"local system of stencil {stencil} is ill-conditioned (cond ~ {cond:.3g})",
                      RuntimeWarning, stacklevel=3)


class LocalSystem:
    """Factorized saddle-point system of a single stencil.

    Parameters
    ----------
    nodes : (n, d) array
        Stencil nodes in physical coordinates; ``nodes[0]`` is the centre.
    basis : PhsBasis
    stencil : int, optional
        Index used in error messages.
    """

    def __init__(self, nodes, basis, stencil=None):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        n, d = nodes.shape
        if d != basis.d:
            raise StencilError(f"stencil dimension {d} does not match basis dimension {basis.d}")
        if n < basis.m:
            raise StencilError(f"stencil size n={n} is smaller than polynomial dimension m={basis.m}")
        self.nodes = nodes
        self.basis = basis
        self.stencil = stencil
        self.center = nodes[0].copy()
        radius = float(np.max(np.linalg.norm(nodes - self.center, axis=1)))
        self.scale = radius if radius > 0 else 1.0
        self.local = (nodes - self.center) / self.scale
        self.matrix = _saddle_matrices(self.local[None], basis)[0]
        self.condition = float(np.linalg.cond(self.matrix))
        _check_condition(self.condition, stencil)
        self.factor = sla.lu_factor(self.matrix, check_finite=False)

    @property
    def n(self):
        return len(self.nodes)

    def to_local(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if y.shape[1] != self.basis.d:
            y = y.reshape(-1, self.basis.d)
        return (y - self.center) / self.scale

    def solve(self, rhs):
        return sla.lu_solve(self.factor, rhs, check_finite=False)

    def operator_weights(self, y, op=IDENTITY):
        """Physical-space weights of ``op`` at ``y``; shape (n,) or (len(y), n)."""
        single = np.ndim(y) <= 1 and not (self.basis.d == 1 and np.ndim(y) == 1 and np.size(y) > 1)
        eta = self.to_local(y)
        R = len(eta)
        kinds = np.full(R, op.kind)
        vectors = np.zeros((R, self.basis.d))
        if op.kind == KIND_FIRST_ORDER:
            vectors[:] = op.vector
        b = _rhs(eta, np.broadcast_to(self.local, (R,) + self.local.shape), self.basis, kinds, vectors)
        # A~ is symmetric, so b A~^{-1} = (A~^{-1} b^T)^T
        w = self.solve(b.T).T[:, : self.n] / self.scale ** op.order
        return w[0] if single else w

    def cardinal_value(self, y, i):
        """Local cardinal function ``psi_i`` evaluated at ``y``."""
        return self.operator_weights(y, IDENTITY)[..., i]


def build_local_system(nodes, basis, stencil=None):
    return LocalSystem(nodes, basis, stencil)


def _chunk_size(width):
    return max(1, int(4e6 // (width * width)))


def stencil_weights(points, stencils, basis, eval_points, eval_stencil, kinds, vectors=None,
                    return_condition=False):
    """Weights of many (evaluation point, stencil, operator) requests at once.

    Parameters
    ----------
    points : (N, d) array
        All trial nodes.
    stencils : (K, n) int array
        Stencil node indices, row 0 entry being the centre.
    basis : PhsBasis
    eval_points : (R, d) array
    eval_stencil : (R,) int array
        Stencil (row of ``stencils``) used by each request.
    kinds : (R,) int array
        Operator kind per request.
    vectors : (R, d) array, optional
        Direction of first-order operators.

    Returns
    -------
    weights : (R, n) array
        Physical-space weights, to be applied to ``u[stencils[eval_stencil]]``.
    condition : (K,) array, only if ``return_condition``
        1-norm condition estimates of the local systems (NaN where unused).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    stencils = np.asarray(stencils, dtype=np.intp)
    K, n = stencils.shape
    d = pts.shape[1]
    if n < basis.m:
        raise StencilError(f"stencil size n={n} is smaller than polynomial dimension m={basis.m}")
    Y = np.asarray(eval_points, dtype=float).reshape(-1, d)
    sk = np.asarray(eval_stencil, dtype=np.intp)
    kinds = np.asarray(kinds, dtype=int)
    R = len(Y)
    if vectors is None:
        vectors = np.zeros((R, d))
    vectors = np.asarray(vectors, dtype=float).reshape(R, d)
    weights = np.empty((R, n))
    condition = np.full(K, np.nan)

    order = np.argsort(sk, kind="stable")
    used = np.unique(sk)
    bounds = np.searchsorted(sk[order], used)
    bounds = np.append(bounds, R)
    chunk = _chunk_size(n + basis.m)
    for c0 in range(0, len(used), chunk):
        ks = used[c0: c0 + chunk]
        nodes = pts[stencils[ks]]
        center = nodes[:, :1, :]
        radius = np.max(np.linalg.norm(nodes - center, axis=2), axis=1)
        scale = np.where(radius > 0, radius, 1.0)
        xi = (nodes - center) / scale[:, None, None]
        M = _saddle_matrices(xi, basis)
        try:
            inv = np.linalg.inv(M)
        except np.linalg.LinAlgError:
            for j, k in enumerate(ks):
                try:
                    np.linalg.inv(M[j])
                except np.linalg.LinAlgError:
                    raise SingularStencilError(
                        f"local system of stencil {k} is singular", stencil=int(k), condition=np.inf
                    ) from None
            raise
        cond = np.linalg.norm(M, 1, axis=(1, 2)) * np.linalg.norm(inv, 1, axis=(1, 2))
        condition[ks] = cond
        worst = int(np.nanargmax(np.where(np.isfinite(cond), cond, np.inf)))
        _check_condition(float(cond[worst]), int(ks[worst]))

        block = order[bounds[c0]: bounds[min(c0 + chunk, len(used))]]
        for r0 in range(0, len(block), chunk):
            rows = block[r0: r0 + chunk]
            local = np.searchsorted(ks, sk[rows])
            eta = (Y[rows] - center[local, 0, :]) / scale[local, None]
            b = _rhs(eta, xi[local], basis, kinds[rows], vectors[rows])
            w = np.einsum("rj,rjl->rl", b, inv[local][:, :, :n])
            weights[rows] = w / scale[local, None] ** _order_of(kinds[rows])[:, None]
    if return_condition:
        return weights, condition
    return weights
