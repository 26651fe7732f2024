"""Sparse solves, singular-value estimates and product-matrix spectra."""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import ConvergenceError, SolverError

__all__ = [
    "NormalFactor",
    "SolveResult",
    "StabilityReport",
    "solve",
    "solve_least_squares",
    "solve_square",
    "dense_least_squares",
    "sigma_max",
    "sigma_min",
    "stability_norm",
    "condition_number",
    "stability_report",
    "product_matrix",
    "product_spectrum",
    "numerical_rank",
    "nullspace_count",
    "DENSE_LIMIT",
]

DENSE_LIMIT = 500
POWER_TOL = 1e-6
POWER_MAXITER = 500
NULL_TOL = 1e-8


class NormalFactor:
    """Sparse LU factorization of ``A^T A``, reused for solves and inverse iteration.

    SuperLU is given a symmetric ordering and no pivoting preference so that
    it behaves like a symmetric factorization of the SPD normal matrix.
    """

    def __init__(self, A):
        A = sp.csr_matrix(A)
        if A.shape[0] < A.shape[1]:
            raise SolverError(f"underdetermined system {A.shape}")
        self.A = A
        self.AT = A.T.tocsr()
        G = (self.AT @ A).tocsc()
        try:
            self.lu = spla.splu(G, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise SolverError(f"singular normal equations: {exc}", condition=np.inf) from None
        piv = np.abs(self.lu.U.diagonal())
        if not np.all(np.isfinite(piv)) or np.any(piv == 0.0):
            raise SolverError("singular normal equations: zero pivot", condition=np.inf)
        # pivot ratio is a cheap lower estimate of cond(A^T A)
        self.condition_estimate = float(piv.max() / piv.min())

    @property
    def shape(self):
        return self.A.shape

    def solve_normal(self, rhs):
        return self.lu.solve(rhs)


@dataclass
class SolveResult:
    x: np.ndarray
    residual_norm: float
    refinement_steps: int
    method: str


def solve_least_squares(A, b, factor=None, max_refine=3, rtol=1e-14):
    """Minimize ``||A x - b||_2`` through the normal equations.

    A few steps of iterative refinement on the true residual recover the
    accuracy lost by squaring the condition number; refinement stops once the
    correction drops below ``rtol`` relative to ``x``.
    """
    factor = factor or NormalFactor(A)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != factor.shape[0]:
        raise SolverError(f"right-hand side length {b.shape[0]} does not match {factor.shape[0]} rows")
    x = factor.solve_normal(factor.AT @ b)
    steps = 0
    for _ in range(max_refine):
        r = b - factor.A @ x
        dx = factor.solve_normal(factor.AT @ r)
        x = x + dx
        steps += 1
        if np.linalg.norm(dx) <= rtol * max(np.linalg.norm(x), 1e-300):
            break
    if not np.all(np.isfinite(x)):
        raise SolverError("non-finite solution", condition=factor.condition_estimate)
    res = float(np.linalg.norm(factor.A @ x - b))
    return SolveResult(x, res, steps, "normal-equations")


def solve_square(A, b):
    A = sp.csc_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise SolverError(f"square solve requested for a {A.shape} matrix")
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SolverError(f"singular collocation matrix: {exc}", condition=np.inf) from None
    x = lu.solve(np.asarray(b, dtype=float))
    if not np.all(np.isfinite(x)):
        raise SolverError("singular collocation matrix: non-finite solution", condition=np.inf)
    return SolveResult(x, float(np.linalg.norm(A @ x - b)), 0, "lu")


def solve(A, b, factor=None):
    """Square systems by LU, rectangular ones by least squares."""
    if A.shape[0] == A.shape[1] and factor is None:
        return solve_square(A, b)
    return solve_least_squares(A, b, factor=factor)


def dense_least_squares(A, b):
    """Orthogonal-factorization oracle for small systems."""
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    if A.shape[1] > DENSE_LIMIT:
        raise SolverError(f"dense oracle limited to N <= {DENSE_LIMIT}")
    Q, R = np.linalg.qr(A)
    x = sla.solve_triangular(R, Q.T @ b)
    return SolveResult(x, float(np.linalg.norm(A @ x - b)), 0, "qr")


def _start_vector(n, seed):
    v = np.random.default_rng(seed).standard_normal(n)
    return v / np.linalg.norm(v)


def _power(apply, n, tol, maxiter, seed):
    """Power iteration; returns ``(estimate, converged)``."""
    v = _start_vector(n, seed)
    lam = 0.0
    for _ in range(maxiter):
        w = apply(v)
        new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, True
        v = w / nw
        if abs(new - lam) <= tol * abs(new):
            return new, True
        lam = new
    return lam, False


def _lanczos(apply, n, seed):
    """Largest eigenvalue of a symmetric positive operator by ARPACK."""
    op = spla.LinearOperator((n, n), matvec=apply, dtype=float)
    try:
        vals = spla.eigsh(op, k=1, which="LA", v0=_start_vector(n, seed), tol=1e-10,
                          maxiter=20 * n, return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"Lanczos iteration did not converge: {exc}", iterations=20 * n) from None
    return float(vals[0])


def _dominant(apply, n, tol, maxiter, seed):
    # power iteration first; clustered spectra fall back to Lanczos on the same operator
    lam, ok = _power(apply, n, tol, maxiter, seed)
    if ok:
        return lam
    if n < 3:
        raise ConvergenceError(f"power iteration did not converge in {maxiter} iterations", iterations=maxiter)
    return _lanczos(apply, n, seed)


def sigma_max(A, tol=POWER_TOL, maxiter=POWER_MAXITER, seed=0):
    """Largest singular value by power iteration on ``A^T A``.

    Rayleigh quotients and Ritz values never exceed the true value, so the
    estimate is a lower bound.
    """
    A = sp.csr_matrix(A)
    AT = A.T.tocsr()
    lam = _dominant(lambda v: AT @ (A @ v), A.shape[1], tol, maxiter, seed)
    return float(np.sqrt(lam))


def sigma_min(A, factor=None, tol=POWER_TOL, maxiter=POWER_MAXITER, seed=0):
    """Smallest singular value by inverse iteration with the normal-equation factor."""
    factor = factor or NormalFactor(A)
    mu = _dominant(factor.solve_normal, factor.shape[1], tol, maxiter, seed)
    if mu <= 0.0:
        raise SolverError("inverse iteration produced a nonpositive estimate")
    return float(1.0 / np.sqrt(mu))


def stability_norm(Ebar, Dbar, factor=None):
    """``sigma_max(Ebar) / sigma_min(Dbar)``."""
    smin = sigma_min(Dbar, factor)
    if smin <= 0.0:
        raise SolverError("sigma_min is zero")
    return sigma_max(Ebar) / smin


def condition_number(A, factor=None):
    """``sigma_max / sigma_min``; wide matrices are handled through their transpose."""
    if A.shape[0] < A.shape[1]:
        A = sp.csr_matrix(A).T
        factor = None
    return sigma_max(A) / sigma_min(A, factor)


@dataclass
class StabilityReport:
    sigma_max_E: float
    sigma_min_D: float
    sigma_max_D: float
    kappa_E: float

    @property
    def stability_norm(self):
        return self.sigma_max_E / self.sigma_min_D

    @property
    def kappa_D(self):
        return self.sigma_max_D / self.sigma_min_D


def stability_report(Ebar, Dbar, E=None, factor=None):
    """Stability norm and condition numbers of one discretization.

    ``Ebar`` and ``Dbar`` are the matrices of the eliminated system; ``E`` is
    the full evaluation matrix used for ``kappa_E`` (``Ebar`` if omitted).
    """
    factor = factor or NormalFactor(Dbar)
    return StabilityReport(
        sigma_max_E=sigma_max(Ebar),
        sigma_min_D=sigma_min(Dbar, factor),
        sigma_max_D=sigma_max(Dbar),
        kappa_E=condition_number(Ebar if E is None else E),
    )


def product_matrix(E, D, which="E_times_Dplus"):
    """Dense square product ``E D^+`` (default) or ``D E^+``."""
    E = E.toarray() if sp.issparse(E) else np.asarray(E, dtype=float)
    D = D.toarray() if sp.issparse(D) else np.asarray(D, dtype=float)
    if E.shape[1] > DENSE_LIMIT or D.shape[1] > DENSE_LIMIT:
        raise SolverError(f"dense spectra limited to N <= {DENSE_LIMIT}")
    if which == "E_times_Dplus":
        P = E @ np.linalg.pinv(D)
    elif which == "D_times_Eplus":
        P = D @ np.linalg.pinv(E)
    else:
        raise SolverError(f"unknown product ordering {which!r}")
    if P.shape[0] != P.shape[1]:
        raise SolverError(f"product matrix is not square: {P.shape}")
    return P


def product_spectrum(E, D, which="E_times_Dplus"):
    """Eigenvalues of the square product ``E D^+`` (default) or ``D E^+``."""
    return np.linalg.eigvals(product_matrix(E, D, which))


def numerical_rank(P, tol=NULL_TOL):
    """Number of singular values above ``tol`` times the largest."""
    s = np.linalg.svd(P, compute_uv=False)
    return int(np.sum(s > tol * s[0])) if len(s) else 0


def nullspace_count(eigenvalues, tol=NULL_TOL):
    mags = np.abs(np.asarray(eigenvalues))
    if len(mags) == 0:
        return 0
    return int(np.sum(mags < tol * mags.max()))
