"""Manufactured solutions with hand-derived gradients and Laplacians."""
import numpy as np

from .exceptions import ProblemError
from .geometry import BoundaryClass

__all__ = [
    "Problem",
    "distance",
    "nonanalytic",
    "rational_sine",
    "sin3d",
    "polynomial",
    "make_problem",
    "evaluate_solution",
    "evaluate_rhs",
    "relative_error",
    "PROBLEMS",
]

NONANALYTIC_TERMS = 6


class Problem:
    """Exact solution ``u`` together with ``grad u`` and ``lap u``.

    All three callables take an ``(M, d)`` array and are vectorized.
    """

    def __init__(self, name, u, grad, laplacian, dim=2):
        self.name = name
        self.u = u
        self.grad = grad
        self.laplacian = laplacian
        self.dim = dim

    def __repr__(self):
        return f"Problem({self.name!r})"


def _xy(pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    return pts[:, 0], pts[:, 1]


# -- Distance: u = |x| ---------------------------------------------------------

def _dist_u(pts):
    return np.linalg.norm(np.atleast_2d(pts), axis=1)


def _dist_grad(pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    r = np.linalg.norm(pts, axis=1)
    if np.any(r == 0.0):
        raise ProblemError("gradient of the Distance solution is undefined at the origin")
    return pts / r[:, None]


def _dist_lap(pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    r = np.linalg.norm(pts, axis=1)
    if np.any(r == 0.0):
        raise ProblemError("Laplacian of the Distance solution is singular at the origin")
    return (pts.shape[1] - 1) / r


# -- truncated Non-analytic ----------------------------------------------------

_NA_FREQ = 2.0 ** np.arange(NONANALYTIC_TERMS)
_NA_COEF = np.exp(-np.sqrt(_NA_FREQ))


def _na_u(pts):
    x, y = _xy(pts)
    return np.sum(_NA_COEF * (np.cos(np.outer(x, _NA_FREQ)) + np.cos(np.outer(y, _NA_FREQ))), axis=1)


def _na_grad(pts):
    x, y = _xy(pts)
    gx = -np.sum(_NA_COEF * _NA_FREQ * np.sin(np.outer(x, _NA_FREQ)), axis=1)
    gy = -np.sum(_NA_COEF * _NA_FREQ * np.sin(np.outer(y, _NA_FREQ)), axis=1)
    return np.column_stack([gx, gy])


def _na_lap(pts):
    x, y = _xy(pts)
    return -np.sum(_NA_COEF * _NA_FREQ ** 2 * (np.cos(np.outer(x, _NA_FREQ)) + np.cos(np.outer(y, _NA_FREQ))),
                   axis=1)


# -- Rational sine -------------------------------------------------------------
# u = A(x) B(x) + S(y) / Q(x, y)
#   A = sin(2 (x - 0.1)^2), B = cos((x - 0.3)^2),
#   S = sin(2 (y - 0.5)^2)^2, Q = 1 + 2 x^2 + y^2

def _rs_parts(x, y):
    a = x - 0.1
    b = x - 0.3
    c = y - 0.5
    A = np.sin(2 * a * a)
    A1 = 4 * a * np.cos(2 * a * a)
    A2 = 4 * np.cos(2 * a * a) - 16 * a * a * np.sin(2 * a * a)
    B = np.cos(b * b)
    B1 = -2 * b * np.sin(b * b)
    B2 = -2 * np.sin(b * b) - 4 * b * b * np.cos(b * b)
    g = 2 * c * c
    g1 = 4 * c
    S = np.sin(g) ** 2
    S1 = np.sin(2 * g) * g1
    S2 = 2 * np.cos(2 * g) * g1 * g1 + 4 * np.sin(2 * g)
    Q = 1 + 2 * x * x + y * y
    return A, A1, A2, B, B1, B2, S, S1, S2, Q


def _rs_u(pts):
    x, y = _xy(pts)
    A, _, _, B, _, _, S, _, _, Q = _rs_parts(x, y)
    return A * B + S / Q


def _rs_grad(pts):
    x, y = _xy(pts)
    A, A1, _, B, B1, _, S, S1, _, Q = _rs_parts(x, y)
    gx = A1 * B + A * B1 - 4 * x * S / Q ** 2
    gy = S1 / Q - 2 * y * S / Q ** 2
    return np.column_stack([gx, gy])


def _rs_lap(pts):
    x, y = _xy(pts)
    A, A1, A2, B, B1, B2, S, S1, S2, Q = _rs_parts(x, y)
    t1_xx = A2 * B + 2 * A1 * B1 + A * B2
    t2_xx = S * (-4 / Q ** 2 + 32 * x * x / Q ** 3)
    t2_yy = S2 / Q - 4 * y * S1 / Q ** 2 - 2 * S / Q ** 2 + 8 * y * y * S / Q ** 3
    return t1_xx + t2_xx + t2_yy


# -- 3D: u = sin(3 pi x y z) ---------------------------------------------------

def _s3_u(pts):
    pts = np.atleast_2d(pts)
    return np.sin(3 * np.pi * np.prod(pts, axis=1))


def _s3_grad(pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    x, y, z = pts.T
    c = 3 * np.pi * np.cos(3 * np.pi * x * y * z)
    return np.column_stack([c * y * z, c * x * z, c * x * y])


def _s3_lap(pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    x, y, z = pts.T
    return -9 * np.pi ** 2 * (x * x * y * y + x * x * z * z + y * y * z * z) * np.sin(3 * np.pi * x * y * z)


distance = Problem("distance", _dist_u, _dist_grad, _dist_lap)
nonanalytic = Problem("nonanalytic", _na_u, _na_grad, _na_lap)
rational_sine = Problem("rationalsine", _rs_u, _rs_grad, _rs_lap)
sin3d = Problem("sin3d", _s3_u, _s3_grad, _s3_lap, dim=3)


def polynomial(exponents, coefficients=None, name="polynomial"):
    """Sum of monomials ``c_j x^e_j``; exact for any method with degree >= max |e_j|."""
    exps = np.atleast_2d(np.asarray(exponents, dtype=int))
    d = exps.shape[1]
    coef = np.ones(len(exps)) if coefficients is None else np.asarray(coefficients, dtype=float)

    def mono(pts, shift):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        total = np.zeros(len(pts))
        for e, c in zip(exps, coef):
            f = c
            term = np.ones(len(pts))
            for a in range(d):
                k = e[a] - shift[a]
                if k < 0:
                    f = 0.0
                    break
                for s in range(shift[a]):
                    f *= e[a] - s
                term = term * pts[:, a] ** k
            total += f * term
        return total

    zero = np.zeros(d, dtype=int)
    eye = np.eye(d, dtype=int)
    return Problem(
        name,
        lambda pts: mono(pts, zero),
        lambda pts: np.column_stack([mono(pts, eye[a]) for a in range(d)]),
        lambda pts: sum(mono(pts, 2 * eye[a]) for a in range(d)),
        dim=d,
    )


PROBLEMS = {
    "distance": distance,
    "nonanalytic": nonanalytic,
    "rationalsine": rational_sine,
    "sin3d": sin3d,
}


def make_problem(name):
    key = name.lower().replace("_", "").replace("-", "")
    try:
        return PROBLEMS[key]
    except KeyError:
        raise ProblemError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


def evaluate_solution(problem, points):
    return problem.u(points)


def evaluate_rhs(problem, points, tags, normals=None):
    """Data ``F(y)``: Laplacian inside, ``u`` on Dirichlet and ``grad u . n`` on Neumann points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    tags = np.broadcast_to(np.asarray(tags), (len(pts),))
    out = np.empty(len(pts))
    inner = (tags == BoundaryClass.INTERIOR) | (tags == BoundaryClass.GHOST)
    if np.any(inner):
        out[inner] = problem.laplacian(pts[inner])
    dir_ = tags == BoundaryClass.DIRICHLET
    if np.any(dir_):
        out[dir_] = problem.u(pts[dir_])
    neu = tags == BoundaryClass.NEUMANN
    if np.any(neu):
        if normals is None:
            raise ProblemError("Neumann data requires normals")
        nrm = np.atleast_2d(np.asarray(normals, dtype=float))
        out[neu] = np.sum(problem.grad(pts[neu]) * nrm[neu], axis=1)
    return out


def relative_error(uh, u):
    """``||uh - u||_2 / ||u||_2`` over the evaluation points."""
    uh = np.asarray(uh, dtype=float)
    u = np.asarray(u, dtype=float)
    den = np.linalg.norm(u)
    if den == 0.0:
        raise ProblemError("relative error undefined: exact solution vanishes on the evaluation set")
    return float(np.linalg.norm(uh - u) / den)
