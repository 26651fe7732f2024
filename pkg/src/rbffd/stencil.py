"""Stencil selection and Voronoi assignment of evaluation points.

Neighbour candidates come from a k-d tree; distances of the candidates are
then recomputed and ordered by ``(distance, index)`` so that equidistant
neighbours are resolved deterministically in favour of the smaller index.
"""
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import StencilError

__all__ = [
    "StencilTable",
    "build_stencils",
    "assign_evaluation_points",
    "poly_dim",
    "default_stencil_size",
]


def poly_dim(p, d):
    """Dimension ``binom(p + d, d)`` of the polynomials of degree <= p in d variables."""
    return comb(p + d, d)


def default_stencil_size(p, d):
    return 2 * poly_dim(p, d)


@dataclass(frozen=True, eq=False)
class StencilTable:
    """``indices[k]`` lists the ``n`` nodes of stencil ``k``; entry 0 is the centre."""

    indices: np.ndarray

    @property
    def n(self):
        return self.indices.shape[1]

    def __len__(self):
        return len(self.indices)


def _ordered_neighbors(tree, points, queries, k, exact_self=None):
    """k nearest points to each query, ordered by (distance, index)."""
    npts = len(points)
    k = min(k, npts)
    kk = min(npts, k + 8)
    out = np.empty((len(queries), k), dtype=np.intp)
    todo = np.arange(len(queries))
    while len(todo):
        _, cand = tree.query(queries[todo], k=kk)
        cand = cand.reshape(len(todo), kk)
        dist = np.linalg.norm(points[cand] - queries[todo][:, None, :], axis=2)
        order = np.lexsort((cand, dist), axis=1)
        cand = np.take_along_axis(cand, order, axis=1)
        dist = np.take_along_axis(dist, order, axis=1)
        # a tie straddling the end of the candidate list needs a wider query
        unsure = (dist[:, k - 1] >= dist[:, kk - 1]) & (kk < npts)
        done = todo[~unsure]
        out[done] = cand[~unsure, :k]
        todo = todo[unsure]
        kk = min(npts, 2 * kk)
    return out


def build_stencils(points, n, centers=None):
    """Exact ``n``-nearest-neighbour stencils around each centre.

    Parameters
    ----------
    points : (N, d) array
        All trial nodes, ghost points included.
    n : int
        Stencil size.
    centers : array of int, optional
        Indices of the centre nodes; defaults to every node.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    N = len(pts)
    if n > N:
        raise StencilError("stencil larger than node set")
    if n < 1:
        raise StencilError("stencil size must be positive")
    centers = np.arange(N) if centers is None else np.asarray(centers, dtype=np.intp)
    tree = cKDTree(pts)
    idx = _ordered_neighbors(tree, pts, pts[centers], n)
    # the centre has distance zero and is first for distinct nodes; enforce it
    bad = idx[:, 0] != centers
    if np.any(bad):
        for r in np.flatnonzero(bad):
            row = [c for c in idx[r] if c != centers[r]]
            idx[r] = [centers[r]] + row[: n - 1]
    return StencilTable(idx)


def assign_evaluation_points(Y, X, candidates=None):
    """Index of the nearest centre for every evaluation point, ties to the smaller index.

    ``candidates`` restricts the admissible centres (ghost nodes are excluded
    by the caller); returned indices refer to rows of ``X``.
    """
    Y = np.asarray(Y, dtype=float)
    X = np.asarray(X, dtype=float)
    if Y.ndim == 1:
        Y, X = Y[:, None], X.reshape(-1, 1) if X.ndim == 1 else X
    if len(X) == 0:
        raise StencilError("no stencil centres")
    cand = np.arange(len(X)) if candidates is None else np.asarray(candidates, dtype=np.intp)
    sub = X[cand]
    nearest = _ordered_neighbors(cKDTree(sub), sub, Y, 1)[:, 0]
    return cand[nearest]
