"""Node sets: trial nodes X, oversampled evaluation points Y, ghost layers.

The generator replaces a mesh-based node placer with a simple and
deterministic scheme:

1. boundary nodes at (approximately) equal arc length / surface spacing ``h``;
2. interior nodes on a randomly shifted, slightly jittered hexagonal (2D) or
   FCC (3D) lattice, clipped half a spacing away from the boundary;
3. at most 50 sweeps of short-range repulsion that leave boundary nodes fixed.
"""
from dataclasses import dataclass, field, replace
import math
import warnings

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import NodeGenerationError
from .geometry import BoundaryClass

__all__ = [
    "NodeSet",
    "SpacingReport",
    "generate_nodes",
    "generate_evaluation_set",
    "add_ghost_layer",
    "spacing_report",
    "fill_distance",
    "separation_distance",
    "spacing_for_count",
    "locate_subset",
    "save_nodes",
    "load_nodes",
]

MAX_RELAX_ITER = 50
_TAG_NAMES = {c: c.name.lower() for c in BoundaryClass}
_TAG_VALUES = {v: k for k, v in _TAG_NAMES.items()}


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Scattered points with boundary tags, normals and parameter values.

    ``normals`` and ``params`` are NaN for interior and ghost points.
    """

    points: np.ndarray
    tags: np.ndarray
    normals: np.ndarray
    params: np.ndarray
    h: float
    seed: int = 0
    warnings: tuple = field(default=())

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        n = len(pts)
        tags = np.asarray(self.tags, dtype=np.int8).reshape(n)
        normals = np.asarray(self.normals, dtype=float).reshape(n, pts.shape[1])
        params = np.asarray(self.params, dtype=float).reshape(n, -1)
        object.__setattr__(self, "points", _readonly(pts))
        object.__setattr__(self, "tags", _readonly(tags))
        object.__setattr__(self, "normals", _readonly(normals))
        object.__setattr__(self, "params", _readonly(params))

    def __len__(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def boundary_mask(self):
        return (self.tags == BoundaryClass.DIRICHLET) | (self.tags == BoundaryClass.NEUMANN)

    @property
    def ghost_mask(self):
        return self.tags == BoundaryClass.GHOST

    def count(self, tag):
        return int(np.sum(self.tags == tag))

    def digest(self):
        """Hash of all arrays, used to check determinism."""
        import hashlib

        m = hashlib.sha256()
        for a in (self.points, self.tags, self.normals, self.params):
            m.update(np.ascontiguousarray(a).tobytes())
        return m.hexdigest()


@dataclass(frozen=True)
class SpacingReport:
    fill_distance: float
    separation_distance: float

    @property
    def quality(self):
        return self.separation_distance / self.fill_distance


def _hex_lattice(lo, hi, h, offset):
    dy = h * math.sqrt(3.0) / 2.0
    ny = int(math.ceil((hi[1] - lo[1]) / dy)) + 2
    nx = int(math.ceil((hi[0] - lo[0]) / h)) + 2
    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    x = lo[0] - h + i * h + 0.5 * h * (j % 2) + offset[0]
    y = lo[1] - dy + j * dy + offset[1]
    return np.column_stack([x.ravel(), y.ravel()])


def _fcc_lattice(lo, hi, h, offset):
    a = h * math.sqrt(2.0)
    counts = [int(math.ceil((hi[k] - lo[k]) / a)) + 2 for k in range(3)]
    grid = np.stack(np.meshgrid(*[np.arange(c) for c in counts], indexing="ij"), axis=-1).reshape(-1, 3)
    basis = np.array([[0, 0, 0], [0.5, 0.5, 0], [0.5, 0, 0.5], [0, 0.5, 0.5]])
    pts = (grid[:, None, :] + basis[None, :, :]).reshape(-1, 3) * a
    return pts + (np.asarray(lo) - a) + offset


def _relax(points, fixed, h, domain, depth, max_iter=MAX_RELAX_ITER, project=None):
    """Short-range repulsion; ``fixed`` points act as sources but never move."""
    x = points.copy()
    movable = ~fixed
    dt = 0.2
    for _ in range(max_iter):
        tree = cKDTree(x)
        pairs = tree.query_pairs(h, output_type="ndarray")
        if len(pairs) == 0:
            break
        i, j = pairs[:, 0], pairs[:, 1]
        vec = x[i] - x[j]
        d = np.linalg.norm(vec, axis=1)
        d = np.maximum(d, 1e-12 * h)
        f = ((h - d) / d)[:, None] * vec
        disp = np.zeros_like(x)
        np.add.at(disp, i, f)
        np.add.at(disp, j, -f)
        disp[~movable] = 0.0
        step = dt * disp
        x += step
        if project is None:
            x[movable] = domain.push_inside(x[movable], depth)
        else:
            x[movable] = project(x[movable])
        if np.max(np.linalg.norm(step, axis=1)) < 1e-3 * h:
            break
    return x


def surface_nodes(domain, h, rng=None):
    """Quasi-uniform nodes on the boundary of a 3D radial domain.

    Area-weighted rejection sampling of directions followed by repulsion on
    the surface. Returns ``(points, normals, directions)``.
    """
    rng = np.random.default_rng(rng)
    area = domain.surface_area()
    count = max(int(round(area / (math.sqrt(3.0) / 2.0 * h * h))), 8)
    probe = rng.normal(size=(20000, 3))
    probe /= np.linalg.norm(probe, axis=1)[:, None]
    dmax = float(np.max(domain.area_density(probe))) * 1.05
    chosen = []
    total = 0
    while total < count:
        cand = rng.normal(size=(4 * count, 3))
        cand /= np.linalg.norm(cand, axis=1)[:, None]
        keep = rng.random(len(cand)) * dmax < domain.area_density(cand)
        chosen.append(cand[keep])
        total += int(keep.sum())
    omega = np.concatenate(chosen)[:count]

    def project(pts):
        w = pts / np.linalg.norm(pts, axis=1)[:, None]
        return domain.point(w)

    pts = _relax(domain.point(omega), np.zeros(count, bool), h, domain, 0.0, project=project)
    omega = pts / np.linalg.norm(pts, axis=1)[:, None]
    pts = domain.point(omega)
    return pts, domain.outward_normal(omega), omega


def generate_nodes(domain, h, seed=0, bc_mode="mixed"):
    """Generate a quasi-uniform node set with target spacing ``h``.

    Boundary nodes come first, followed by interior nodes. The result is a
    deterministic function of ``(domain, h, seed, bc_mode)``.
    """
    if h <= 0:
        raise NodeGenerationError("spacing h must be positive")
    rng = np.random.default_rng(seed)
    bpts, bnrm, bpar = domain.boundary_nodes(h, rng)
    bpar = np.asarray(bpar, dtype=float).reshape(len(bpts), -1)
    btags = domain.classify(bpts, bpar.squeeze(-1) if bpar.shape[1] == 1 else bpar, bc_mode)

    lo, hi = domain.bounding_box()
    offset = rng.random(domain.dim) * h
    lattice = _hex_lattice(lo, hi, h, offset) if domain.dim == 2 else _fcc_lattice(lo, hi, h, offset)
    lattice += rng.uniform(-0.05 * h, 0.05 * h, size=lattice.shape)
    interior = lattice[domain.level(lattice) < -0.5 * h]
    if len(interior) < 1 or len(interior) + len(bpts) < 10:
        raise NodeGenerationError(f"insufficient nodes: domain too small for h={h}")

    allpts = np.concatenate([bpts, interior])
    fixed = np.zeros(len(allpts), bool)
    fixed[: len(bpts)] = True
    allpts = _relax(allpts, fixed, h, domain, 0.4 * h)

    dmin = cKDTree(allpts).query(allpts, k=2)[0][:, 1].min()
    if dmin < 1e-6 * h:
        raise NodeGenerationError("degenerate node set: relaxation produced duplicate points")

    nb, ni = len(bpts), len(interior)
    d = domain.dim
    normals = np.concatenate([bnrm, np.full((ni, d), np.nan)])
    params = np.concatenate([bpar, np.full((ni, bpar.shape[1]), np.nan)])
    tags = np.concatenate([btags, np.full(ni, BoundaryClass.INTERIOR, np.int8)])
    return NodeSet(allpts, tags, normals, params, float(h), int(seed))


def generate_evaluation_set(domain, X, q, seed=1, bc_mode="mixed"):
    """Oversampled evaluation set ``Y`` with ``X`` contained in ``Y``.

    An auxiliary set is generated with spacing ``h / q**(1/d)`` and, for every
    ``x_k`` (in index order), the nearest unused auxiliary point of the same
    kind (boundary or interior) is replaced by ``x_k``. Ghost points of ``X``
    are ignored. The returned set has an extra attribute-free mapping available
    through :func:`locate_subset`.
    """
    if q < 1:
        raise NodeGenerationError("oversampling parameter q must be >= 1")
    keep = ~X.ghost_mask
    base = NodeSet(X.points[keep], X.tags[keep], X.normals[keep], X.params[keep], X.h, X.seed)
    if q == 1:
        return base
    hy = X.h / q ** (1.0 / X.dim)
    Yt = generate_nodes(domain, hy, seed, bc_mode)
    pts = Yt.points.copy()
    tags = Yt.tags.copy()
    normals = Yt.normals.copy()
    params = Yt.params.copy()
    if params.shape[1] != base.params.shape[1]:
        raise NodeGenerationError("parameter layout of X and Y differ")
    used = np.zeros(len(pts), bool)
    for boundary in (True, False):
        ymask = Yt.boundary_mask if boundary else ~Yt.boundary_mask
        yidx = np.flatnonzero(ymask)
        xidx = np.flatnonzero(base.boundary_mask if boundary else ~base.boundary_mask)
        if len(xidx) > len(yidx):
            raise NodeGenerationError("snapping exhausted the evaluation set")
        tree = cKDTree(Yt.points[yidx])
        for k in xidx:
            kk = min(8, len(yidx))
            while True:
                _, cand = tree.query(base.points[k], k=kk)
                cand = np.atleast_1d(cand)
                free = [c for c in cand if not used[yidx[c]]]
                if free:
                    j = yidx[free[0]]
                    break
                if kk >= len(yidx):
                    raise NodeGenerationError("snapping exhausted the evaluation set")
                kk = min(2 * kk, len(yidx))
            used[j] = True
            pts[j] = base.points[k]
            tags[j] = base.tags[k]
            normals[j] = base.normals[k]
            params[j] = base.params[k]
    return NodeSet(pts, tags, normals, params, hy, int(seed))


def locate_subset(X, Y):
    """Indices ``idx`` with ``Y.points[idx[k]] == X.points[k]`` for non-ghost ``x_k``.

    Returns -1 for ghost points. Raises if some point is missing.
    """
    out = np.full(len(X), -1, dtype=np.intp)
    tree = cKDTree(Y.points)
    keep = np.flatnonzero(~X.ghost_mask)
    d, j = tree.query(X.points[keep])
    if np.any(d > 0.0):
        raise NodeGenerationError("X is not a subset of Y")
    out[keep] = j
    return out


def add_ghost_layer(X, h=None, domain=None):
    """Append one ghost point ``x_b + h n(x_b)`` per boundary point of ``X``.

    Ghost points that land inside ``domain`` are kept, and a warning record is
    attached to the returned set.
    """
    h = X.h if h is None else float(h)
    b = np.flatnonzero(X.boundary_mask)
    if len(b) == 0:
        raise NodeGenerationError("node set has no boundary points with normals")
    ghosts = X.points[b] + h * X.normals[b]
    notes = list(X.warnings)
    if domain is not None:
        bad = np.flatnonzero(domain.level(ghosts) <= 0.0)
        if len(bad):
            msg = f"{len(bad)} ghost points fall inside the domain"
            notes.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
    d = X.dim
    return NodeSet(
        np.concatenate([X.points, ghosts]),
        np.concatenate([X.tags, np.full(len(b), BoundaryClass.GHOST, np.int8)]),
        np.concatenate([X.normals, np.full((len(b), d), np.nan)]),
        np.concatenate([X.params, np.full((len(b), X.params.shape[1]), np.nan)]),
        X.h,
        X.seed,
        tuple(notes),
    )


def separation_distance(points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) < 2:
        raise ValueError("need at least two points")
    return 0.5 * float(cKDTree(pts).query(pts, k=2)[0][:, 1].min())


def fill_distance(points, probes):
    pts = np.asarray(points, dtype=float)
    probes = np.asarray(probes, dtype=float)
    if pts.ndim == 1:
        pts, probes = pts[:, None], probes.reshape(-1, 1)
    return float(cKDTree(pts).query(probes)[0].max())


def spacing_report(X, domain, n_probes=None, seed=0):
    """Fill distance (probe estimate, at least ``10 N`` probes) and exact separation."""
    pts = X.points if isinstance(X, NodeSet) else np.asarray(X, dtype=float)
    if isinstance(X, NodeSet):
        pts = pts[~X.ghost_mask]
    n_probes = max(10 * len(pts), n_probes or 0)
    probes = domain.probe_points(n_probes, seed=seed)
    return SpacingReport(fill_distance(pts, probes), separation_distance(pts))


def spacing_for_count(domain, count):
    """Target spacing ``h`` for which the generator yields about ``count`` nodes."""
    d = domain.dim
    vol = domain.volume()
    if d == 2:
        per = sum(domain.boundary_measures())
        # count = 2 vol / (sqrt3 h^2) + per / h, solved for 1/h
        a, b = 2.0 * vol / math.sqrt(3.0), per
        inv = (-b + math.sqrt(b * b + 4 * a * count)) / (2 * a)
        return 1.0 / inv
    area = sum(domain.boundary_measures())
    # count = sqrt2 vol / h^3 + 2 area / (sqrt3 h^2); fixed point in h
    h = (math.sqrt(2.0) * vol / count) ** (1.0 / 3.0)
    for _ in range(50):
        h = ((math.sqrt(2.0) * vol) / (count - 2 * area / (math.sqrt(3.0) * h * h))) ** (1.0 / 3.0)
    return h


def save_nodes(path, X):
    """Write a node set as plain text: coordinates, tag, normal components."""
    d = X.dim
    with open(path, "w") as fh:
        fh.write(f"# dim={d} h={X.h!r} n={len(X)}\n")
        for p, t, nrm in zip(X.points, X.tags, X.normals):
            fields = [repr(float(v)) for v in p] + [_TAG_NAMES[BoundaryClass(int(t))]]
            if not np.any(np.isnan(nrm)):
                fields += [repr(float(v)) for v in nrm]
            fh.write(" ".join(fields) + "\n")


def load_nodes(path):
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise NodeGenerationError("missing node-file header")
        meta = dict(tok.split("=") for tok in header[1:].split())
        d, h, n = int(meta["dim"]), float(meta["h"]), int(meta["n"])
        pts, tags, nrms = [], [], []
        for line in fh:
            if not line.strip():
                continue
            tok = line.split()
            pts.append([float(v) for v in tok[:d]])
            tags.append(_TAG_VALUES[tok[d]])
            nrm = [float(v) for v in tok[d + 1: d + 1 + d]]
            nrms.append(nrm if len(nrm) == d else [np.nan] * d)
    if len(pts) != n:
        raise NodeGenerationError(f"header announces {n} points, file has {len(pts)}")
    return NodeSet(np.array(pts), np.array(tags), np.array(nrms), np.full((n, 1), np.nan), h)


def with_tags(X, tags):
    return replace(X, tags=np.asarray(tags, dtype=np.int8))
