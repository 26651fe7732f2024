"""Implicitly defined computational domains.

Three families are provided:

* radial (star-shaped) domains whose boundary is ``|x| = r(direction)``:
  :class:`PolarCurve2D` (the seven-petal star), :class:`Disk` and
  :class:`Spherical3D`;
* :class:`Box`, an axis-aligned box used as an exact-geometry fixture.

Every domain answers the same queries: a signed level function that is
negative inside, boundary sampling with outward normals and parameter values,
boundary classification into Dirichlet/Neumann parts, and region measures
used by the row scaling of the least-squares system.
"""
from enum import IntEnum
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.stats import qmc

from .exceptions import GeometryError

__all__ = [
    "BoundaryClass",
    "Domain",
    "RadialDomain",
    "PolarCurve2D",
    "Disk",
    "Spherical3D",
    "Box",
    "polar_radius",
    "spherical_radius",
    "make_domain",
]

TWO_PI = 2.0 * np.pi


class BoundaryClass(IntEnum):
    INTERIOR = 0
    DIRICHLET = 1
    NEUMANN = 2
    GHOST = 3


def wrap_angle(theta):
    """Map angles to [-pi, pi)."""
    return np.mod(np.asarray(theta, dtype=float) + np.pi, TWO_PI) - np.pi


def polar_radius(theta, amplitude=0.1, frequencies=(7, 1)):
    """Radius ``1 + amplitude * sum(sin(f * theta))`` of the 2D star boundary."""
    theta = np.asarray(theta, dtype=float)
    r = np.ones_like(theta)
    for f in frequencies:
        r = r + amplitude * np.sin(f * theta)
    return r


def spherical_radius(theta, phi, frequency=2.0):
    """Radius of the 3D test surface at longitude ``theta`` and angle ``phi``.

    ``r = sqrt(1 + sin^2(a sin(phi) sin(theta)) sin^2(a sin(phi) cos(theta))
    sin^2(a cos(phi)))`` with ``a = frequency``. The value only depends on the
    direction ``(sin(phi) cos(theta), sin(phi) sin(theta), cos(phi))``.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    a = frequency
    s = (
        np.sin(a * np.sin(phi) * np.sin(theta)) ** 2
        * np.sin(a * np.sin(phi) * np.cos(theta)) ** 2
        * np.sin(a * np.cos(phi)) ** 2
    )
    return np.sqrt(1.0 + s)


class Domain:
    """Base class. Subclasses are immutable after construction."""

    dim = 2
    name = "domain"

    def level(self, x):
        """Signed level function: negative inside, zero on the boundary."""
        raise NotImplementedError

    def inside(self, x):
        return self.level(x) < 0.0

    def volume(self):
        raise NotImplementedError

    def bounding_box(self):
        raise NotImplementedError

    def boundary_nodes(self, h, rng=None):
        """Quasi-uniform boundary points with spacing about ``h``.

        Returns ``(points, normals, params)``.
        """
        raise NotImplementedError

    def outward_normal(self, params):
        raise NotImplementedError

    def classify(self, points, params, bc_mode="mixed"):
        """Tag boundary points as Dirichlet or Neumann."""
        raise NotImplementedError

    def boundary_measures(self, bc_mode="mixed"):
        """Return ``(|dOmega_0|, |dOmega_1|)`` for the Dirichlet/Neumann parts."""
        raise NotImplementedError

    def push_inside(self, x, depth):
        """Move points that are closer than ``depth`` to the boundary back inside."""
        raise NotImplementedError

    def probe_points(self, count, seed=0):
        """Quasi-random points inside the domain (Halton sequence, rejection)."""
        lo, hi = self.bounding_box()
        sampler = qmc.Halton(d=self.dim, scramble=True, seed=seed)
        out = []
        total = 0
        while total < count:
            pts = qmc.scale(sampler.random(2 * count), lo, hi)
            pts = pts[self.inside(pts)]
            out.append(pts)
            total += len(pts)
        return np.concatenate(out)[:count]


class RadialDomain(Domain):
    """Star-shaped domain ``{x : |x| < r(x / |x|)}``."""

    def radius_of_direction(self, omega):
        raise NotImplementedError

    def radius_gradient(self, omega):
        """Euclidean gradient of ``r`` viewed as a function of the direction."""
        raise NotImplementedError

    def level(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        rho = np.linalg.norm(x, axis=1)
        omega = np.zeros_like(x)
        nz = rho > 0
        omega[nz] = x[nz] / rho[nz, None]
        omega[~nz, 0] = 1.0
        return rho - self.radius_of_direction(omega)

    def push_inside(self, x, depth):
        x = np.array(x, dtype=float)
        rho = np.linalg.norm(x, axis=1)
        nz = rho > 0
        omega = np.zeros_like(x)
        omega[nz] = x[nz] / rho[nz, None]
        r = self.radius_of_direction(np.where(nz[:, None], omega, 1.0))
        bad = nz & (rho > r - depth)
        x[bad] = omega[bad] * (r[bad] - depth)[:, None]
        return x

    def normal_from_direction(self, omega):
        omega = np.atleast_2d(omega)
        r = self.radius_of_direction(omega)
        g = self.radius_gradient(omega)
        g_tan = g - np.sum(g * omega, axis=1)[:, None] * omega
        grad = omega - g_tan / r[:, None]
        norm = np.linalg.norm(grad, axis=1)
        if np.any(norm < 1e-14):
            raise GeometryError("degenerate parameterization point")
        return grad / norm[:, None]


class PolarCurve2D(RadialDomain):
    """2D domain bounded by ``r(theta) = 1 + a * sum_f sin(f theta)``.

    The defaults give the seven-petal star used in the experiments. The
    Dirichlet part is ``theta in [-pi, 0)`` and the Neumann part
    ``theta in [0, pi)``.
    """

    dim = 2
    name = "star"

    def __init__(self, amplitude=0.1, frequencies=(7, 1)):
        self.amplitude = float(amplitude)
        self.frequencies = tuple(float(f) for f in frequencies)

    def __repr__(self):
        return f"{type(self).__name__}(amplitude={self.amplitude}, frequencies={self.frequencies})"

    def radius(self, theta):
        return polar_radius(theta, self.amplitude, self.frequencies)

    def radius_derivative(self, theta):
        theta = np.asarray(theta, dtype=float)
        dr = np.zeros_like(theta)
        for f in self.frequencies:
            dr = dr + self.amplitude * f * np.cos(f * theta)
        return dr

    def radius_of_direction(self, omega):
        omega = np.atleast_2d(omega)
        return self.radius(np.arctan2(omega[:, 1], omega[:, 0]))

    def radius_gradient(self, omega):
        omega = np.atleast_2d(omega)
        theta = np.arctan2(omega[:, 1], omega[:, 0])
        tangent = np.column_stack([-np.sin(theta), np.cos(theta)])
        return self.radius_derivative(theta)[:, None] * tangent

    def point(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        return np.column_stack([r * np.cos(theta), r * np.sin(theta)])

    def tangent(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        dr = self.radius_derivative(theta)
        c, s = np.cos(theta), np.sin(theta)
        return np.column_stack([dr * c - r * s, dr * s + r * c])

    def outward_normal(self, params):
        t = self.tangent(np.atleast_1d(params))
        norm = np.linalg.norm(t, axis=1)
        if np.any(norm < 1e-14):
            raise GeometryError("degenerate parameterization point")
        # counter-clockwise curve: rotating the tangent clockwise points outward
        return np.column_stack([t[:, 1], -t[:, 0]]) / norm[:, None]

    def speed(self, theta):
        return np.sqrt(self.radius(theta) ** 2 + self.radius_derivative(theta) ** 2)

    @cached_property
    def _arc_table(self):
        theta = np.linspace(0.0, TWO_PI, 40001)
        s = integrate.cumulative_trapezoid(self.speed(theta), theta, initial=0.0)
        return theta, s

    def perimeter(self):
        return self._arc_table[1][-1]

    def boundary_nodes(self, h, rng=None):
        theta_tab, s_tab = self._arc_table
        length = s_tab[-1]
        count = max(int(round(length / h)), 3)
        s = np.arange(count) * (length / count)
        theta = wrap_angle(np.interp(s, s_tab, theta_tab))
        theta[0] = 0.0
        return self.point(theta), self.outward_normal(theta), theta

    def classify(self, points, params, bc_mode="mixed"):
        params = np.atleast_1d(np.asarray(params, dtype=float))
        if bc_mode == "dirichlet":
            return np.full(len(params), BoundaryClass.DIRICHLET, dtype=np.int8)
        theta = wrap_angle(params)
        return np.where(theta < 0.0, BoundaryClass.DIRICHLET, BoundaryClass.NEUMANN).astype(np.int8)

    @cached_property
    def _measures(self):
        opts = dict(limit=400, epsabs=1e-13, epsrel=1e-13)
        dirichlet = integrate.quad(self.speed, -np.pi, 0.0, **opts)[0]
        neumann = integrate.quad(self.speed, 0.0, np.pi, **opts)[0]
        area = 0.5 * integrate.quad(lambda t: self.radius(t) ** 2, -np.pi, np.pi, **opts)[0]
        return dirichlet, neumann, area

    def boundary_measures(self, bc_mode="mixed"):
        d, n, _ = self._measures
        if bc_mode == "dirichlet":
            return d + n, 0.0
        return d, n

    def volume(self):
        return self._measures[2]

    def bounding_box(self):
        theta = np.linspace(-np.pi, np.pi, 4001)
        rmax = float(np.max(self.radius(theta))) * 1.001
        return np.full(2, -rmax), np.full(2, rmax)


class Disk(PolarCurve2D):
    """Disk of the given radius centred at the origin."""

    name = "disk"

    def __init__(self, radius=1.0):
        super().__init__(amplitude=0.0, frequencies=())
        self.R = float(radius)

    def __repr__(self):
        return f"Disk(radius={self.R})"

    def radius(self, theta):
        return np.full_like(np.asarray(theta, dtype=float), self.R)

    def radius_derivative(self, theta):
        return np.zeros_like(np.asarray(theta, dtype=float))

    @cached_property
    def _measures(self):
        return np.pi * self.R, np.pi * self.R, np.pi * self.R ** 2

    def perimeter(self):
        return TWO_PI * self.R


class Spherical3D(RadialDomain):
    """3D star-shaped domain ``r(w) = sqrt(1 + prod_i sin^2(a w_i))``.

    ``w`` is the unit direction. The Dirichlet part is ``z < z_split`` and the
    Neumann part ``z >= z_split``. Boundary parameters are unit directions.
    """

    dim = 3
    name = "sphere3d"

    def __init__(self, frequency=2.0, z_split=0.7):
        self.frequency = float(frequency)
        self.z_split = float(z_split)

    def __repr__(self):
        return f"Spherical3D(frequency={self.frequency}, z_split={self.z_split})"

    def radius_of_direction(self, omega):
        omega = np.atleast_2d(omega)
        s = np.prod(np.sin(self.frequency * omega) ** 2, axis=1)
        return np.sqrt(1.0 + s)

    def radius_gradient(self, omega):
        omega = np.atleast_2d(omega)
        a = self.frequency
        sq = np.sin(a * omega) ** 2
        grad = np.empty_like(omega)
        for i in range(3):
            others = np.prod(np.delete(sq, i, axis=1), axis=1)
            grad[:, i] = a * np.sin(2.0 * a * omega[:, i]) * others
        return grad / (2.0 * self.radius_of_direction(omega))[:, None]

    def point(self, omega):
        omega = np.atleast_2d(omega)
        return omega * self.radius_of_direction(omega)[:, None]

    def outward_normal(self, params):
        return self.normal_from_direction(params)

    def area_density(self, omega):
        """Surface area per unit solid angle, ``r * sqrt(r^2 + |grad_s r|^2)``."""
        omega = np.atleast_2d(omega)
        r = self.radius_of_direction(omega)
        g = self.radius_gradient(omega)
        g_tan = g - np.sum(g * omega, axis=1)[:, None] * omega
        return r * np.sqrt(r ** 2 + np.sum(g_tan ** 2, axis=1))

    @cached_property
    def _measures(self):
        # Gauss-Legendre in cos(colatitude) times a uniform longitude grid
        nt, nz = 720, 360
        z, wz = np.polynomial.legendre.leggauss(nz)
        lon = (np.arange(nt) + 0.5) * TWO_PI / nt
        Z, L = np.meshgrid(z, lon, indexing="ij")
        s = np.sqrt(1.0 - Z ** 2)
        omega = np.column_stack([(s * np.cos(L)).ravel(), (s * np.sin(L)).ravel(), Z.ravel()])
        w = (wz[:, None] * np.full(nt, TWO_PI / nt)[None, :]).ravel()
        r = self.radius_of_direction(omega)
        dens = self.area_density(omega)
        zpos = omega[:, 2] * r
        volume = np.sum(w * r ** 3) / 3.0
        dirichlet = np.sum(w * dens * (zpos < self.z_split))
        neumann = np.sum(w * dens * (zpos >= self.z_split))
        return dirichlet, neumann, volume

    def boundary_measures(self, bc_mode="mixed"):
        d, n, _ = self._measures
        if bc_mode == "dirichlet":
            return d + n, 0.0
        return d, n

    def surface_area(self):
        d, n, _ = self._measures
        return d + n

    def volume(self):
        return self._measures[2]

    def bounding_box(self):
        return np.full(3, -np.sqrt(2.0) * 1.001), np.full(3, np.sqrt(2.0) * 1.001)

    def classify(self, points, params, bc_mode="mixed"):
        points = np.atleast_2d(points)
        if bc_mode == "dirichlet":
            return np.full(len(points), BoundaryClass.DIRICHLET, dtype=np.int8)
        return np.where(points[:, 2] < self.z_split, BoundaryClass.DIRICHLET,
                        BoundaryClass.NEUMANN).astype(np.int8)

    def boundary_nodes(self, h, rng=None):
        from .nodes import surface_nodes

        return surface_nodes(self, h, rng)


class Box(Domain):
    """Axis-aligned box. The face with outward normal ``+e_last`` is Neumann."""

    name = "box"

    def __init__(self, lower=(0.0, 0.0), upper=(1.0, 1.0)):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape or np.any(self.upper <= self.lower):
            raise GeometryError("box bounds must satisfy lower < upper")
        self.dim = len(self.lower)

    def __repr__(self):
        return f"Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"

    def level(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        c = 0.5 * (self.lower + self.upper)
        half = 0.5 * (self.upper - self.lower)
        q = np.abs(x - c) - half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inner = np.minimum(np.max(q, axis=1), 0.0)
        return outside + inner

    def volume(self):
        return float(np.prod(self.upper - self.lower))

    def bounding_box(self):
        return self.lower.copy(), self.upper.copy()

    def push_inside(self, x, depth):
        return np.clip(x, self.lower + depth, self.upper - depth)

    def _perimeter_point(self, t):
        (x0, y0), (x1, y1) = self.lower, self.upper
        w, hgt = x1 - x0, y1 - y0
        t = np.mod(t, 2 * (w + hgt))
        pts = np.empty((len(t), 2))
        nrm = np.empty((len(t), 2))
        segs = [
            (t < w, lambda s: (x0 + s, y0), (0.0, -1.0), 0.0),
            ((t >= w) & (t < w + hgt), lambda s: (x1, y0 + s), (1.0, 0.0), w),
            ((t >= w + hgt) & (t < 2 * w + hgt), lambda s: (x1 - s, y1), (0.0, 1.0), w + hgt),
            (t >= 2 * w + hgt, lambda s: (x0, y1 - s), (-1.0, 0.0), 2 * w + hgt),
        ]
        for mask, f, n, off in segs:
            px, py = f(t[mask] - off)
            pts[mask, 0], pts[mask, 1] = px, py
            nrm[mask] = n
        # corners get the normalized average of the adjacent face normals
        corners = np.isclose(t, 0.0) | np.isclose(t, w) | np.isclose(t, w + hgt) | np.isclose(t, 2 * w + hgt)
        for i in np.flatnonzero(corners):
            p = pts[i]
            n = np.sign(p - 0.5 * (self.lower + self.upper))
            nrm[i] = n / np.linalg.norm(n)
        return pts, nrm

    def outward_normal(self, params):
        if self.dim != 2:
            raise GeometryError("box normals by parameter are only defined in 2D")
        return self._perimeter_point(np.atleast_1d(params))[1]

    def boundary_nodes(self, h, rng=None):
        if self.dim != 2:
            raise NotImplementedError("box boundary sampling is only implemented in 2D")
        w, hgt = self.upper - self.lower
        per = 2 * (w + hgt)
        count = max(int(round(per / h)), 4)
        t = np.arange(count) * (per / count)
        pts, nrm = self._perimeter_point(t)
        return pts, nrm, t

    def classify(self, points, params, bc_mode="mixed"):
        points = np.atleast_2d(points)
        if bc_mode == "dirichlet":
            return np.full(len(points), BoundaryClass.DIRICHLET, dtype=np.int8)
        top = np.isclose(points[:, -1], self.upper[-1])
        return np.where(top, BoundaryClass.NEUMANN, BoundaryClass.DIRICHLET).astype(np.int8)

    def boundary_measures(self, bc_mode="mixed"):
        ext = self.upper - self.lower
        if self.dim == 2:
            total = 2.0 * float(np.sum(ext))
            top = float(ext[0])
        else:
            total = 2.0 * (ext[0] * ext[1] + ext[0] * ext[2] + ext[1] * ext[2])
            top = float(np.prod(ext[:-1]))
        if bc_mode == "dirichlet":
            return total, 0.0
        return total - top, top


_DOMAINS = {
    "star": PolarCurve2D,
    "polar": PolarCurve2D,
    "disk": Disk,
    "sphere3d": Spherical3D,
    "box": Box,
}


def make_domain(name, params=()):
    """Build a domain from a registry name and a parameter list.

    ``star``: ``[amplitude, f1, f2, ...]``; ``disk``: ``[radius]``;
    ``sphere3d``: ``[frequency, z_split]``; ``box``: ``[lo_1..lo_d, hi_1..hi_d]``.
    """
    try:
        cls = _DOMAINS[name]
    except KeyError:
        raise GeometryError(f"unknown domain {name!r}; choose from {sorted(_DOMAINS)}") from None
    params = list(params or ())
    if cls is PolarCurve2D and params:
        return PolarCurve2D(params[0], params[1:] or (7, 1))
    if cls is Box and params:
        half = len(params) // 2
        return Box(params[:half], params[half:])
    return cls(*params)
