import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbffd.exceptions import GeometryError
from rbffd.geometry import (
    BoundaryClass,
    Box,
    Disk,
    PolarCurve2D,
    Spherical3D,
    make_domain,
    polar_radius,
    spherical_radius,
)


def test_polar_radius_examples():
    assert polar_radius(0.0) == pytest.approx(1.0, abs=1e-15)
    assert polar_radius(np.pi / 2) == pytest.approx(1.0, abs=1e-14)
    t = 0.3
    assert polar_radius(t) == pytest.approx(1 + 0.1 * (np.sin(2.1) + np.sin(0.3)), rel=1e-15)


def test_spherical_radius_examples():
    assert spherical_radius(0.7, 0.0) == pytest.approx(1.0)
    assert spherical_radius(0.0, 1.1) == pytest.approx(1.0)
    t, p = np.pi / 4, np.pi / 4
    s = (np.sin(2 * np.sin(p) * np.sin(t)) * np.sin(2 * np.sin(p) * np.cos(t)) * np.sin(2 * np.cos(p))) ** 2
    assert spherical_radius(t, p) == pytest.approx(np.sqrt(1 + s), rel=1e-14)


def test_disk_normals():
    d = Disk()
    np.testing.assert_allclose(d.outward_normal(np.array([0.0])), [[1.0, 0.0]], atol=1e-14)
    np.testing.assert_allclose(d.outward_normal(np.array([-np.pi / 2])), [[0.0, -1.0]], atol=1e-14)


def test_star_normal_matches_finite_difference_tangent():
    s = PolarCurve2D()
    t, eps = 0.3, 1e-6
    tan = (s.point(np.array([t + eps])) - s.point(np.array([t - eps])))[0] / (2 * eps)
    ref = np.array([tan[1], -tan[0]]) / np.linalg.norm(tan)
    np.testing.assert_allclose(s.outward_normal(np.array([t]))[0], ref, atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.floats(-np.pi, np.pi))
def test_star_normals_are_unit_and_outward(theta):
    s = PolarCurve2D()
    th = np.array([theta])
    n = s.outward_normal(th)[0]
    assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-12)
    x = s.point(th)[0]
    assert s.level(x + 1e-4 * n)[0] > 0 > s.level(x - 1e-4 * n)[0]


def test_classification_2d():
    s = PolarCurve2D()
    th = np.array([-np.pi / 2, np.pi / 2, 0.0, -1e-9])
    tags = s.classify(s.point(th), th)
    assert list(tags) == [BoundaryClass.DIRICHLET, BoundaryClass.NEUMANN, BoundaryClass.NEUMANN,
                          BoundaryClass.DIRICHLET]
    assert np.all(s.classify(s.point(th), th, "dirichlet") == BoundaryClass.DIRICHLET)


def test_classification_3d_split():
    g = Spherical3D()
    pts = np.array([[0.0, 0.0, 0.7], [0.0, 0.0, 0.69], [0.0, 0.0, -1.0]])
    tags = g.classify(pts, None)
    assert list(tags) == [BoundaryClass.NEUMANN, BoundaryClass.DIRICHLET, BoundaryClass.DIRICHLET]


@pytest.mark.parametrize("domain", [PolarCurve2D(), Disk(), Box(), Spherical3D()], ids=repr)
def test_boundary_nodes_on_boundary_with_unit_normals(domain):
    pts, nrm, _ = domain.boundary_nodes(0.15, np.random.default_rng(0))
    assert np.max(np.abs(domain.level(pts))) < 1e-10
    np.testing.assert_allclose(np.linalg.norm(nrm, axis=1), 1.0, atol=1e-12)


def test_boundary_measures_partition():
    s = PolarCurve2D()
    d, n = s.boundary_measures()
    assert d + n == pytest.approx(s.perimeter(), rel=1e-10)
    assert s.boundary_measures("dirichlet") == pytest.approx((d + n, 0.0))
    assert sum(Disk().boundary_measures()) == pytest.approx(2 * np.pi, rel=1e-12)
    assert Disk().volume() == pytest.approx(np.pi, rel=1e-12)


def test_probe_points_inside():
    s = PolarCurve2D()
    pts = s.probe_points(500, seed=3)
    assert len(pts) == 500
    assert np.all(s.inside(pts))


def test_make_domain():
    assert isinstance(make_domain("star"), PolarCurve2D)
    assert make_domain("disk", [2.0]).volume() == pytest.approx(4 * np.pi)
    with pytest.raises(GeometryError):
        make_domain("torus")
    with pytest.raises(GeometryError):
        Box((0, 0), (0, 1))
