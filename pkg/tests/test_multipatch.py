import numpy as np
import pytest

from mpiga import multipatch
from mpiga.multipatch import Patch


def points(patch, uv):
    uv = np.atleast_2d(uv)
    return multipatch.geometry_derivs(patch, uv[:, 0], uv[:, 1], 0)[(0, 0)]


def test_fig_domain_topology():
    mp = multipatch.make_fig_domain()
    assert len(mp.patches) == 6
    assert len(mp.vertices) == 12
    assert len(mp.interfaces) + len(mp.boundaries) == 17
    assert sorted(v.valence for v in mp.interior_evs()) == [3, 5]
    assert mp.boundary_evs() == []
    # the six patches tile the unit square
    area = 0.0
    for p in mp.patches:
        c = np.array([p.corner(0), p.corner(2), p.corner(3), p.corner(1)])
        area += 0.5 * abs(np.dot(c[:, 0], np.roll(c[:, 1], -1)) - np.dot(np.roll(c[:, 0], -1), c[:, 1]))
    assert np.isclose(area, 1.0)


def test_fig_domain_jacobians_positive():
    mp = multipatch.make_fig_domain()
    u, v = np.meshgrid(np.linspace(0, 1, 7), np.linspace(0, 1, 7))
    for p in mp.patches:
        g = multipatch.geometry_derivs(p, u.ravel(), v.ravel(), 1)
        det = g[(1, 0)][:, 0] * g[(0, 1)][:, 1] - g[(1, 0)][:, 1] * g[(0, 1)][:, 0]
        assert det.min() > 0


def test_interfaces_match_geometrically():
    mp = multipatch.make_fig_domain().refined(3, 1, 3)
    t = np.linspace(0, 1, 11)
    for f in mp.interfaces:
        pa, pb = mp.patches[f.patch_a], mp.patches[f.patch_b]
        xa = multipatch.geometry_derivs(pa, *multipatch.side_param(f.side_a, t), 0)[(0, 0)]
        tb = 1 - t if f.reversed else t
        xb = multipatch.geometry_derivs(pb, *multipatch.side_param(f.side_b, tb), 0)[(0, 0)]
        assert np.allclose(xa, xb, atol=1e-13)


def test_refinement_preserves_geometry():
    mp = multipatch.make_fig_domain()
    fine = mp.refined(4, 2, 5)
    uv = np.random.default_rng(1).random((30, 2))
    for a, b in zip(mp.patches, fine.patches):
        assert b.basis.degrees == (4, 4) and b.basis.u.n_elements == 5
        xa = points(a, uv)
        xb = points(b, uv)
        assert np.allclose(xa, xb, atol=1e-13)


def test_refined_requires_nested_knots():
    p = multipatch.make_unit_square().refined(3, 2, 3).patches[0]
    with pytest.raises(ValueError):
        p.refined(3, 2, 4)


def test_roundtrip_serialization():
    mp = multipatch.make_paraboloid("hyperbolic").refined(3, 1, 2)
    back = multipatch.loads(multipatch.dumps(mp))
    assert len(back.patches) == 6 and len(back.interfaces) == len(mp.interfaces)
    for a, b in zip(mp.patches, back.patches):
        assert a.basis.u == b.basis.u and a.basis.v == b.basis.v
        assert np.array_equal(a.control_points, b.control_points)


def test_loads_rejects_garbage():
    with pytest.raises(ValueError):
        multipatch.loads("not a patch file")


def test_paraboloid_curvature():
    # z = x^2 - y^2: at the centre b_11 = 2, b_22 = -2 in the (x, y) parametrisation
    hyp = multipatch.make_paraboloid("hyperbolic", multipatch.make_unit_square())
    f = multipatch.surface_frame(hyp.patches[0], (0.5, 0.5))
    a1, a2 = f.a1, f.a2
    # the unit square is mapped onto [-1/2,1/2]^2, so the parametric scale is 1
    assert np.allclose([a1[0], a2[1]], [1.0, 1.0])
    assert np.allclose(f.b_cov, [[2.0, 0.0], [0.0, -2.0]], atol=1e-12)
    ell = multipatch.make_paraboloid("elliptic", multipatch.make_unit_square())
    f = multipatch.surface_frame(ell.patches[0], (0.5, 0.5))
    assert np.isclose(f.a3[2], 1.0)
    assert np.allclose(f.b_cov, [[-4.0, 0.0], [0.0, -4.0]], atol=1e-12)


def test_paraboloid_lift_is_exact():
    ell = multipatch.make_paraboloid("elliptic")
    uv = np.random.default_rng(3).random((25, 2))
    for p in ell.patches:
        x = points(p, uv)
        assert np.allclose(x[:, 2], multipatch.paraboloid_height("elliptic", x[:, 0], x[:, 1]), atol=1e-13)


def test_newton_invert():
    p = multipatch.make_fig_domain().patches[4]
    uv = np.array([0.3, 0.8])
    x = points(p, uv)[0]
    assert np.allclose(multipatch.newton_invert(p, x), uv, atol=1e-10)
    with pytest.raises(ValueError):
        multipatch.newton_invert(p, (5.0, 5.0))


def test_patch_validation():
    lin = multipatch.BasisSpec1D(1, [0, 0, 1, 1])
    with pytest.raises(ValueError):
        Patch(multipatch.TensorBasisSpec(lin, lin), np.zeros((3, 2, 2)))
    with pytest.raises(ValueError):
        Patch(multipatch.TensorBasisSpec(lin, lin), np.zeros((2, 2, 4)))
