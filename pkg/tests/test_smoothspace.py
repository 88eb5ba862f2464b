import numpy as np
import pytest
import scipy.sparse as sps
from hypothesis import given, settings
from hypothesis import strategies as st

from mpiga import multipatch, pde, smoothspace
from mpiga.multipatch import Patch


def two_squares(p, r, n):
    mp = multipatch.detect_topology([Patch.bilinear((0, 0), (1, 0), (1, 1), (0, 1)),
                                     Patch.bilinear((1, 0), (2, 0), (2, 1), (1, 1))])
    return mp.refined(p, r, n)


def test_two_square_dimensions():
    # C0 gluing of two biquadratic Bezier squares: 2 * 9 - 3 shared functions
    assert smoothspace.build_c0_map(two_squares(2, 1, 1)).n_global == 15
    # C1 gluing of two bicubic Bezier squares equals the C1 spline space with a
    # double knot at x = 1: 6 functions in x times 4 in y
    assert smoothspace.smooth_space(two_squares(3, 2, 1)).n_global == 24


def test_c0_map_is_binary_and_merges_interfaces():
    mp = multipatch.make_fig_domain().refined(2, 1, 3)
    E = smoothspace.build_c0_map(mp)
    S = E.stacked()
    assert set(np.unique(S.data)) == {1.0}
    assert np.all(np.diff(S.indptr) == 1)  # every local function maps to one global one
    n_local = sum(p.basis.dim for p in mp.patches)
    shared = sum(mp.patches[f.patch_a].side_spec(f.side_a).dim for f in mp.interfaces)
    # shared side functions are counted twice, minus corrections at the vertices
    assert n_local - shared <= E.n_global < n_local


def test_identity_map_kinds():
    assert smoothspace.identity_map(multipatch.make_unit_square()).kind == "single"
    assert smoothspace.build_map(multipatch.make_fig_domain(), "penalty").kind == "uncoupled"
    with pytest.raises(ValueError):
        smoothspace.build_map(multipatch.make_fig_domain(), "glue")


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_null_space_basis_is_orthonormal_kernel(m, n, seed):
    rng = np.random.default_rng(seed)
    G = sps.random(m, n, density=0.3, random_state=rng) @ sps.random(n, n, density=0.3, random_state=rng)
    G = sps.csr_matrix(G)
    if G.nnz and np.linalg.matrix_rank(G.toarray()) == n:
        with pytest.raises(ValueError):
            smoothspace.null_space_basis(G)
        return
    Z = smoothspace.null_space_basis(G).toarray()
    assert Z.shape[1] == n - np.linalg.matrix_rank(G.toarray(), tol=1e-10 * max(1, abs(G).max()))
    assert np.allclose(Z.T @ Z, np.eye(Z.shape[1]), atol=1e-12)
    assert np.abs(G @ Z).max(initial=0.0) <= 1e-10 * max(1.0, abs(G).max())


@pytest.fixture(scope="module")
def fig_c1():
    mp = multipatch.make_fig_domain().refined(3, 1, 4)
    return mp, smoothspace.smooth_space(mp)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_smooth_space_is_c1(fig_c1, seed):
    mp, E = fig_c1
    c = np.random.default_rng(seed).normal(size=E.n_global)
    assert pde.interface_gradient_jumps(mp, E, c, 100, seed).max() <= 1e-8


def test_c0_space_has_kinks(fig_c1):
    mp, _ = fig_c1
    E = smoothspace.build_c0_map(mp)
    c = np.random.default_rng(0).normal(size=E.n_global)
    assert pde.interface_gradient_jumps(mp, E, c, 100, 0).max() > 1e-2


def test_smooth_space_contains_linears(fig_c1):
    mp, E = fig_c1
    # x and y interpolated patchwise are globally C1, so they lie in the space
    S = E.stacked().toarray()
    for comp in range(2):
        local = np.concatenate([p.refined(3, 1, 4).control_points[..., comp].ravel()
                                for p in multipatch.make_fig_domain().patches])
        coef, *_ = np.linalg.lstsq(S, local, rcond=None)
        assert np.allclose(S @ coef, local, atol=1e-10)


def test_zero_boundary_constraints():
    mp = multipatch.make_unit_square().refined(3, 2, 4)
    zero = pde.boundary_zero_local(mp, 1)
    E = smoothspace.build_map(mp, "single", zero)
    assert E.n_global == (7 - 2) ** 2
    for k, idx in zero:
        assert abs(E.blocks[k][idx]).max() < 1e-12


def test_vector_map_is_component_major():
    mp = multipatch.make_fig_domain().refined(2, 1, 2)
    e = smoothspace.build_c0_map(mp)
    v = smoothspace.vector_map([e] * 3)
    assert v.n_global == 3 * e.n_global
    nb = mp.patches[0].basis.dim
    B = v.blocks[0].toarray()
    assert np.array_equal(B[nb:2 * nb, e.n_global:2 * e.n_global], e.blocks[0].toarray())
    assert not B[:nb, e.n_global:].any()


@pytest.mark.parametrize("p, r, passing", [
    (2, 1, {"Almost-C1"}),
    (3, 1, {"AS-G1", "Approx-C1", "D-Patch"}),
    (3, 2, {"Approx-C1", "D-Patch"}),
    (4, 2, {"AS-G1", "Approx-C1", "D-Patch"}),
    (2, 0, set()),
])
def test_requirement_table(p, r, passing):
    rep = smoothspace.check_requirements(multipatch.make_fig_domain(), p, r)
    assert {m for m, ok in rep.passed.items() if ok} == passing
    assert rep.any_passed() == bool(passing)
    assert "iEV=2" in rep.summary()


def test_requirement_table_curved_patches():
    # lifted paraboloid patches are not bilinear, which AS-G1 needs in the plane only
    rep = smoothspace.check_requirements(multipatch.make_paraboloid("elliptic"), 3, 1)
    assert rep.passed["AS-G1"]
    planar = multipatch.make_fig_domain().map_patches(
        lambda pt: pt.elevate_to(2).mapped(lambda x: x + 0.05 * np.array([x[1] ** 2, 0.0])))
    rep = smoothspace.check_requirements(planar, 3, 1)
    assert not rep.passed["AS-G1"] and rep.passed["Approx-C1"]
