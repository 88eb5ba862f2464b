import numpy as np
import pytest
from scipy import integrate

from mpiga import bench, multipatch, shell, smoothspace, splines
from mpiga.shell import ShellMaterial

MAT = ShellMaterial(E=2.0e5, nu=0.3, t=0.01)


def flat_square(p=3, r=2, n=3):
    sq = multipatch.make_unit_square().refined(p, r, n)
    return sq.map_patches(lambda pt: multipatch.Patch(
        pt.basis, np.concatenate([pt.control_points, np.zeros(pt.basis.shape + (1,))], axis=2)))


def interpolate_field(patch, fn):
    """Coefficients of ``fn(x, y)`` by Greville interpolation (exact for polynomials in the space)."""
    tb = patch.basis
    gu, gv = splines.greville_points(tb.u), splines.greville_points(tb.v)
    U, V = np.meshgrid(gu, gv, indexing="ij")
    xy = multipatch.geometry_derivs(patch, U.ravel(), V.ravel(), 0)[(0, 0)]
    A = np.kron(splines.collocation_matrix(tb.u, gu).toarray(), splines.collocation_matrix(tb.v, gv).toarray())
    return np.linalg.solve(A, fn(xy[:, 0], xy[:, 1]))


def vector_identity(mp):
    return smoothspace.vector_map([smoothspace.identity_map(mp)] * 3)


def test_material_validation():
    with pytest.raises(ValueError):
        ShellMaterial(E=-1.0, nu=0.3, t=0.1)
    with pytest.raises(ValueError):
        ShellMaterial(E=1.0, nu=0.5, t=0.1)
    with pytest.raises(ValueError):
        ShellMaterial(E=1.0, nu=0.3, t=0.0)
    assert np.isclose(MAT.bending_stiffness, 2e5 * 1e-6 / 12)


def test_material_matrix_cartesian():
    D = shell.material_matrix(np.eye(2)[None], MAT)[0]
    c = MAT.E / (1 - MAT.nu ** 2)
    assert np.allclose(D, c * np.array([[1, MAT.nu, 0], [MAT.nu, 1, 0], [0, 0, (1 - MAT.nu) / 2]]))


def test_load_and_bc_validation():
    with pytest.raises(ValueError):
        shell.LoadSpec()
    with pytest.raises(ValueError):
        shell.LoadSpec(distributed=(0, 0, 1), force=(0, 0, 1))
    with pytest.raises(ValueError):
        shell.LoadSpec(force=(0, 0, 1), point=(0, 0))
    with pytest.raises(ValueError):
        shell.ShellBC(sides={(0, 0): "glued"})


def test_uniaxial_membrane_stress():
    # u_x = eps * x with u_y = 0: plane strain in y, so sigma_yy = nu sigma_xx
    mp = flat_square()
    eps = 1e-3
    patch = mp.patches[0]
    nb = patch.basis.dim
    c = np.zeros(3 * nb)
    c[:nb] = eps * interpolate_field(patch, lambda x, y: x)
    fields = shell.von_mises_membrane(mp, vector_identity(mp), c, MAT, n=9)
    expected = MAT.E * eps / (1 - MAT.nu ** 2) * np.sqrt(1 - MAT.nu + MAT.nu ** 2)
    assert np.allclose(fields[0].sigma, expected, rtol=1e-10)


def test_pure_bending_energy_of_flat_plate():
    # w = x^2 has curvature 2 in x and none in y: W = D * 4 / 2 over the unit area
    mp = flat_square()
    emap = vector_identity(mp)
    K = shell.assemble_kl_stiffness(mp, emap, MAT).K
    nb = mp.patches[0].basis.dim
    c = np.zeros(3 * nb)
    c[2 * nb:] = interpolate_field(mp.patches[0], lambda x, y: x ** 2)
    D = MAT.E * MAT.t ** 3 / (12 * (1 - MAT.nu ** 2))
    assert np.isclose(shell.bending_energy(c, K), 2 * D, rtol=1e-10)


def test_stiffness_is_symmetric_psd():
    mp = multipatch.make_paraboloid("elliptic", multipatch.make_unit_square()).refined(3, 2, 3)
    K = shell.assemble_kl_stiffness(mp, vector_identity(mp), MAT).K
    assert abs(K - K.T).max() <= 1e-12 * abs(K).max()
    ev = np.linalg.eigvalsh(K.toarray())
    assert ev.min() > -1e-10 * ev.max()
    assert np.sum(ev < 1e-9 * ev.max()) == 6  # exactly the rigid-body kernel


@pytest.mark.parametrize("kind", ["elliptic", "hyperbolic"])
@pytest.mark.parametrize("coupling", ["penalty", "smooth-c1"])
def test_rigid_body_modes_have_no_energy(kind, coupling):
    mp = multipatch.make_paraboloid(kind).refined(3, 1, 2)
    vmap = smoothspace.vector_map([smoothspace.build_map(mp, coupling)] * 3)
    K = shell.assemble_kl_stiffness(mp, vmap, MAT).K
    if coupling == "penalty":
        K = K + shell.penalty_shell_coupling(mp, vmap, 10.0, MAT)
    R = shell.rigid_body_vectors(mp, vmap)
    rng = np.random.default_rng(0)
    d = rng.normal(size=vmap.n_global)
    ref = shell.bending_energy(d / np.linalg.norm(d), K)
    for j in range(6):
        r = R[:, j] / np.linalg.norm(R[:, j])
        assert shell.bending_energy(r, K) <= 1e-8 * ref


def test_distributed_load_total_equals_area_times_traction():
    mp = multipatch.make_paraboloid("elliptic").refined(3, 1, 2)
    emap = vector_identity(mp)
    f = shell.assemble_shell_load(mp, emap, shell.LoadSpec(distributed=(0.0, 0.0, -2.0)))
    area, _ = integrate.dblquad(lambda y, x: np.sqrt(1 + 16 * x * x + 16 * y * y), -0.5, 0.5, -0.5, 0.5,
                                epsabs=1e-12, epsrel=1e-12)
    n = emap.n_global // 3
    # Gauss quadrature of the (non-polynomial) area element is accurate, not exact
    assert np.isclose(f[2 * n:].sum(), -2.0 * area, rtol=1e-6)
    assert np.allclose(f[:2 * n], 0.0)


def test_point_load_total():
    mp = multipatch.make_paraboloid("elliptic").refined(3, 1, 2)
    emap = smoothspace.vector_map([smoothspace.build_c0_map(mp)] * 3)
    f = shell.assemble_shell_load(mp, emap, shell.LoadSpec(point=(0.0, 0.0), force=(0, 0, -5.0), patch=4))
    n = emap.n_global // 3
    assert np.isclose(f[2 * n:].sum(), -5.0)


def test_constraints_must_remove_rigid_motions():
    mp = multipatch.make_paraboloid("elliptic").refined(2, 1, 1)
    emap = vector_identity(mp)
    S = shell.assemble_kl_stiffness(mp, emap, MAT)
    with pytest.raises(shell.SingularShellError):
        shell.apply_shell_bcs(S, mp, emap, shell.ShellBC(), MAT)
    one_point = shell.ShellBC(points=[((-0.5, -0.5), "fixed_all")])
    with pytest.raises(shell.SingularShellError):
        shell.apply_shell_bcs(S, mp, emap, one_point, MAT)
    with pytest.raises(ValueError):
        shell.bc_zero_local(mp, shell.ShellBC(points=[((0.1, 0.1), "fixed_all")]))


def test_boundary_sides_on_line():
    mp = multipatch.make_paraboloid("hyperbolic")
    sides = shell.boundary_sides_on(mp, 0, -0.5)
    assert len(sides) == 2  # the left edge of the layout is split between two patches


def test_hyperbolic_clamp_penalty_suppresses_rotation():
    mp = multipatch.make_paraboloid("hyperbolic", multipatch.make_unit_square()).refined(3, 2, 4)
    W = []
    for alpha_r in (1e-6, 1e3 * MAT.bending_stiffness):
        emap = vector_identity(mp)
        S = shell.assemble_kl_stiffness(mp, emap, MAT)
        bc, load = bench.shell_problem("hyperbolic", mp)
        S.f = shell.assemble_shell_load(mp, emap, load)
        C = shell.apply_shell_bcs(S, mp, emap, bc, MAT, rotation_penalty=alpha_r)
        u = C.solve()
        W.append(shell.bending_energy(u, C.K))
    assert W[1] < W[0]  # the clamp stiffens the structure


def test_constrained_path_matches_null_space_path(monkeypatch):
    mp = multipatch.make_paraboloid("elliptic").refined(4, 2, 3)
    u1, C1 = bench.solve_shell("elliptic", mp, "smooth-c1", None, load_patch=4, check_memory=False)
    monkeypatch.setattr(bench, "DENSE_NULL_LIMIT", 0)
    u2, C2 = bench.solve_shell("elliptic", mp, "smooth-c1", None, load_patch=4, check_memory=False)
    assert C2.constraints is not None and C1.constraints is None
    W1, W2 = shell.bending_energy(u1, C1.K), shell.bending_energy(u2, C2.K)
    assert np.isclose(W1, W2, rtol=1e-8)
    x1 = np.concatenate(C1.emap.to_local(u1))
    x2 = np.concatenate(C2.emap.to_local(u2))
    assert np.allclose(x1, x2, atol=1e-7 * np.abs(x1).max())


def test_smooth_stress_is_continuous_and_penalty_is_not():
    mp = multipatch.make_paraboloid("elliptic").refined(4, 2, 4)
    jumps = {}
    for coupling, alpha in (("smooth-c1", None), ("penalty", 100.0)):
        u, C = bench.solve_shell("elliptic", mp, coupling, alpha, load_patch=4, check_memory=False)
        jumps[coupling] = shell.interface_stress_jumps(mp, C.emap, u, MAT, 200)
        assert jumps[coupling].size == 200
    assert jumps["smooth-c1"].max() * 10 <= jumps["penalty"].max()


def test_stress_outputs(tmp_path):
    mp = flat_square(2, 1, 2)
    nb = mp.patches[0].basis.dim
    c = np.zeros(3 * nb)
    c[:nb] = 1e-3 * interpolate_field(mp.patches[0], lambda x, y: x * x)
    fields = shell.von_mises_membrane(mp, vector_identity(mp), c, MAT, n=12)
    shell.write_stress_csv(fields, tmp_path / "s.csv")
    shell.write_stress_vtk(fields[0], tmp_path / "s.vtk")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert len(lines) == 1 + 144 and lines[0].startswith("patch,u,v")
    vtk = (tmp_path / "s.vtk").read_text()
    assert "DIMENSIONS 12 12 1" in vtk and "SCALARS sigma_vm" in vtk
    level = float(np.median(fields[0].sigma))
    contours = shell.stress_contours(fields, (level,))
    assert contours and all(lv == level for lv, _, _ in contours)
    shell.write_contours_csv(contours, tmp_path / "c.csv", (level,))
    assert (tmp_path / "c.csv").read_text().count("\n") > 2
