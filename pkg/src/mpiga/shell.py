"""Linear Kirchhoff-Love shells on surface multipatches.

Displacements are vector fields with three Cartesian components per basis
function. Local coefficient vectors of a patch are laid out component-major,
``c * n_basis + i``, which matches :func:`mpiga.smoothspace.vector_map`.

The strain measures are the standard linearisation around the reference
surface:

* membrane ``eps_ab = (u_,a . a_b + u_,b . a_a) / 2``
* bending ``kappa_ab = -(u_,ab . a3 + r_,ab . da3(u))`` with
  ``da3(u) = (I - a3 a3^T)(u_,1 x a2 + a1 x u_,2) / |a1 x a2|``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps

from . import splines
from .multipatch import (SIDE_NORMALS, MultiPatch, Patch, _frames_from_derivs, geometry_derivs,
                         newton_invert, side_direction, side_param)
from .pde import (QuadratureRule, SystemMatrices, _element_matrix_to_sparse, element_arc_length,
                  pull_back, pull_back_pair, pull_back_vector, side_quadrature)
from .smoothspace import ExtractionMap, null_space_basis

CONTOUR_LEVELS = (1e5, 1e6, 1e7)


@dataclass(frozen=True)
class ShellMaterial:
    E: float
    nu: float
    t: float
    rho: float | None = None

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError("Young's modulus must be positive")
        if not 0 <= self.nu < 0.5:
            raise ValueError("Poisson ratio must lie in [0, 0.5)")
        if not self.t > 0:
            raise ValueError("thickness must be positive")

    @property
    def bending_stiffness(self) -> float:
        return self.E * self.t ** 3 / 12.0


@dataclass(frozen=True)
class LoadSpec:
    """Either a constant traction per unit area or a point force.

    ``point`` is a physical location; only its planar coordinates are used to
    locate it (the surfaces here are graphs over the plane). ``patch`` selects
    the patch that receives a point force.
    """

    distributed: tuple | None = None
    point: tuple | None = None
    force: tuple | None = None
    patch: int | None = None

    def __post_init__(self):
        if (self.distributed is None) == (self.force is None):
            raise ValueError("give either a distributed load or a point force")
        if self.force is not None and (self.point is None or self.patch is None):
            raise ValueError("a point force needs a location and a patch")


FIXED_COMPONENTS = {
    "fixed_all": (0, 1, 2),
    "clamped": (0, 1, 2),
    "fixed_vertical": (2,),
    "fixed_x": (0,),
    "fixed_y": (1,),
}


@dataclass
class ShellBC:
    """Boundary conditions on patch sides and at points.

    ``sides`` maps ``(patch, side)`` to a kind, ``points`` lists
    ``(xy, kind)`` pairs. Kinds are the keys of ``FIXED_COMPONENTS``;
    ``clamped`` also suppresses the edge-normal rotation.
    """

    sides: dict = field(default_factory=dict)
    points: list = field(default_factory=list)

    def __post_init__(self):
        for kind in list(self.sides.values()) + [k for _, k in self.points]:
            if kind not in FIXED_COMPONENTS:
                raise ValueError(f"unknown boundary condition {kind!r}")

    @property
    def clamped_sides(self):
        return [ks for ks, kind in self.sides.items() if kind == "clamped"]


class SingularShellError(np.linalg.LinAlgError):
    """Raised when the constraints leave rigid-body motions free."""


# --- kinematics ---------------------------------------------------------------------

def material_matrix(a_contra: np.ndarray, mat: ShellMaterial) -> np.ndarray:
    """Voigt form of the contravariant elasticity tensor, acting on ``(e11, e22, 2 e12)``."""
    A = a_contra
    a11, a22, a12 = A[:, 0, 0], A[:, 1, 1], A[:, 0, 1]
    nu = mat.nu
    D = np.empty(A.shape[:1] + (3, 3))
    D[:, 0, 0] = a11 ** 2
    D[:, 1, 1] = a22 ** 2
    D[:, 0, 1] = D[:, 1, 0] = nu * a11 * a22 + (1 - nu) * a12 ** 2
    D[:, 0, 2] = D[:, 2, 0] = a11 * a12
    D[:, 1, 2] = D[:, 2, 1] = a22 * a12
    D[:, 2, 2] = 0.5 * ((1 - nu) * a11 * a22 + (1 + nu) * a12 ** 2)
    return D * (mat.E / (1 - nu ** 2))


@dataclass
class ShellKinematics:
    """Strain operators of the local basis at a set of points.

    Operators act on the element-local vector layout ``c * nb + i`` where ``i``
    runs over the columns of ``idx``.
    """

    idx: np.ndarray       # (m, nb) patch-local scalar indices
    N: np.ndarray         # (m, nb)
    dN: np.ndarray        # (m, nb, 2)
    frame: object         # SurfaceFrame
    membrane: np.ndarray  # (m, 3, 3 nb)
    bending: np.ndarray | None  # (m, 3, 3 nb)
    x: np.ndarray         # (m, 3)

    def vector_indices(self, n_basis: int) -> np.ndarray:
        return np.concatenate([self.idx + c * n_basis for c in range(3)], axis=1)

    def rotation(self, d: np.ndarray) -> np.ndarray:
        """Operator ``u -> da3(u) . d`` for in-plane directions ``d`` of shape (m, 3)."""
        return _da3_dot(self.dN, self.frame, d)


def _da3_dot(dN, fr, w):
    # da3(u).w = (-N_,1 (w x a2) + N_,2 (w x a1))_c / J for w orthogonal to a3
    c2 = np.cross(w, fr.a2) / fr.jac_det[:, None]
    c1 = np.cross(w, fr.a1) / fr.jac_det[:, None]
    out = -dN[:, :, 0, None] * c2[:, None, :] + dN[:, :, 1, None] * c1[:, None, :]
    return out.transpose(0, 2, 1).reshape(dN.shape[0], -1)


def shell_kinematics(patch: Patch, u, v, bending: bool = True) -> ShellKinematics:
    if patch.dim != 3:
        raise ValueError("shell analysis needs a surface patch")
    idx, D = splines.tensor_eval(patch.basis, u, v, 2)
    g = geometry_derivs(patch, u, v, 2)
    fr = _frames_from_derivs(g)
    m, nb = idx.shape
    dN = np.stack([D[(1, 0)], D[(0, 1)]], axis=-1)
    a1, a2, a3 = fr.a1, fr.a2, fr.a3
    Bm = np.empty((m, 3, 3, nb))
    Bm[:, 0] = dN[:, None, :, 0] * a1[:, :, None]
    Bm[:, 1] = dN[:, None, :, 1] * a2[:, :, None]
    Bm[:, 2] = dN[:, None, :, 0] * a2[:, :, None] + dN[:, None, :, 1] * a1[:, :, None]
    Bb = None
    if bending:
        Bb = np.empty((m, 3, 3 * nb))
        for row, (a, b), dd in ((0, (0, 0), (2, 0)), (1, (1, 1), (0, 2)), (2, (0, 1), (1, 1))):
            r_ab = fr.r_second[:, :, a, b]
            w = r_ab - fr.b_cov[:, a, b, None] * a3
            k = (D[dd][:, None, :] * a3[:, :, None]).reshape(m, -1) + _da3_dot(dN, fr, w)
            Bb[:, row] = -k * (2.0 if row == 2 else 1.0)
    return ShellKinematics(idx, D[(0, 0)], dN, fr, Bm.reshape(m, 3, 3 * nb), Bb, g[(0, 0)])


# --- stiffness and loads -----------------------------------------------------------------

def _chunks(n_el, per_el, nb, budget=4_000_000):
    size = max(1, budget // max(1, per_el * 9 * nb * 3))
    for s in range(0, n_el, size):
        yield s, min(n_el, s + size)


def assemble_kl_stiffness_local(patch: Patch, mat: ShellMaterial, nq: int | None = None) -> sps.csr_matrix:
    q = QuadratureRule.for_patch(patch, nq)
    npe = q.points_per_element
    nbe = (patch.basis.u.degree + 1) * (patch.basis.v.degree + 1)
    n = 3 * patch.basis.dim
    K = sps.csr_matrix((n, n))
    for s, e in _chunks(q.n_elements, npe, nbe):
        sl = slice(s * npe, e * npe)
        kin = shell_kinematics(patch, q.u[sl], q.v[sl])
        D = material_matrix(kin.frame.a_contra, mat)
        w = q.weights[sl] * kin.frame.jac_det
        DBm = np.einsum("mij,mjk->mik", D, kin.membrane)
        DBb = np.einsum("mij,mjk->mik", D, kin.bending)
        ne = e - s
        Ke = (mat.t * np.einsum("m,mik,mil->mkl", w, kin.membrane, DBm)
              + mat.t ** 3 / 12.0 * np.einsum("m,mik,mil->mkl", w, kin.bending, DBb))
        Ke = Ke.reshape(ne, npe, 3 * nbe, 3 * nbe).sum(axis=1)
        vidx = kin.vector_indices(patch.basis.dim).reshape(ne, npe, -1)[:, 0, :]
        K = K + _element_matrix_to_sparse(vidx, Ke, n)
    return sps.csr_matrix(K)


def assemble_kl_stiffness(mp: MultiPatch, emap: ExtractionMap, mat: ShellMaterial) -> SystemMatrices:
    """Stiffness of ``W = 1/2 int (t eps:C:eps + t^3/12 kappa:C:kappa) dA`` in the map's DoFs."""
    K = pull_back(emap, [assemble_kl_stiffness_local(p, mat) for p in mp.patches])
    return SystemMatrices(K, np.zeros(emap.n_global))


def assemble_shell_load(mp: MultiPatch, emap: ExtractionMap, load: LoadSpec) -> np.ndarray:
    local = [None] * len(mp.patches)
    if load.distributed is not None:
        q_vec = np.asarray(load.distributed, dtype=float)
        for k, patch in enumerate(mp.patches):
            q = QuadratureRule.for_patch(patch)
            idx, D = splines.tensor_eval(patch.basis, q.u, q.v, 0)
            g = geometry_derivs(patch, q.u, q.v, 1)
            dA = np.linalg.norm(np.cross(g[(1, 0)], g[(0, 1)]), axis=1) * q.weights
            s = np.bincount(idx.ravel(), weights=(D[(0, 0)] * dA[:, None]).ravel(),
                            minlength=patch.basis.dim)
            local[k] = np.concatenate([qc * s for qc in q_vec])
    else:
        k = load.patch
        patch = mp.patches[k]
        uv = newton_invert(patch, load.point)
        idx, D = splines.tensor_eval(patch.basis, [uv[0]], [uv[1]], 0)
        s = np.zeros(patch.basis.dim)
        s[idx[0]] = D[(0, 0)][0]
        local[k] = np.concatenate([fc * s for fc in np.asarray(load.force, dtype=float)])
    return pull_back_vector(emap, local)


# --- edges: conormals, rotations, penalties -----------------------------------------------

def _side_eval(patch: Patch, side: int, t):
    kin = shell_kinematics(patch, *side_param(side, t), bending=False)
    fr = kin.frame
    nu = np.asarray(SIDE_NORMALS[side], dtype=float)
    A = fr.a_contra
    d = (np.einsum("mab,a->mb", A, nu)[:, 0, None] * fr.a1
         + np.einsum("mab,a->mb", A, nu)[:, 1, None] * fr.a2)
    d /= np.linalg.norm(d, axis=1)[:, None]
    ds = np.linalg.norm(fr.a1 if side_direction(side) == 0 else fr.a2, axis=1)
    return kin, d, ds


def _vector_values(kin: ShellKinematics) -> np.ndarray:
    """(m, 3, 3 nb) operator giving the displacement vector."""
    m, nb = kin.N.shape
    out = np.zeros((m, 3, 3 * nb))
    for c in range(3):
        out[:, c, c * nb:(c + 1) * nb] = kin.N
    return out


def _pair_blocks(kA, kB, nA, nB, terms):
    """Point-wise sums ``coef * L^T R`` on the stacked local space of two patches."""
    ia = kA.vector_indices(nA)
    ib = kB.vector_indices(nB) + 3 * nA
    idx = np.concatenate([ia, ib], axis=1)
    m, nl = idx.shape
    Kp = np.zeros((m, nl, nl))
    for coef, (la, lb) in terms:
        L = np.concatenate([la, lb], axis=-1)
        if L.ndim == 2:
            Kp += coef[:, None, None] * L[:, :, None] * L[:, None, :]
        else:
            Kp += coef[:, None, None] * np.einsum("mck,mcl->mkl", L, L)
    return _element_matrix_to_sparse(idx, Kp, 3 * (nA + nB))


def penalty_shell_coupling(mp: MultiPatch, emap: ExtractionMap, alpha: float,
                           mat: ShellMaterial) -> sps.csr_matrix:
    """Displacement and rotation jump penalties on every interface."""
    if alpha <= 0:
        raise ValueError("penalty parameter must be positive")
    K = sps.csr_matrix((emap.n_global, emap.n_global))
    for f in mp.interfaces:
        pa, pb = mp.patches[f.patch_a], mp.patches[f.patch_b]
        nq = max(pa.basis.degrees) + 2
        t, w, span = side_quadrature(pa, f.side_a, nq)
        tb = 1.0 - t if f.reversed else t
        kA, dA, dsA = _side_eval(pa, f.side_a, t)
        kB, _, dsB = _side_eval(pb, f.side_b, tb)
        h = 0.5 * (element_arc_length(dsA, w, span) + element_arc_length(dsB, w, span))
        wd = w * dsA
        uA, uB = _vector_values(kA), _vector_values(kB)
        rA, rB = kA.rotation(dA), kB.rotation(dA)
        Kp = _pair_blocks(kA, kB, pa.basis.dim, pb.basis.dim, [
            (alpha * mat.E * mat.t / h * wd, (uA, -uB)),
            (alpha * mat.bending_stiffness / h * wd, (rA, -rB))])
        K = K + pull_back_pair(emap, f.patch_a, f.patch_b, Kp)
    return sps.csr_matrix(K)


def rotation_penalty_terms(mp: MultiPatch, emap: ExtractionMap, sides, alpha_r: float) -> sps.csr_matrix:
    """``(alpha_r / h) int (da3(u).d)(da3(v).d)`` along the given boundary sides."""
    local = [None] * len(mp.patches)
    for k, s in sides:
        patch = mp.patches[k]
        t, w, span = side_quadrature(patch, s, max(patch.basis.degrees) + 2)
        kin, d, ds = _side_eval(patch, s, t)
        h = element_arc_length(ds, w, span)
        R = kin.rotation(d)
        Km = (alpha_r / h * w * ds)[:, None, None] * R[:, :, None] * R[:, None, :]
        Ks = _element_matrix_to_sparse(kin.vector_indices(patch.basis.dim), Km, 3 * patch.basis.dim)
        local[k] = Ks if local[k] is None else local[k] + Ks
    return pull_back(emap, local)


# --- boundary conditions ---------------------------------------------------------------

def rigid_body_modes(mp: MultiPatch) -> list:
    """Local coefficients of the three translations and three linearised rotations."""
    modes = []
    for c in range(3):
        e = np.zeros(3)
        e[c] = 1.0
        modes.append([np.repeat(e, p.basis.dim) for p in mp.patches])
    for c in range(3):
        th = np.zeros(3)
        th[c] = 1.0
        modes.append([np.cross(th, p.control_points.reshape(-1, 3)).T.ravel() for p in mp.patches])
    return modes


def rigid_body_vectors(mp: MultiPatch, emap: ExtractionMap, tol: float = 1e-8) -> np.ndarray:
    """Rigid-body modes expressed in the map's global DoFs, one column each."""
    from scipy.sparse.linalg import lsqr

    E = emap.stacked()
    cols = []
    for m in rigid_body_modes(mp):
        loc = np.concatenate(m)
        g = lsqr(E, loc, atol=1e-14, btol=1e-14, iter_lim=10 * E.shape[1])[0]
        if np.linalg.norm(E @ g - loc) > tol * np.linalg.norm(loc):
            raise ValueError("rigid-body motion is not representable in this space")
        cols.append(g)
    return np.column_stack(cols)


def boundary_sides_on(mp: MultiPatch, axis: int, value: float, tol: float = 1e-8) -> list:
    """Boundary sides lying on the line ``x[axis] = value`` (checked at five points)."""
    t = np.linspace(0.0, 1.0, 5)
    out = []
    for k, s in mp.boundaries:
        x = geometry_derivs(mp.patches[k], *side_param(s, t), 0)[(0, 0)]
        if np.all(np.abs(x[:, axis] - value) < tol):
            out.append((k, s))
    return out


def bc_zero_local(mp: MultiPatch, bcs: ShellBC, tol: float | None = None) -> list:
    """``(patch, local vector indices)`` fixed by the strong part of ``bcs``."""
    tol = 1e-8 * mp.diameter() if tol is None else tol
    out = []
    for (k, s), kind in bcs.sides.items():
        nb = mp.patches[k].basis.dim
        side = mp.patches[k].side_indices(s)
        out.append((k, np.concatenate([side + c * nb for c in FIXED_COMPONENTS[kind]])))
    for xy, kind in bcs.points:
        hit = False
        for k, patch in enumerate(mp.patches):
            nb = patch.basis.dim
            for c in range(4):
                if np.linalg.norm(patch.corner(c)[:2] - np.asarray(xy)[:2]) < tol:
                    i = patch.side_indices(0 if c < 2 else 1)[0 if c % 2 == 0 else -1]
                    out.append((k, np.array([i + comp * nb for comp in FIXED_COMPONENTS[kind]])))
                    hit = True
        if not hit:
            raise ValueError(f"boundary point {xy} is not a patch corner")
    return out


@dataclass
class ConstrainedShell:
    """Reduced shell system ``K c = f`` with ``emap`` mapping ``c`` to patch coefficients.

    When ``constraints`` is set, the admissible coefficients additionally satisfy
    ``constraints @ c = 0`` and :meth:`solve` enforces that with an augmented
    Lagrangian instead of an explicit null-space basis.
    """

    K: sps.csr_matrix
    f: np.ndarray
    emap: ExtractionMap
    constraints: sps.csr_matrix | None = None
    info: dict = field(default_factory=dict)

    def solve(self):
        from .linalg import solve_constrained, solve_spd
        if self.constraints is None:
            return solve_spd(self.K, self.f)
        u, self.info = solve_constrained(self.K, self.f, self.constraints)
        return u


def apply_shell_bcs(system: SystemMatrices, mp: MultiPatch, emap: ExtractionMap, bcs: ShellBC,
                    mat: ShellMaterial, rotation_penalty: float | None = None,
                    constraints=None) -> ConstrainedShell:
    """Eliminate fixed components and add the clamped-edge rotation penalty.

    The rotation penalty defaults to ``1e3 * E t^3 / 12`` and is divided by the
    local edge element size inside the integral. ``constraints`` (rows acting on
    the global coefficients of ``emap``) are carried over to the reduced system.
    """
    zero = bc_zero_local(mp, bcs)
    if not zero:
        raise SingularShellError("no displacement constraints: rigid-body modes remain")
    rows = sps.vstack([emap.blocks[k][idx] for k, idx in zero], format="csr")
    # every rigid motion must violate some constraint
    R = np.column_stack([np.concatenate([m[k][idx] for k, idx in zero]) for m in rigid_body_modes(mp)])
    if np.linalg.matrix_rank(R, tol=1e-10 * max(1.0, np.abs(R).max())) < 6:
        raise SingularShellError("constraints leave a rigid-body motion free")
    Z = null_space_basis(rows)
    K = system.K
    clamped = bcs.clamped_sides
    if clamped:
        alpha_r = 1e3 * mat.bending_stiffness if rotation_penalty is None else rotation_penalty
        K = K + rotation_penalty_terms(mp, emap, clamped, alpha_r)
    G = None if constraints is None else sps.csr_matrix(constraints @ Z)
    return ConstrainedShell(sps.csr_matrix(Z.T @ K @ Z), Z.T @ system.f, emap.compose(Z), G)


def bending_energy(coeffs, K) -> float:
    """``W = u^T K u / 2``."""
    c = np.asarray(coeffs, dtype=float)
    return 0.5 * float(c @ (K @ c))


# --- stresses -----------------------------------------------------------------------------

def _von_mises_at(patch: Patch, coeffs, u, v, mat: ShellMaterial) -> np.ndarray:
    kin = shell_kinematics(patch, u, v, bending=False)
    c = np.asarray(coeffs)[kin.vector_indices(patch.basis.dim)]
    eps = np.einsum("mik,mk->mi", kin.membrane, c)
    sig = np.einsum("mij,mj->mi", material_matrix(kin.frame.a_contra, mat), eps)
    S = np.empty(sig.shape[:1] + (2, 2))
    S[:, 0, 0], S[:, 1, 1] = sig[:, 0], sig[:, 1]
    S[:, 0, 1] = S[:, 1, 0] = sig[:, 2]
    fr = kin.frame
    e1 = fr.a1 / np.linalg.norm(fr.a1, axis=1)[:, None]
    e2 = np.cross(fr.a3, e1)
    T = np.stack([np.stack([np.einsum("md,md->m", a, e) for e in (e1, e2)], axis=-1)
                  for a in (fr.a1, fr.a2)], axis=1)  # T[a, i] = a_a . e_i
    P = np.einsum("mai,mab,mbj->mij", T, S, T)
    s11, s22, s12 = P[:, 0, 0], P[:, 1, 1], P[:, 0, 1]
    return np.sqrt(np.maximum(s11 ** 2 - s11 * s22 + s22 ** 2 + 3 * s12 ** 2, 0.0))


@dataclass
class StressField:
    patch: int
    u: np.ndarray      # (n,)
    v: np.ndarray      # (n,)
    x: np.ndarray      # (n, n, 3)
    sigma: np.ndarray  # (n, n)


def von_mises_membrane(mp: MultiPatch, emap: ExtractionMap, coeffs, mat: ShellMaterial,
                       n: int = 64) -> list:
    """Von Mises membrane stress on an ``n x n`` uniform parameter grid per patch."""
    grid = np.linspace(0.0, 1.0, n)
    U, V = np.meshgrid(grid, grid, indexing="ij")
    out = []
    for k, (patch, c) in enumerate(zip(mp.patches, emap.to_local(coeffs))):
        sig = _von_mises_at(patch, c, U.ravel(), V.ravel(), mat).reshape(n, n)
        x = geometry_derivs(patch, U.ravel(), V.ravel(), 0)[(0, 0)].reshape(n, n, 3)
        out.append(StressField(k, grid, grid, x, sig))
    return out


def interface_stress_jumps(mp: MultiPatch, emap: ExtractionMap, coeffs, mat: ShellMaterial,
                           n_points: int = 200) -> np.ndarray:
    """``|sigma_A - sigma_B|`` at ``n_points`` interior points spread over all interfaces."""
    if not mp.interfaces:
        return np.zeros(0)
    local = emap.to_local(coeffs)
    per = np.full(len(mp.interfaces), n_points // len(mp.interfaces))
    per[: n_points - per.sum()] += 1
    jumps = []
    for f, m in zip(mp.interfaces, per):
        t = (np.arange(m) + 0.5) / m
        tb = 1.0 - t if f.reversed else t
        sa = _von_mises_at(mp.patches[f.patch_a], local[f.patch_a], *side_param(f.side_a, t), mat)
        sb = _von_mises_at(mp.patches[f.patch_b], local[f.patch_b], *side_param(f.side_b, tb), mat)
        jumps.append(np.abs(sa - sb))
    return np.concatenate(jumps)


def write_stress_csv(fields, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["patch", "u", "v", "x", "y", "z", "sigma_vm"])
        for fld in fields:
            for i, u in enumerate(fld.u):
                for j, v in enumerate(fld.v):
                    w.writerow([fld.patch, f"{u:.10g}", f"{v:.10g}",
                                *(f"{c:.10g}" for c in fld.x[i, j]), f"{fld.sigma[i, j]:.10g}"])


def write_stress_vtk(fld: StressField, path) -> None:
    """Legacy ASCII VTK structured grid with a point scalar ``sigma_vm``."""
    nu, nv = fld.sigma.shape
    lines = ["# vtk DataFile Version 3.0", f"von Mises membrane stress, patch {fld.patch}", "ASCII",
             "DATASET STRUCTURED_GRID", f"DIMENSIONS {nu} {nv} 1", f"POINTS {nu * nv} double"]
    # VTK runs the first index fastest
    for j in range(nv):
        for i in range(nu):
            lines.append(" ".join(f"{c:.10g}" for c in fld.x[i, j]))
    lines += [f"POINT_DATA {nu * nv}", "SCALARS sigma_vm double 1", "LOOKUP_TABLE default"]
    lines += [f"{fld.sigma[i, j]:.10g}" for j in range(nv) for i in range(nu)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def stress_contours(fields, levels=CONTOUR_LEVELS) -> list:
    """Iso-lines of the sampled stress as ``(level, patch, xyz polyline)`` records."""
    from skimage.measure import find_contours

    out = []
    for fld in fields:
        n = fld.sigma.shape[0]
        for level in levels:
            for path in find_contours(fld.sigma, level):
                # interpolate physical points along the fractional grid indices
                i0 = np.clip(np.floor(path[:, 0]).astype(int), 0, n - 2)
                j0 = np.clip(np.floor(path[:, 1]).astype(int), 0, n - 2)
                a, b = path[:, 0] - i0, path[:, 1] - j0
                X = ((1 - a) * (1 - b))[:, None] * fld.x[i0, j0] + (a * (1 - b))[:, None] * fld.x[i0 + 1, j0] \
                    + ((1 - a) * b)[:, None] * fld.x[i0, j0 + 1] + (a * b)[:, None] * fld.x[i0 + 1, j0 + 1]
                out.append((level, fld.patch, X))
    return out


def write_contours_csv(contours, path, levels=CONTOUR_LEVELS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "patch", "path", "x", "y", "z"])
        for level in levels:
            # a row per level even when the field never reaches it
            w.writerow([f"{level:.10g}", -1, -1, "", "", ""])
        for pid, (level, patch, X) in enumerate(contours):
            for p in X:
                w.writerow([f"{level:.10g}", patch, pid, *(f"{c:.10g}" for c in p)])
