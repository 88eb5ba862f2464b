"""Biharmonic and plate forms on planar multipatches.

Everything is assembled patch-locally and pulled back to global DoFs through an
:class:`~mpiga.smoothspace.ExtractionMap` as ``sum_k E_k^T K_k E_k``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from . import splines
from .multipatch import SIDE_NORMALS, MultiPatch, Patch, geometry_derivs, side_direction, side_param
from .smoothspace import ExtractionMap

PI = np.pi


# --- quadrature --------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss rule on every element of a patch, element-major ordering."""

    u: np.ndarray
    v: np.ndarray
    weights: np.ndarray
    n_elements: int
    points_per_element: int

    @classmethod
    def for_patch(cls, patch: Patch, n: int | None = None) -> "QuadratureRule":
        tb = patch.basis
        n = n or max(tb.degrees) + 1
        pu, wu = splines.element_quadrature(tb.u, n)
        pv, wv = splines.element_quadrature(tb.v, n)
        neu, nev = pu.shape[0], pv.shape[0]
        U = np.broadcast_to(pu[:, None, :, None], (neu, nev, n, n))
        V = np.broadcast_to(pv[None, :, None, :], (neu, nev, n, n))
        W = wu[:, None, :, None] * wv[None, :, None, :]
        return cls(U.ravel(), V.ravel(), W.ravel(), neu * nev, n * n)


def side_quadrature(patch: Patch, side: int, n: int):
    """Gauss points along a side: parameter ``t``, weights, and span index per point."""
    spec = patch.side_spec(side)
    pts, wts = splines.element_quadrature(spec, n)
    span = np.repeat(np.arange(pts.shape[0]), n)
    return pts.ravel(), wts.ravel(), span


# --- physical derivatives ------------------------------------------------------

@dataclass
class PhysicalBasis:
    """Basis functions mapped to physical coordinates at a set of points."""

    idx: np.ndarray      # (m, nb) local basis indices
    val: np.ndarray      # (m, nb)
    grad: np.ndarray     # (m, nb, 2)
    hess: np.ndarray | None   # (m, nb, 2, 2)
    grad_lap: np.ndarray | None  # (m, nb, 2)
    x: np.ndarray        # (m, 2)
    J: np.ndarray        # (m, 2, 2), J[i, a] = dx_i / dxi_a
    detJ: np.ndarray     # (m,)

    @property
    def lap(self) -> np.ndarray:
        return self.hess[..., 0, 0] + self.hess[..., 1, 1]


def _param_tensor(D, order):
    m, nb = D[(0, 0)].shape
    grad = np.stack([D[(1, 0)], D[(0, 1)]], axis=-1)
    H = T = None
    if order >= 2:
        H = np.empty((m, nb, 2, 2))
        H[..., 0, 0] = D[(2, 0)]
        H[..., 0, 1] = H[..., 1, 0] = D[(1, 1)]
        H[..., 1, 1] = D[(0, 2)]
    if order >= 3:
        T = np.empty((m, nb, 2, 2, 2))
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    k = a + b + c
                    T[..., a, b, c] = D[(3 - k, k)]
    return grad, H, T


def _geom_tensor(g, order):
    m = g[(0, 0)].shape[0]
    J = np.stack([g[(1, 0)], g[(0, 1)]], axis=-1)  # (m, d, 2)
    X2 = X3 = None
    if order >= 2:
        X2 = np.empty((m, J.shape[1], 2, 2))
        X2[..., 0, 0] = g[(2, 0)]
        X2[..., 0, 1] = X2[..., 1, 0] = g[(1, 1)]
        X2[..., 1, 1] = g[(0, 2)]
    if order >= 3:
        X3 = np.empty((m, J.shape[1], 2, 2, 2))
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    k = a + b + c
                    X3[..., a, b, c] = g[(3 - k, k)]
    return J, X2, X3


def physical_basis(patch: Patch, u, v, order: int = 2) -> PhysicalBasis:
    """Chain rule up to third derivatives for a planar patch."""
    if patch.dim != 2:
        raise ValueError("physical_basis expects a planar patch")
    idx, D = splines.tensor_eval(patch.basis, u, v, order)
    g = geometry_derivs(patch, u, v, order)
    grad_p, Hp, Tp = _param_tensor(D, order)
    J, X2, X3 = _geom_tensor(g, order)
    detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    scale = np.linalg.norm(J[:, :, 0], axis=1) * np.linalg.norm(J[:, :, 1], axis=1)
    if np.any(np.abs(detJ) <= 1e-14 * scale):
        raise ValueError("singular Jacobian at a quadrature point")
    Ji = np.linalg.inv(J)  # Ji[a, i] = dxi_a / dx_i
    grad = np.einsum("mai,mna->mni", Ji, grad_p)
    hess = grad_lap = None
    if order >= 2:
        R2 = Hp - np.einsum("mni,miab->mnab", grad, X2)
        hess = np.einsum("mai,mbj,mnab->mnij", Ji, Ji, R2)
    if order >= 3:
        S = (np.einsum("mnij,miac,mjb->mnabc", hess, X2, J)
             + np.einsum("mnij,mia,mjbc->mnabc", hess, J, X2)
             + np.einsum("mnij,miab,mjc->mnabc", hess, X2, J))
        R3 = Tp - S - np.einsum("mni,miabc->mnabc", grad, X3)
        T = np.einsum("mai,mbj,mck,mnabc->mnijk", Ji, Ji, Ji, R3)
        grad_lap = T[:, :, 0, 0, :] + T[:, :, 1, 1, :]
    return PhysicalBasis(idx, D[(0, 0)], grad, hess, grad_lap, g[(0, 0)], J, detJ)


def outward_normal(pb: PhysicalBasis, side: int) -> np.ndarray:
    """Unit outward normal of ``side`` at the points of ``pb``."""
    nu = np.asarray(SIDE_NORMALS[side])
    n = np.einsum("mai,a->mi", np.linalg.inv(pb.J), nu)
    return n / np.linalg.norm(n, axis=1)[:, None]


def tangent_speed(pb: PhysicalBasis, side: int) -> np.ndarray:
    return np.linalg.norm(pb.J[:, :, side_direction(side)], axis=1)


def element_arc_length(ds, w, span):
    """Arc length of the element each point belongs to."""
    per_span = np.bincount(span, weights=ds * w)
    return per_span[span]


# --- sparse helpers ------------------------------------------------------------

def _element_matrix_to_sparse(idx, Ke, n):
    """Sum dense per-group blocks ``Ke[g]`` on index sets ``idx[g]`` into an ``n x n`` matrix."""
    ng, nb = idx.shape
    rows = np.broadcast_to(idx[:, :, None], (ng, nb, nb)).ravel()
    cols = np.broadcast_to(idx[:, None, :], (ng, nb, nb)).ravel()
    return sps.csr_matrix((Ke.ravel(), (rows, cols)), shape=(n, n))


def pull_back(emap: ExtractionMap, local: list) -> sps.csr_matrix:
    """``sum_k E_k^T A_k E_k``."""
    K = sps.csr_matrix((emap.n_global, emap.n_global))
    for E, A in zip(emap.blocks, local):
        if A is not None:
            K = K + E.T @ (A @ E)
    return sps.csr_matrix(K)


def pull_back_pair(emap, ka, kb, A_pair):
    """Pull back a matrix acting on the stacked local coefficients of two patches."""
    Epair = sps.vstack([emap.blocks[ka], emap.blocks[kb]], format="csr")
    return sps.csr_matrix(Epair.T @ (A_pair @ Epair))


def pull_back_vector(emap: ExtractionMap, local: list) -> np.ndarray:
    f = np.zeros(emap.n_global)
    for E, b in zip(emap.blocks, local):
        if b is not None:
            f += E.T @ b
    return f


# --- manufactured solution -------------------------------------------------------

class ManufacturedBiharmonic:
    """``phi = (cos 4 pi x - 1)(cos 4 pi y - 1)`` with ``Delta^2 phi = f``."""

    k = 4.0 * PI

    def _c(self, s, d):
        k = self.k
        if d == 0:
            return np.cos(k * s) - 1.0
        # d-th derivative of cos(k s)
        return k ** d * np.cos(k * s + d * PI / 2)

    def value(self, x, y):
        return self._c(x, 0) * self._c(y, 0)

    def grad(self, x, y):
        return np.stack([self._c(x, 1) * self._c(y, 0), self._c(x, 0) * self._c(y, 1)], axis=-1)

    def hess(self, x, y):
        H = np.empty(np.shape(x) + (2, 2))
        H[..., 0, 0] = self._c(x, 2) * self._c(y, 0)
        H[..., 0, 1] = H[..., 1, 0] = self._c(x, 1) * self._c(y, 1)
        H[..., 1, 1] = self._c(x, 0) * self._c(y, 2)
        return H

    def bilaplacian(self, x, y):
        """Delta^2 phi from the closed-form fourth derivatives."""
        c = self._c
        return c(x, 4) * c(y, 0) + 2 * c(x, 2) * c(y, 2) + c(x, 0) * c(y, 4)

    def rhs(self, x, y):
        cx, cy = np.cos(self.k * x), np.cos(self.k * y)
        return 256 * PI ** 4 * (4 * cx * cy - cx - cy)


# --- domain forms ------------------------------------------------------------------

@dataclass
class SystemMatrices:
    K: sps.csr_matrix
    f: np.ndarray
    M: sps.csr_matrix | None = None

    @property
    def n(self) -> int:
        return self.K.shape[0]


def assemble_biharmonic_local(patch: Patch, rhs=None, nq: int | None = None):
    q = QuadratureRule.for_patch(patch, nq)
    pb = physical_basis(patch, q.u, q.v, 2)
    w = q.weights * np.abs(pb.detJ)
    ne, npe = q.n_elements, q.points_per_element
    lap = pb.lap.reshape(ne, npe, -1)
    we = w.reshape(ne, npe)
    Ke = np.einsum("eqi,eq,eqj->eij", lap, we, lap)
    idx = pb.idx.reshape(ne, npe, -1)[:, 0, :]
    K = _element_matrix_to_sparse(idx, Ke, patch.basis.dim)
    f = None
    if rhs is not None:
        fv = rhs(pb.x[:, 0], pb.x[:, 1]) * w
        f = np.bincount(pb.idx.ravel(), weights=(fv[:, None] * pb.val).ravel(),
                        minlength=patch.basis.dim)
    return K, f


def assemble_biharmonic(mp: MultiPatch, emap: ExtractionMap, rhs=None) -> SystemMatrices:
    """``K_ij = int Lap(phi_i) Lap(phi_j)``, ``f_i = int f phi_i``."""
    Ks, fs = zip(*(assemble_biharmonic_local(p, rhs) for p in mp.patches))
    K = pull_back(emap, list(Ks))
    f = pull_back_vector(emap, list(fs)) if rhs is not None else np.zeros(emap.n_global)
    return SystemMatrices(K, f)


def assemble_mass_local(patch: Patch, density_scale: float = 1.0, nq: int | None = None):
    q = QuadratureRule.for_patch(patch, nq)
    idx, D = splines.tensor_eval(patch.basis, q.u, q.v, 1)
    g = geometry_derivs(patch, q.u, q.v, 1)
    if patch.dim == 2:
        det = np.abs(g[(1, 0)][:, 0] * g[(0, 1)][:, 1] - g[(1, 0)][:, 1] * g[(0, 1)][:, 0])
    else:
        det = np.linalg.norm(np.cross(g[(1, 0)], g[(0, 1)]), axis=1)
    ne, npe = q.n_elements, q.points_per_element
    N = D[(0, 0)].reshape(ne, npe, -1)
    we = (q.weights * det * density_scale).reshape(ne, npe)
    Me = np.einsum("eqi,eq,eqj->eij", N, we, N)
    return _element_matrix_to_sparse(idx.reshape(ne, npe, -1)[:, 0, :], Me, patch.basis.dim)


def assemble_mass(mp: MultiPatch, emap: ExtractionMap, density_scale: float = 1.0) -> sps.csr_matrix:
    return pull_back(emap, [assemble_mass_local(p, density_scale) for p in mp.patches])


# --- interface and boundary terms ---------------------------------------------------

def _interface_eval(mp: MultiPatch, f, order: int):
    pa, pb_ = mp.patches[f.patch_a], mp.patches[f.patch_b]
    nq = max(pa.basis.degrees) + 2
    t, w, span = side_quadrature(pa, f.side_a, nq)
    tb = 1.0 - t if f.reversed else t
    A = physical_basis(pa, *side_param(f.side_a, t), order)
    B = physical_basis(pb_, *side_param(f.side_b, tb), order)
    n = outward_normal(A, f.side_a)
    ds = tangent_speed(A, f.side_a)
    h = 0.5 * (element_arc_length(ds, w, span)
               + element_arc_length(tangent_speed(B, f.side_b), w, span))
    return pa, pb_, A, B, n, w * ds, h


def _pair_sparse(na, nb_, A, B, blocks):
    """Assemble point-wise outer products on the stacked pair index space.

    ``blocks`` is a list of ``(coef, left, right)`` with ``left``/``right`` given as
    ``(vals_on_A, vals_on_B)`` arrays of shape ``(m, nbA)``, ``(m, nbB)``.
    """
    idx = np.concatenate([A.idx, na + B.idx], axis=1)
    m, nloc = idx.shape
    Kp = np.zeros((m, nloc, nloc))
    for coef, (la, lb), (ra, rb) in blocks:
        left = np.concatenate([la, lb], axis=1)
        right = np.concatenate([ra, rb], axis=1)
        Kp += coef[:, None, None] * left[:, :, None] * right[:, None, :]
    return _element_matrix_to_sparse(idx, Kp, na + nb_)


def nitsche_interface_terms(mp: MultiPatch, emap: ExtractionMap, alpha: float) -> sps.csr_matrix:
    """Symmetric Nitsche terms enforcing normal-derivative continuity (values must be merged)."""
    if alpha <= 0:
        raise ValueError("Nitsche parameter must be positive")
    K = sps.csr_matrix((emap.n_global, emap.n_global))
    for f in mp.interfaces:
        pa, pb_, A, B, n, w, h = _interface_eval(mp, f, 2)
        dnA = np.einsum("mni,mi->mn", A.grad, n)
        dnB = np.einsum("mni,mi->mn", B.grad, n)
        jump = (dnA, -dnB)
        avg = (0.5 * A.lap, 0.5 * B.lap)
        Kp = _pair_sparse(pa.basis.dim, pb_.basis.dim, A, B, [
            (-w, avg, jump), (-w, jump, avg), (alpha / h * w, jump, jump)])
        K = K + pull_back_pair(emap, f.patch_a, f.patch_b, Kp)
    return sps.csr_matrix(K)


def penalty_interface_terms(mp: MultiPatch, emap: ExtractionMap, alpha: float) -> sps.csr_matrix:
    """``(alpha/h) int [u][v] + (alpha/h) int [d_n u][d_n v]`` on every interface."""
    if alpha <= 0:
        raise ValueError("penalty parameter must be positive")
    K = sps.csr_matrix((emap.n_global, emap.n_global))
    for f in mp.interfaces:
        pa, pb_, A, B, n, w, h = _interface_eval(mp, f, 1)
        jv = (A.val, -B.val)
        jn = (np.einsum("mni,mi->mn", A.grad, n), -np.einsum("mni,mi->mn", B.grad, n))
        Kp = _pair_sparse(pa.basis.dim, pb_.basis.dim, A, B, [
            (alpha / h * w, jv, jv), (alpha / h * w, jn, jn)])
        K = K + pull_back_pair(emap, f.patch_a, f.patch_b, Kp)
    return sps.csr_matrix(K)


def nitsche_boundary_terms(mp: MultiPatch, emap: ExtractionMap, alpha_n: float, alpha_d: float,
                           g=None, g_n=None, sides=None):
    """Weak ``u = g`` and ``d_n u = g_n`` on the boundary for the ``Lap u Lap v`` form.

    Returns ``(K_add, f_add)``. ``g(x, y)`` and ``g_n(x, y, n)`` may be None for
    homogeneous data.
    """
    if alpha_n <= 0 or alpha_d <= 0:
        raise ValueError("Nitsche parameters must be positive")
    Kloc = [None] * len(mp.patches)
    floc = [None] * len(mp.patches)
    for k, s in (mp.boundaries if sides is None else sides):
        patch = mp.patches[k]
        nq = max(patch.basis.degrees) + 2
        t, w, span = side_quadrature(patch, s, nq)
        P = physical_basis(patch, *side_param(s, t), 3)
        n = outward_normal(P, s)
        ds = tangent_speed(P, s)
        h = element_arc_length(ds, w, span)
        wd = w * ds
        dn = np.einsum("mni,mi->mn", P.grad, n)
        dnlap = np.einsum("mni,mi->mn", P.grad_lap, n)
        lap, val = P.lap, P.val
        Km = (-wd[:, None, None] * (lap[:, :, None] * dn[:, None, :] + dn[:, :, None] * lap[:, None, :])
              + wd[:, None, None] * (dnlap[:, :, None] * val[:, None, :] + val[:, :, None] * dnlap[:, None, :])
              + (alpha_n / h * wd)[:, None, None] * dn[:, :, None] * dn[:, None, :]
              + (alpha_d / h ** 3 * wd)[:, None, None] * val[:, :, None] * val[:, None, :])
        Ks = _element_matrix_to_sparse(P.idx, Km, patch.basis.dim)
        Kloc[k] = Ks if Kloc[k] is None else Kloc[k] + Ks
        gv = np.zeros(t.size) if g is None else g(P.x[:, 0], P.x[:, 1])
        gn = np.zeros(t.size) if g_n is None else g_n(P.x[:, 0], P.x[:, 1], n)
        fm = wd[:, None] * (-lap * gn[:, None] + dnlap * gv[:, None]
                            + (alpha_n / h * gn)[:, None] * dn + (alpha_d / h ** 3 * gv)[:, None] * val)
        fs = np.bincount(P.idx.ravel(), weights=fm.ravel(), minlength=patch.basis.dim)
        floc[k] = fs if floc[k] is None else floc[k] + fs
    return pull_back(emap, Kloc), pull_back_vector(emap, floc)


# --- error norms --------------------------------------------------------------------

@dataclass
class NormReport:
    L2: float
    H1: float
    H2: float


def evaluate_solution(patch: Patch, coeffs, u, v, order=2):
    pb = physical_basis(patch, u, v, order)
    c = np.asarray(coeffs)[pb.idx]
    out = {"x": pb.x, "val": np.sum(c * pb.val, axis=1),
           "grad": np.einsum("mn,mni->mi", c, pb.grad)}
    if order >= 2:
        out["hess"] = np.einsum("mn,mnij->mij", c, pb.hess)
    return out


def error_norms(mp: MultiPatch, emap: ExtractionMap, coeffs, exact) -> NormReport:
    """L2, H1 and H2 norms of ``u_h - exact``; ``exact`` offers value/grad/hess."""
    e0 = e1 = e2 = 0.0
    for patch, c in zip(mp.patches, emap.to_local(coeffs)):
        q = QuadratureRule.for_patch(patch, max(patch.basis.degrees) + 2)
        s = evaluate_solution(patch, c, q.u, q.v, 2)
        g = geometry_derivs(patch, q.u, q.v, 1)
        det = np.abs(g[(1, 0)][:, 0] * g[(0, 1)][:, 1] - g[(1, 0)][:, 1] * g[(0, 1)][:, 0])
        w = q.weights * det
        x, y = s["x"][:, 0], s["x"][:, 1]
        e0 += np.sum(w * (s["val"] - exact.value(x, y)) ** 2)
        e1 += np.sum(w * np.sum((s["grad"] - exact.grad(x, y)) ** 2, axis=1))
        e2 += np.sum(w * np.sum((s["hess"] - exact.hess(x, y)) ** 2, axis=(1, 2)))
    return NormReport(float(np.sqrt(e0)), float(np.sqrt(e0 + e1)), float(np.sqrt(e0 + e1 + e2)))


def boundary_zero_local(mp: MultiPatch, layers: int = 1):
    """``(patch, indices)`` of coefficient rows on boundary sides (first ``layers`` rows)."""
    out = []
    for k, s in mp.boundaries:
        idx = np.concatenate([mp.patches[k].side_indices(s, l) for l in range(layers)])
        out.append((k, idx))
    return out


def interface_gradient_jumps(mp: MultiPatch, emap: ExtractionMap, coeffs, n_points: int = 100,
                             rng=None) -> np.ndarray:
    """Physical-gradient jumps of ``E coeffs`` at random interface points.

    The ``n_points`` parameters are spread over the interfaces in turn and drawn
    uniformly on each. Returns ``|grad u_A - grad u_B|`` divided by the largest
    gradient magnitude met at the sampled points.
    """
    rng = np.random.default_rng(rng)
    local = emap.to_local(coeffs)
    jumps, scale = [], 0.0
    per = np.full(len(mp.interfaces), n_points // max(1, len(mp.interfaces)))
    per[: n_points - per.sum()] += 1
    for f, m in zip(mp.interfaces, per):
        if m == 0:
            continue
        t = rng.random(m)
        tb = 1.0 - t if f.reversed else t
        ga = evaluate_solution(mp.patches[f.patch_a], local[f.patch_a], *side_param(f.side_a, t), 1)["grad"]
        gb = evaluate_solution(mp.patches[f.patch_b], local[f.patch_b], *side_param(f.side_b, tb), 1)["grad"]
        jumps.append(np.linalg.norm(ga - gb, axis=1))
        scale = max(scale, np.linalg.norm(ga, axis=1).max(), np.linalg.norm(gb, axis=1).max())
    if not jumps:
        return np.zeros(0)
    return np.concatenate(jumps) / max(scale, 1e-300)
