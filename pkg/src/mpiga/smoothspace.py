"""Coupling strategies as extraction maps from global DoFs to patch-local coefficients.

Four kinds are built here: a single patch, uncoupled patches (the space used by
penalty and Nitsche coupling), the C0-merged space and the C1 space obtained as
the null space of collocated gradient-jump constraints on top of the C0 space.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps

from . import splines
from .multipatch import MultiPatch, Patch, geometry_derivs, side_param

KINDS = ("single", "uncoupled", "c0", "c1")


@dataclass
class ExtractionMap:
    """Global-to-local coefficient map; ``blocks[k]`` has shape ``(n_local_k, n_global)``."""

    n_global: int
    blocks: list
    kind: str

    def __post_init__(self):
        self.blocks = [sps.csr_matrix(b) for b in self.blocks]
        for b in self.blocks:
            if b.shape[1] != self.n_global:
                raise ValueError("block column count differs from n_global")

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([b.shape[0] for b in self.blocks])])

    def stacked(self) -> sps.csr_matrix:
        return sps.vstack(self.blocks, format="csr")

    def to_local(self, coeffs) -> list:
        coeffs = np.asarray(coeffs, dtype=float)
        return [b @ coeffs for b in self.blocks]

    def compose(self, Z, kind: str | None = None) -> "ExtractionMap":
        """Map ``x -> E (Z x)``."""
        Z = sps.csr_matrix(Z)
        return ExtractionMap(Z.shape[1], [b @ Z for b in self.blocks], kind or self.kind)


def identity_map(mp: MultiPatch, kind: str = "uncoupled") -> ExtractionMap:
    """Block identity over all patches (``single`` when there is one patch)."""
    sizes = [p.basis.dim for p in mp.patches]
    n = sum(sizes)
    blocks, off = [], 0
    for s in sizes:
        blocks.append(sps.csr_matrix((np.ones(s), (np.arange(s), off + np.arange(s))), shape=(s, n)))
        off += s
    if len(sizes) == 1:
        kind = "single"
    return ExtractionMap(n, blocks, kind)


def _check_interface_knots(mp: MultiPatch, f):
    sa = mp.patches[f.patch_a].side_spec(f.side_a)
    sb = mp.patches[f.patch_b].side_spec(f.side_b)
    if f.reversed:
        sb = sb.reversed()
    if sa.degree != sb.degree or sa.knots.shape != sb.knots.shape or \
            not np.allclose(sa.knots, sb.knots, atol=1e-12, rtol=0):
        raise ValueError(f"knot mismatch across interface {f}")


def build_c0_map(mp: MultiPatch) -> ExtractionMap:
    """Merge coincident interface coefficients into single global DoFs."""
    sizes = [p.basis.dim for p in mp.patches]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    parent = np.arange(offs[-1])

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for f in mp.interfaces:
        _check_interface_knots(mp, f)
        ia = offs[f.patch_a] + mp.patches[f.patch_a].side_indices(f.side_a)
        ib = offs[f.patch_b] + mp.patches[f.patch_b].side_indices(f.side_b)
        if f.reversed:
            ib = ib[::-1]
        for a, b in zip(ia, ib):
            ra, rb = root(a), root(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([root(i) for i in range(offs[-1])])
    _, glob = np.unique(roots, return_inverse=True)
    n = int(glob.max()) + 1
    blocks = []
    for k, s in enumerate(sizes):
        g = glob[offs[k]:offs[k + 1]]
        blocks.append(sps.csr_matrix((np.ones(s), (np.arange(s), g)), shape=(s, n)))
    kind = "single" if len(sizes) == 1 else "c0"
    return ExtractionMap(n, blocks, kind)


def chebyshev_points(n: int, a: float, b: float) -> np.ndarray:
    k = np.arange(n)
    x = np.cos((2 * k + 1) * np.pi / (2 * n))[::-1]
    return 0.5 * (a + b) + 0.5 * (b - a) * x


def _scaled_gradient_rows(patch: Patch, u, v):
    """Rows of ``det(J) * grad_x`` applied to local coefficients, plus ``det(J)``.

    Only the first two coordinates of the map are used, so surfaces are handled
    through their planar projection (graph lifts).
    """
    idx, D = splines.tensor_eval(patch.basis, u, v, 1)
    g = geometry_derivs(patch, u, v, 1)
    xu, yu = g[(1, 0)][:, 0], g[(1, 0)][:, 1]
    xv, yv = g[(0, 1)][:, 0], g[(0, 1)][:, 1]
    det = xu * yv - xv * yu
    scale = np.hypot(xu, yu) * np.hypot(xv, yv)
    if np.any(np.abs(det) <= 1e-14 * scale):
        raise ValueError("degenerate Jacobian at a collocation point")
    du, dv = D[(1, 0)], D[(0, 1)]
    gx = yv[:, None] * du - yu[:, None] * dv
    gy = -xv[:, None] * du + xu[:, None] * dv
    return idx, gx, gy, det


def _rows_to_matrix(idx, vals, n_cols) -> sps.csr_matrix:
    m = idx.shape[0]
    rows = np.repeat(np.arange(m), idx.shape[1])
    return sps.csr_matrix((vals.ravel(), (rows, idx.ravel())), shape=(m, n_cols))


def interface_points(mp: MultiPatch, f, per_span: int):
    """Chebyshev points per knot span on side A and the matching parameters on side B."""
    spec = mp.patches[f.patch_a].side_spec(f.side_a)
    br = spec.breaks()
    t = np.concatenate([chebyshev_points(per_span, a, b) for a, b in zip(br[:-1], br[1:])])
    tb = 1.0 - t if f.reversed else t
    return t, side_param(f.side_a, t), side_param(f.side_b, tb)


def build_c1_constraints(mp: MultiPatch, c0map: ExtractionMap, points_per_span: int | None = None,
                         zero_local=()) -> sps.csr_matrix:
    """Collocated, determinant-scaled gradient-jump constraints on the C0 space.

    ``zero_local`` is an iterable of ``(patch, local_indices)`` whose coefficient
    values are additionally constrained to zero (homogeneous boundary data).
    """
    blocks = []
    for f in mp.interfaces:
        pa, pb = mp.patches[f.patch_a], mp.patches[f.patch_b]
        q = points_per_span or (pa.side_spec(f.side_a).degree + 3)
        _, (ua, va), (ub, vb) = interface_points(mp, f, q)
        ia, gxa, gya, deta = _scaled_gradient_rows(pa, ua, va)
        ib, gxb, gyb, detb = _scaled_gradient_rows(pb, ub, vb)
        for ga, gb in ((gxa, gxb), (gya, gyb)):
            ra = _rows_to_matrix(ia, ga * detb[:, None], pa.basis.dim) @ c0map.blocks[f.patch_a]
            rb = _rows_to_matrix(ib, gb * deta[:, None], pb.basis.dim) @ c0map.blocks[f.patch_b]
            diff = sps.csr_matrix(ra - rb)
            # rows that vanish identically on the C0 space carry only round-off
            ref = np.maximum(abs(ra).max(axis=1).toarray().ravel(), abs(rb).max(axis=1).toarray().ravel())
            keep = abs(diff).max(axis=1).toarray().ravel() > 1e-11 * ref
            blocks.append(diff[np.nonzero(keep)[0]])
    for k, idx in zero_local:
        blocks.append(c0map.blocks[k][np.asarray(idx)])
    if not blocks:
        return sps.csr_matrix((0, c0map.n_global))
    C = sps.vstack(blocks, format="csr")
    # equilibrate rows
    rmax = np.maximum(abs(C).max(axis=1).toarray().ravel(), 1e-300)
    C = sps.diags(1.0 / rmax) @ C
    C.eliminate_zeros()
    return sps.csr_matrix(C)


def null_space_basis(G: sps.spmatrix, tol: float = 1e-10) -> sps.csr_matrix:
    """Sparse ``Z`` with orthonormal columns spanning ``ker G``.

    Columns of ``G`` that no constraint touches pass through unchanged; the
    touched ones get a dense orthonormal null-space basis from an SVD.
    """
    G = sps.csc_matrix(G)
    n = G.shape[1]
    touched = np.nonzero(np.diff(G.indptr) > 0)[0]
    free = np.setdiff1d(np.arange(n), touched)
    if touched.size == 0:
        return sps.identity(n, format="csr")
    A = G[:, touched].toarray()
    if A.shape[0] > A.shape[1]:
        A = sla.qr(A, mode="r", overwrite_a=True, check_finite=False)[0][: A.shape[1]]
    _, s, vt = sla.svd(A, full_matrices=True, check_finite=False, lapack_driver="gesdd")
    rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    N = vt[rank:].T
    N[np.abs(N) < 1e-15] = 0.0
    m_free, m_null = free.size, N.shape[1]
    if m_free + m_null == 0:
        raise ValueError("constraints leave an empty space")
    rows = np.concatenate([free, np.repeat(touched, m_null)])
    cols = np.concatenate([np.arange(m_free), m_free + np.tile(np.arange(m_null), touched.size)])
    vals = np.concatenate([np.ones(m_free), N.ravel()])
    Z = sps.csr_matrix((vals, (rows, cols)), shape=(n, m_free + m_null))
    Z.eliminate_zeros()
    return Z


def build_smooth_c1_map(C, c0map: ExtractionMap, tol: float = 1e-10) -> ExtractionMap:
    """Compose the C0 map with an orthonormal null-space basis of ``C``."""
    Z = null_space_basis(C, tol)
    if Z.shape[1] == 0:
        raise ValueError("empty C1 space: constraints over-determined")
    return c0map.compose(Z, "c1" if len(c0map.blocks) > 1 else "single")


def constrain_map(emap: ExtractionMap, zero_local, tol: float = 1e-10) -> ExtractionMap:
    """Restrict a map to functions whose listed local coefficients vanish."""
    rows = [emap.blocks[k][np.asarray(idx)] for k, idx in zero_local]
    if not rows:
        return emap
    G = sps.vstack(rows, format="csr")
    return emap.compose(null_space_basis(G, tol))


def smooth_space(mp: MultiPatch, zero_local=(), tol: float = 1e-10) -> ExtractionMap:
    c0 = build_c0_map(mp)
    C = build_c1_constraints(mp, c0, zero_local=zero_local)
    return build_smooth_c1_map(C, c0, tol)


def vector_map(maps) -> ExtractionMap:
    """Component-wise map for vector fields; local layout is component-major per patch."""
    n = sum(m.n_global for m in maps)
    npatch = len(maps[0].blocks)
    blocks = []
    for k in range(npatch):
        blocks.append(sps.block_diag([m.blocks[k] for m in maps], format="csr"))
    return ExtractionMap(n, blocks, maps[0].kind)


def build_map(mp: MultiPatch, coupling: str, zero_local=()) -> ExtractionMap:
    """Scalar extraction map for a coupling name (``single``, ``c0``, ``penalty``, ``nitsche``, ``smooth-c1``)."""
    if coupling in ("single", "penalty", "uncoupled"):
        emap = identity_map(mp)
    elif coupling in ("c0", "nitsche"):
        emap = build_c0_map(mp)
    elif coupling in ("smooth-c1", "c1"):
        return smooth_space(mp, zero_local)
    else:
        raise ValueError(f"unknown coupling {coupling!r}")
    return constrain_map(emap, zero_local) if zero_local else emap


# --- requirement gate ------------------------------------------------------

METHODS = ("AS-G1", "Approx-C1", "D-Patch", "Almost-C1")
GEOMETRY_NOTES = {
    "AS-G1": "analysis-suitable G1 parameterisation",
    "Approx-C1": "G2 continuity of the geometry",
    "D-Patch": "C1 continuity of the geometry; boundary EVs of valence <= 3",
    "Almost-C1": "C1 continuity of the geometry",
}


@dataclass
class RequirementReport:
    p: int
    r: int
    passed: dict = field(default_factory=dict)
    reasons: dict = field(default_factory=dict)
    interior_evs: list = field(default_factory=list)
    boundary_evs: list = field(default_factory=list)

    def any_passed(self) -> bool:
        return any(self.passed.values())

    def summary(self) -> str:
        lines = [f"p={self.p} r={self.r} iEV={len(self.interior_evs)} bEV={len(self.boundary_evs)}"]
        for m in METHODS:
            why = "; ".join(self.reasons[m]) or "ok"
            lines.append(f"  {m:10s} {'PASS' if self.passed[m] else 'FAIL'}  {why}")
        return "\n".join(lines)


def _is_bilinear(patch: Patch) -> bool:
    rng = np.random.default_rng(0)
    u, v = rng.random(16), rng.random(16)
    x = geometry_derivs(patch, u, v, 0)[(0, 0)]
    c = [patch.corner(i) for i in range(4)]
    bl = (np.outer((1 - u) * (1 - v), c[0]) + np.outer((1 - u) * v, c[1])
          + np.outer(u * (1 - v), c[2]) + np.outer(u * v, c[3]))
    return bool(np.allclose(x, bl, atol=1e-10 * (1 + np.abs(x).max())))


def check_requirements(mp: MultiPatch, p: int, r: int) -> RequirementReport:
    """Degree, regularity and topology gate for the four named C1 constructions."""
    rep = RequirementReport(p, r)
    rep.interior_evs = [(tuple(np.round(v.point, 12)), v.valence) for v in mp.interior_evs()]
    rep.boundary_evs = [(tuple(np.round(v.point, 12)), v.valence) for v in mp.boundary_evs()]
    rules = {
        "AS-G1": [(p >= 3, "(i) degree p>=3"), (r <= p - 2, "(ii) regularity r<=p-2")],
        "Approx-C1": [(p >= 3, "(i) degree p>=3"), (r <= p - 1, "(ii) regularity r<=p-1")],
        "D-Patch": [(p >= 3, "(i) degree p>=3"), (r <= p - 1, "(ii) regularity r<=p-1"),
                    (all(val <= 3 for _, val in rep.boundary_evs), "(iii) boundary EVs need valence<=3")],
        "Almost-C1": [(p == 2, "(i) degree p=2"), (r == 1, "(ii) regularity r=1")],
    }
    if mp.dim == 2:
        rules["AS-G1"].append((all(_is_bilinear(pt) for pt in mp.patches),
                               "(iii) analysis-suitability (bilinear patches)"))
    for m in METHODS:
        failed = [why for ok, why in rules[m] if not ok]
        rep.passed[m] = not failed
        rep.reasons[m] = failed
    return rep
