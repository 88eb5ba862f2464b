"""Patch geometry, multi-patch topology and the benchmark domain factories.

Side numbering of the parameter square: 0 is ``u=0``, 1 is ``u=1``, 2 is ``v=0``
and 3 is ``v=1``. Every side is parameterised by the free coordinate running
from 0 to 1. Corners are numbered ``2*iu + iv`` for ``(iu, iv)`` in ``{0,1}^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import splines
from .splines import BasisSpec1D, TensorBasisSpec

SIDE_CORNERS = {0: ((0, 0), (0, 1)), 1: ((1, 0), (1, 1)), 2: ((0, 0), (1, 0)), 3: ((0, 1), (1, 1))}
# outward unit normal of each side in the parameter square
SIDE_NORMALS = {0: (-1.0, 0.0), 1: (1.0, 0.0), 2: (0.0, -1.0), 3: (0.0, 1.0)}


def side_direction(side: int) -> int:
    """Parametric direction running along ``side`` (0 for u, 1 for v)."""
    return 1 if side in (0, 1) else 0


def side_param(side: int, t):
    t = np.asarray(t, dtype=float)
    fixed = np.full_like(t, 0.0 if side in (0, 2) else 1.0)
    return (fixed, t) if side in (0, 1) else (t, fixed)


class Patch:
    """Tensor-product B-spline map from ``[0,1]^2`` into ``R^d`` (d = 2 or 3)."""

    def __init__(self, basis: TensorBasisSpec, control_points):
        cp = np.array(control_points, dtype=float)
        if cp.ndim != 3 or cp.shape[:2] != basis.shape:
            raise ValueError(f"control grid {cp.shape} does not match basis {basis.shape}")
        if cp.shape[2] not in (2, 3):
            raise ValueError("control points must be 2D or 3D")
        cp.setflags(write=False)
        self.basis = basis
        self.control_points = cp

    def __repr__(self):
        return f"Patch(degrees={self.basis.degrees}, shape={self.basis.shape}, d={self.dim})"

    @property
    def dim(self) -> int:
        return self.control_points.shape[2]

    @classmethod
    def bilinear(cls, p00, p10, p11, p01) -> "Patch":
        """Bilinear patch through corners given counterclockwise from ``(u,v)=(0,0)``."""
        lin = BasisSpec1D(1, [0, 0, 1, 1])
        cp = np.array([[p00, p01], [p10, p11]], dtype=float)
        return cls(TensorBasisSpec(lin, lin), cp)

    def corner(self, c: int) -> np.ndarray:
        iu, iv = divmod(c, 2)
        return self.control_points[-1 if iu else 0, -1 if iv else 0].copy()

    def side_indices(self, side: int, layer: int = 0) -> np.ndarray:
        """Flat coefficient indices of the ``layer``-th row parallel to ``side``, ordered along it."""
        nu, nv = self.basis.shape
        if side == 0:
            return self.basis.index(layer, np.arange(nv))
        if side == 1:
            return self.basis.index(nu - 1 - layer, np.arange(nv))
        if side == 2:
            return self.basis.index(np.arange(nu), layer)
        return self.basis.index(np.arange(nu), nv - 1 - layer)

    def side_spec(self, side: int) -> BasisSpec1D:
        return self.basis.direction(side_direction(side))

    def with_control_points(self, basis, cp) -> "Patch":
        return Patch(basis, cp)

    def elevate_to(self, degree: int) -> "Patch":
        su, sv = self.basis.u, self.basis.v
        cp = self.control_points
        while su.degree < degree:
            su, cp = splines.elevate_degree(su, cp)
        cp = np.swapaxes(cp, 0, 1)
        while sv.degree < degree:
            sv, cp = splines.elevate_degree(sv, cp)
        cp = np.swapaxes(cp, 0, 1)
        return Patch(TensorBasisSpec(su, sv), cp)

    def insert_knots(self, knots_u, knots_v) -> "Patch":
        su, cp = splines.insert_knots(self.basis.u, self.control_points, knots_u)
        sv, cpt = splines.insert_knots(self.basis.v, np.swapaxes(cp, 0, 1), knots_v)
        return Patch(TensorBasisSpec(su, sv), np.swapaxes(cpt, 0, 1))

    def refine_uniform(self) -> "Patch":
        mids = [0.5 * (b[:-1] + b[1:]) for b in (self.basis.u.breaks(), self.basis.v.breaks())]
        return self.insert_knots(*mids)

    def refined(self, degree: int, regularity: int, n_elements: int) -> "Patch":
        """Degree-elevate then insert knots to reach ``S(p, r, 1/n_elements)`` in both directions.

        The current knot vectors must be contained in the target ones.
        """
        patch = self.elevate_to(degree)
        target = splines.uniform_spec(degree, regularity, n_elements)
        new = []
        for spec in (patch.basis.u, patch.basis.v):
            missing = _multiset_difference(target.knots, spec.knots)
            if missing is None:
                raise ValueError("patch knots are not nested in the target space")
            new.append(missing)
        return patch.insert_knots(*new)

    def mapped(self, fn) -> "Patch":
        """Patch with ``fn`` applied to every control point (exact for affine ``fn``)."""
        cp = np.apply_along_axis(fn, 2, self.control_points)
        return Patch(self.basis, cp)


def _multiset_difference(target, current):
    tv, tc = np.unique(target, return_counts=True)
    cv, cc = np.unique(current, return_counts=True)
    out = []
    for v, c in zip(tv, tc):
        hit = np.nonzero(np.isclose(cv, v, rtol=0, atol=1e-14))[0]
        have = cc[hit[0]] if hit.size else 0
        if have > c:
            return None
        out.extend([v] * (c - have))
    if not set(np.round(cv, 14)).issubset(set(np.round(tv, 14))):
        return None
    return np.array(out)


def geometry_derivs(patch: Patch, u, v, order: int = 2) -> dict:
    """Map derivatives ``{(a, b): array (m, d)}`` for ``a + b <= order``."""
    idx, D = splines.tensor_eval(patch.basis, u, v, order)
    cp = patch.control_points.reshape(-1, patch.dim)
    return {k: np.einsum("mb,mbd->md", val, cp[idx]) for k, val in D.items()}


def eval_geometry(patch: Patch, uv, order: int = 0):
    """Point, Jacobian ``(d, 2)`` and Hessian ``(d, 2, 2)`` of the map at a single ``uv``.

    Returns a tuple of length ``order + 1``.
    """
    u, v = float(uv[0]), float(uv[1])
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        raise ValueError("parameter outside [0,1]^2")
    g = geometry_derivs(patch, [u], [v], order)
    out = [g[(0, 0)][0]]
    if order >= 1:
        out.append(np.stack([g[(1, 0)][0], g[(0, 1)][0]], axis=1))
    if order >= 2:
        H = np.empty((patch.dim, 2, 2))
        H[:, 0, 0] = g[(2, 0)][0]
        H[:, 0, 1] = H[:, 1, 0] = g[(1, 1)][0]
        H[:, 1, 1] = g[(0, 2)][0]
        out.append(H)
    return tuple(out)


@dataclass(frozen=True)
class SurfaceFrame:
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    a_cov: np.ndarray
    b_cov: np.ndarray
    jac_det: np.ndarray
    r_second: np.ndarray  # second derivatives of the map, (..., 3, 2, 2)

    @property
    def a_contra(self) -> np.ndarray:
        return np.linalg.inv(self.a_cov)


def surface_frames(patch: Patch, u, v) -> SurfaceFrame:
    """Vectorised surface frames at matched parameter lists."""
    if patch.dim != 3:
        raise ValueError("surface frames need a 3D patch")
    g = geometry_derivs(patch, u, v, 2)
    return _frames_from_derivs(g)


def _frames_from_derivs(g) -> SurfaceFrame:
    a1, a2 = g[(1, 0)], g[(0, 1)]
    n = np.cross(a1, a2)
    jac = np.linalg.norm(n, axis=-1)
    scale = np.linalg.norm(a1, axis=-1) * np.linalg.norm(a2, axis=-1)
    if np.any(jac < 1e-14 * scale) or np.any(scale == 0):
        raise ValueError("degenerate surface tangents")
    a3 = n / jac[:, None]
    A = np.empty(a1.shape[:1] + (2, 2))
    A[:, 0, 0] = np.einsum("md,md->m", a1, a1)
    A[:, 0, 1] = A[:, 1, 0] = np.einsum("md,md->m", a1, a2)
    A[:, 1, 1] = np.einsum("md,md->m", a2, a2)
    R = np.empty(a1.shape[:1] + (3, 2, 2))
    R[:, :, 0, 0] = g[(2, 0)]
    R[:, :, 0, 1] = R[:, :, 1, 0] = g[(1, 1)]
    R[:, :, 1, 1] = g[(0, 2)]
    B = np.einsum("mdab,md->mab", R, a3)
    return SurfaceFrame(a1, a2, a3, A, B, jac, R)


def surface_frame(patch: Patch, uv) -> SurfaceFrame:
    """Frame at a single parameter point (arrays without the leading point axis)."""
    f = surface_frames(patch, [uv[0]], [uv[1]])
    return SurfaceFrame(*(getattr(f, name)[0] for name in
                          ("a1", "a2", "a3", "a_cov", "b_cov", "jac_det", "r_second")))


@dataclass(frozen=True)
class Interface:
    patch_a: int
    side_a: int
    patch_b: int
    side_b: int
    reversed: bool


@dataclass(frozen=True)
class Vertex:
    point: np.ndarray
    incident: tuple  # ((patch, corner), ...)
    valence: int
    location: str  # "interior" | "boundary"

    @property
    def is_ev(self) -> bool:
        if self.location == "interior":
            return self.valence != 4
        return self.valence >= 3


@dataclass
class MultiPatch:
    patches: list
    interfaces: list = field(default_factory=list)
    boundaries: list = field(default_factory=list)
    vertices: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.patches[0].dim

    def __len__(self):
        return len(self.patches)

    def interior_evs(self) -> list:
        return [v for v in self.vertices if v.location == "interior" and v.is_ev]

    def boundary_evs(self) -> list:
        return [v for v in self.vertices if v.location == "boundary" and v.is_ev]

    def bounding_box(self):
        pts = np.concatenate([p.control_points.reshape(-1, p.dim) for p in self.patches])
        return pts.min(axis=0), pts.max(axis=0)

    def diameter(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))

    def map_patches(self, fn) -> "MultiPatch":
        """Same topology with every patch replaced by ``fn(patch)``."""
        return MultiPatch([fn(p) for p in self.patches], list(self.interfaces),
                          list(self.boundaries), list(self.vertices))

    def refined(self, degree: int, regularity: int, n_elements: int) -> "MultiPatch":
        return self.map_patches(lambda p: p.refined(degree, regularity, n_elements))


def _cluster(points: np.ndarray, tol: float) -> np.ndarray:
    parent = np.arange(len(points))

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in cKDTree(points).query_pairs(tol):
        ri, rj = root(i), root(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([root(i) for i in range(len(points))])
    _, labels = np.unique(roots, return_inverse=True)
    return labels


def _side_curve(patch: Patch, side: int, n: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n)
    return geometry_derivs(patch, *side_param(side, t), order=0)[(0, 0)]


def detect_topology(patches, tol: float | None = None) -> MultiPatch:
    """Build interfaces, boundary sides and vertex valences from conforming patches."""
    patches = list(patches)
    if not patches:
        raise ValueError("no patches")
    corners = np.array([p.corner(c) for p in patches for c in range(4)])
    if tol is None:
        diam = float(np.linalg.norm(corners.max(axis=0) - corners.min(axis=0)))
        tol = 1e-8 * max(diam, 1.0)
    labels = _cluster(corners, tol).reshape(len(patches), 4)

    by_key: dict = {}
    for k in range(len(patches)):
        for s, (c0, c1) in SIDE_CORNERS.items():
            a, b = labels[k, 2 * c0[0] + c0[1]], labels[k, 2 * c1[0] + c1[1]]
            by_key.setdefault(frozenset((a, b)), []).append((k, s, a, b))

    interfaces, boundaries = [], []
    for group in by_key.values():
        matched = set()
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                ka, sa, a0, _ = group[i]
                kb, sb, b0, _ = group[j]
                rev = a0 != b0
                ca = _side_curve(patches[ka], sa, 10)
                cb = _side_curve(patches[kb], sb, 10)
                if rev:
                    cb = cb[::-1]
                if np.max(np.linalg.norm(ca - cb, axis=1)) > tol:
                    continue
                if i in matched or j in matched:
                    raise ValueError(f"non-manifold junction at side ({ka},{sa}) / ({kb},{sb})")
                matched.update((i, j))
                interfaces.append(Interface(ka, sa, kb, sb, bool(rev)))
        for i, (k, s, _, _) in enumerate(group):
            if i not in matched:
                boundaries.append((k, s))
    interfaces.sort(key=lambda f: (f.patch_a, f.side_a))
    boundaries.sort()

    boundary_labels = set()
    for k, s in boundaries:
        for c in SIDE_CORNERS[s]:
            boundary_labels.add(labels[k, 2 * c[0] + c[1]])
    vertices = []
    for lab in range(labels.max() + 1):
        inc = tuple((int(k), int(c)) for k, c in zip(*np.nonzero(labels == lab)))
        pt = corners[[4 * k + c for k, c in inc]].mean(axis=0)
        loc = "boundary" if lab in boundary_labels else "interior"
        vertices.append(Vertex(pt, inc, len({k for k, _ in inc}), loc))
    return MultiPatch(patches, interfaces, boundaries, vertices)


FIG_DOMAIN_CORNERS = [
    [(0, 0), (1 / 3, 0), (1 / 3, 2 / 3), (0, 2 / 3)],
    [(1 / 3, 0), (2 / 3, 0), (2 / 3, 1 / 3), (1 / 3, 2 / 3)],
    [(2 / 3, 0), (1, 0), (1, 1 / 3), (2 / 3, 1 / 3)],
    [(0, 2 / 3), (1 / 3, 2 / 3), (1 / 3, 1), (0, 1)],
    [(1 / 3, 2 / 3), (2 / 3, 1 / 3), (1, 1 / 3), (1, 2 / 3)],
    [(1 / 3, 2 / 3), (1 / 3, 1), (1, 1), (1, 2 / 3)],
]


def patch_from_corners(quad) -> Patch:
    """Bilinear patch through four corners; clockwise input is transposed to keep det J > 0."""
    q = np.asarray(quad, dtype=float)
    x, y = q[:, 0], q[:, 1]
    area2 = np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)
    if area2 < 0:
        q = q[[0, 3, 2, 1]]
    return Patch.bilinear(*q)


def make_fig_domain() -> MultiPatch:
    """Six bilinear patches on the unit square with interior EVs of valence 3 and 5."""
    return detect_topology([patch_from_corners(c) for c in FIG_DOMAIN_CORNERS])


def make_unit_square() -> MultiPatch:
    return detect_topology([Patch.bilinear((0, 0), (1, 0), (1, 1), (0, 1))])


def rescale(mp: MultiPatch, lo=(-0.5, -0.5), hi=(0.5, 0.5)) -> MultiPatch:
    """Affinely map the planar bounding box of ``mp`` onto ``[lo, hi]``."""
    blo, bhi = mp.bounding_box()
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    scale = (hi - lo) / (bhi[:2] - blo[:2])

    def fn(patch):
        cp = patch.control_points.copy()
        cp[..., :2] = lo + (cp[..., :2] - blo[:2]) * scale
        return Patch(patch.basis, cp)

    return mp.map_patches(fn)


def paraboloid_height(kind: str, x, y):
    if kind == "hyperbolic":
        return x ** 2 - y ** 2
    if kind == "elliptic":
        return 1.0 - 2.0 * (x ** 2 + y ** 2)
    raise ValueError(f"unknown paraboloid kind {kind!r}")


def lift_patch(patch: Patch, height) -> Patch:
    """Add ``z = height(x, y)`` by interpolation at the tensor Greville points."""
    tb = patch.basis
    gu, gv = splines.greville_points(tb.u), splines.greville_points(tb.v)
    U, V = np.meshgrid(gu, gv, indexing="ij")
    xy = geometry_derivs(patch, U.ravel(), V.ravel(), 0)[(0, 0)]
    z = height(xy[:, 0], xy[:, 1]).reshape(U.shape)
    Au = splines.collocation_matrix(tb.u, gu).toarray()
    Av = splines.collocation_matrix(tb.v, gv).toarray()
    Z = np.linalg.solve(Au, np.linalg.solve(Av, z.T).T)
    cp = np.concatenate([patch.control_points[..., :2], Z[..., None]], axis=2)
    return Patch(tb, cp)


def make_paraboloid(kind: str, base: MultiPatch | None = None, degree: int = 2) -> MultiPatch:
    """Lift a planar multipatch, rescaled to ``[-1/2,1/2]^2``, onto a paraboloid.

    The lift of a bilinear map is biquadratic, hence exact for ``degree >= 2``.
    """
    if degree < 2:
        raise ValueError("paraboloid lift needs degree >= 2")
    if kind not in ("hyperbolic", "elliptic"):
        raise ValueError(f"unknown paraboloid kind {kind!r}")
    base = make_fig_domain() if base is None else base
    if base.dim != 2:
        raise ValueError("base multipatch must be planar")
    planar = rescale(base)
    lifted = [lift_patch(p.elevate_to(degree), lambda x, y: paraboloid_height(kind, x, y))
              for p in planar.patches]
    return MultiPatch(lifted, list(base.interfaces), list(base.boundaries),
                      _lift_vertices(base.vertices, planar, lifted))


def _lift_vertices(vertices, planar, lifted):
    out = []
    for v in vertices:
        k, c = v.incident[0]
        out.append(Vertex(lifted[k].corner(c), v.incident, v.valence, v.location))
    return out


def newton_invert(patch: Patch, target, start=(0.5, 0.5), tol: float = 1e-10, maxit: int = 50):
    """Parameter ``(u, v)`` whose planar image (first two coordinates) equals ``target``."""
    uv = np.array(start, dtype=float)
    target = np.asarray(target, dtype=float)[:2]
    for _ in range(maxit):
        x, J = eval_geometry(patch, np.clip(uv, 0, 1), 1)
        res = x[:2] - target
        if np.linalg.norm(res) < tol:
            return np.clip(uv, 0, 1)
        uv = np.clip(uv - np.linalg.solve(J[:2], res), 0.0, 1.0)
    x = eval_geometry(patch, uv, 0)[0]
    if np.linalg.norm(x[:2] - target) < tol:
        return uv
    raise ValueError(f"point {target} not found in patch within {tol}")


# --- text format -----------------------------------------------------------

def _fmt(x) -> str:
    return " ".join(f"{float(v):.17g}" for v in np.ravel(x))


def dumps(mp: MultiPatch) -> str:
    lines = [f"mpatch v1 {mp.dim} {len(mp.patches)}"]
    for p in mp.patches:
        for spec in (p.basis.u, p.basis.v):
            lines.append(f"{spec.degree} {spec.knots.size} {_fmt(spec.knots)}")
        for row in p.control_points:
            lines.append(_fmt(row))
    lines.append(f"interfaces {len(mp.interfaces)}")
    for f in mp.interfaces:
        lines.append(f"{f.patch_a} {f.side_a} {f.patch_b} {f.side_b} {int(f.reversed)}")
    lines.append(f"boundaries {len(mp.boundaries)}")
    for k, s in mp.boundaries:
        lines.append(f"{k} {s}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> MultiPatch:
    """Parse the ``mpatch v1`` format; vertices are recomputed from the geometry."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    head = lines[0]
    if head[:2] != ["mpatch", "v1"]:
        raise ValueError("not an mpatch v1 file")
    d, npatch = int(head[2]), int(head[3])
    pos = 1
    patches = []
    for _ in range(npatch):
        specs = []
        for _ in range(2):
            tok = lines[pos]
            pos += 1
            specs.append(BasisSpec1D(int(tok[0]), [float(t) for t in tok[2:2 + int(tok[1])]]))
        tb = TensorBasisSpec(*specs)
        rows = [[float(t) for t in lines[pos + i]] for i in range(tb.u.dim)]
        pos += tb.u.dim
        patches.append(Patch(tb, np.array(rows).reshape(tb.u.dim, tb.v.dim, d)))
    if lines[pos][0] != "interfaces":
        raise ValueError("missing interfaces section")
    nif = int(lines[pos][1])
    ifaces = [Interface(int(a), int(b), int(c), int(e), bool(int(f)))
              for a, b, c, e, f in lines[pos + 1: pos + 1 + nif]]
    pos += 1 + nif
    if lines[pos][0] != "boundaries":
        raise ValueError("missing boundaries section")
    nb = int(lines[pos][1])
    bnds = [(int(a), int(b)) for a, b in lines[pos + 1: pos + 1 + nb]]
    topo = detect_topology(patches)
    return MultiPatch(patches, ifaces, bnds, topo.vertices)
