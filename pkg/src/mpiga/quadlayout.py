"""Quad-mesh ingestion and multi-patch segmentation by tracing from extraordinary vertices.

Straight continuation through a regular interior vertex is combinatorial: a
trace entering vertex ``b`` along half-edge ``h`` leaves along
``next(twin(next(h)))``, the edge two faces further around ``b``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .multipatch import MultiPatch, Patch, detect_topology
from .splines import BasisSpec1D, TensorBasisSpec


class MeshError(ValueError):
    """Malformed mesh input or a face group that is not a structured grid."""


@dataclass(frozen=True)
class QuadMesh:
    vertices: np.ndarray  # (nv, d)
    faces: np.ndarray     # (nf, 4), counterclockwise

    def __post_init__(self):
        f = np.asarray(self.faces)
        if f.ndim != 2 or f.shape[1] != 4:
            raise MeshError("faces must be quadrilaterals")
        if f.size and (f.min() < 0 or f.max() >= len(self.vertices)):
            raise MeshError("face references a missing vertex")

    @property
    def edges(self) -> set:
        out = set()
        for face in self.faces:
            for k in range(4):
                a, b = int(face[k]), int(face[(k + 1) % 4])
                out.add((min(a, b), max(a, b)))
        return out

    def counts(self) -> tuple:
        return len(self.vertices), len(self.edges), len(self.faces)


def load_quad_obj(text: str) -> QuadMesh:
    """Parse the ``v`` and ``f`` records of an OBJ file (1-based, ``i/t/n`` allowed)."""
    verts, faces = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        if parts[0] == "v":
            coords = [float(c) for c in parts[1:]]
            if len(coords) not in (2, 3, 4):
                raise MeshError(f"line {lineno}: bad vertex record")
            verts.append(coords[:3])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) for p in parts[1:]]
            if len(idx) != 4:
                raise MeshError(f"line {lineno}: face with {len(idx)} vertices, only quads are supported")
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            faces.append(idx)
    if not verts:
        raise MeshError("no vertices")
    dims = {len(v) for v in verts}
    if len(dims) > 1:
        raise MeshError("mixed vertex dimensions")
    V = np.array(verts, dtype=float)
    if V.shape[1] == 3 and np.all(V[:, 2] == 0.0):
        V = V[:, :2]
    F = np.array(faces, dtype=int).reshape(-1, 4)
    if F.size and (F.min() < 0 or F.max() >= len(V)):
        raise MeshError("face references a missing vertex")
    return QuadMesh(V, F)


def dump_quad_obj(mesh: QuadMesh) -> str:
    lines = []
    for v in mesh.vertices:
        lines.append("v " + " ".join(f"{c:.17g}" for c in v))
    for f in mesh.faces:
        lines.append("f " + " ".join(str(int(i) + 1) for i in f))
    return "\n".join(lines) + "\n"


class HalfEdgeMesh:
    """Half-edges of a quad mesh; half-edge ``4 f + k`` runs from corner ``k`` to ``k+1`` of face ``f``."""

    def __init__(self, mesh: QuadMesh):
        self.mesh = mesh
        F = np.asarray(mesh.faces, dtype=int)
        nf = F.shape[0]
        self.origin = F.ravel().copy()
        self.dest = np.roll(F, -1, axis=1).ravel()
        self.twin = np.full(4 * nf, -1, dtype=int)
        directed = {}
        for h, (a, b) in enumerate(zip(self.origin, self.dest)):
            if a == b:
                raise MeshError(f"degenerate edge in face {h // 4}")
            if (a, b) in directed:
                raise MeshError(f"edge ({a},{b}) used twice in the same direction: "
                                "non-manifold or inconsistently oriented mesh")
            directed[(a, b)] = h
        for (a, b), h in directed.items():
            g = directed.get((b, a))
            if g is not None:
                self.twin[h] = g
        nv = len(mesh.vertices)
        self.valence = np.bincount(self.origin, minlength=nv)
        self.on_boundary = np.zeros(nv, dtype=bool)
        self.on_boundary[self.origin[self.twin < 0]] = True
        self.on_boundary[self.dest[self.twin < 0]] = True
        self.outgoing = [[] for _ in range(nv)]
        for h, a in enumerate(self.origin):
            self.outgoing[a].append(h)

    @property
    def n_faces(self) -> int:
        return self.origin.size // 4

    @staticmethod
    def face(h: int) -> int:
        return h // 4

    @staticmethod
    def next(h: int) -> int:
        return 4 * (h // 4) + (h % 4 + 1) % 4

    def undirected(self, h: int) -> tuple:
        a, b = int(self.origin[h]), int(self.dest[h])
        return (a, b) if a < b else (b, a)


VERTEX_CLASSES = ("regular", "interior_EV", "boundary_EV", "boundary_regular")


def classify_vertices(hm: HalfEdgeMesh) -> list:
    """Class of every vertex; valence counts incident faces."""
    out = []
    for v in range(len(hm.valence)):
        if hm.on_boundary[v]:
            out.append("boundary_EV" if hm.valence[v] >= 3 else "boundary_regular")
        else:
            out.append("interior_EV" if hm.valence[v] != 4 else "regular")
    return out


def trace_interfaces(hm: HalfEdgeMesh, classes=None) -> list:
    """Edge paths (vertex sequences) traced straight from every EV.

    A trace stops at another EV or at a boundary vertex. Paths traced from both
    ends are merged.
    """
    classes = classify_vertices(hm) if classes is None else classes
    is_ev = np.array([c in ("interior_EV", "boundary_EV") for c in classes])
    paths = {}
    for v in np.nonzero(is_ev)[0]:
        for h in hm.outgoing[v]:
            if hm.twin[h] < 0:
                continue
            path = [int(v)]
            seen = set()
            while True:
                path.append(int(hm.dest[h]))
                b = hm.dest[h]
                if is_ev[b] or hm.on_boundary[b] or h in seen:
                    break
                seen.add(h)
                h = hm.next(hm.twin[hm.next(h)])
            paths[min(tuple(path), tuple(reversed(path)))] = True
    return sorted(paths)


def _cut_edges(hm: HalfEdgeMesh, traces) -> set:
    cut = {hm.undirected(h) for h in np.nonzero(hm.twin < 0)[0]}
    for path in traces:
        for a, b in zip(path[:-1], path[1:]):
            cut.add((min(a, b), max(a, b)))
    return cut


def face_groups(hm: HalfEdgeMesh, traces) -> list:
    """Faces connected across edges that are neither boundary nor traced."""
    cut = _cut_edges(hm, traces)
    label = np.full(hm.n_faces, -1, dtype=int)
    groups = []
    for seed in range(hm.n_faces):
        if label[seed] >= 0:
            continue
        label[seed] = len(groups)
        members, queue = [], deque([seed])
        while queue:
            f = queue.popleft()
            members.append(f)
            for h in range(4 * f, 4 * f + 4):
                g = hm.twin[h]
                if g >= 0 and hm.undirected(h) not in cut and label[hm.face(g)] < 0:
                    label[hm.face(g)] = label[seed]
                    queue.append(hm.face(g))
        groups.append(sorted(members))
    return groups


def _grid_of_group(hm: HalfEdgeMesh, group, cut) -> np.ndarray:
    """Vertex index grid ``(m+1, n+1)`` of a structured face group."""
    nxt = hm.next
    members = set(group)
    south = {group[0]: 4 * group[0]}
    pos = {group[0]: (0, 0)}
    queue = deque([group[0]])
    while queue:
        f = queue.popleft()
        s = south[f]
        e, n, w = nxt(s), nxt(nxt(s)), nxt(nxt(nxt(s)))
        i, j = pos[f]
        # (edge crossed, new south half-edge as a function of the twin, offset)
        moves = ((e, lambda t: nxt(t), (1, 0)), (n, lambda t: t, (0, 1)),
                 (w, lambda t: nxt(nxt(nxt(t))), (-1, 0)), (s, lambda t: nxt(nxt(t)), (0, -1)))
        for edge, rot, (di, dj) in moves:
            t = hm.twin[edge]
            if t < 0 or hm.undirected(edge) in cut:
                continue
            g = hm.face(t)
            if g not in members:
                continue
            p = (i + di, j + dj)
            if g in pos:
                if pos[g] != p or south[g] != rot(t):
                    raise MeshError("face group is not a structured grid")
                continue
            pos[g], south[g] = p, rot(t)
            queue.append(g)
    ij = np.array(list(pos.values()))
    ij -= ij.min(axis=0)
    m, n = ij.max(axis=0) + 1
    if m * n != len(group) or len({tuple(x) for x in ij}) != len(group):
        raise MeshError("face group is not a structured grid")
    grid = np.full((m + 1, n + 1), -1, dtype=int)
    for (f, (i0, j0)), (i, j) in zip(pos.items(), ij):
        s = south[f]
        corners = ((i, j, s), (i + 1, j, nxt(s)), (i + 1, j + 1, nxt(nxt(s))), (i, j + 1, nxt(nxt(nxt(s)))))
        for a, b, h in corners:
            v = hm.origin[h]
            if grid[a, b] not in (-1, v):
                raise MeshError("face group is not a structured grid")
            grid[a, b] = v
    return grid


def _bilinear_grid_patch(points: np.ndarray) -> Patch:
    m, n = points.shape[0] - 1, points.shape[1] - 1
    ku = np.concatenate([[0.0], np.linspace(0, 1, m + 1), [1.0]])
    kv = np.concatenate([[0.0], np.linspace(0, 1, n + 1), [1.0]])
    return Patch(TensorBasisSpec(BasisSpec1D(1, ku), BasisSpec1D(1, kv)), points)


def extract_patches(mesh: QuadMesh, traces=None, hm: HalfEdgeMesh | None = None) -> MultiPatch:
    """One bilinear-per-element tensor patch per structured face group."""
    hm = HalfEdgeMesh(mesh) if hm is None else hm
    traces = trace_interfaces(hm) if traces is None else traces
    cut = _cut_edges(hm, traces)
    patches = []
    for group in face_groups(hm, traces):
        grid = _grid_of_group(hm, group, cut)
        patches.append(_bilinear_grid_patch(np.asarray(mesh.vertices)[grid]))
    return detect_topology(patches)


@dataclass
class LayoutSummary:
    patches: int
    interior_evs: int
    boundary_evs: int

    def __str__(self):
        return f"patches={self.patches} iEV={self.interior_evs} bEV={self.boundary_evs}"


def segment(mesh: QuadMesh) -> tuple:
    """Trace and extract in one call; returns ``(MultiPatch, LayoutSummary)``."""
    hm = HalfEdgeMesh(mesh)
    mp = extract_patches(mesh, trace_interfaces(hm), hm)
    return mp, LayoutSummary(len(mp.patches), len(mp.interior_evs()), len(mp.boundary_evs()))


# --- fixtures -------------------------------------------------------------------------

def mesh_from_multipatch(mp: MultiPatch, k: int, tol: float | None = None) -> QuadMesh:
    """Quad mesh of ``k x k`` bilinear elements per patch, with shared vertices merged."""
    from .multipatch import geometry_derivs

    tol = 1e-9 * mp.diameter() if tol is None else tol
    pts, faces = [], []
    offset = 0
    t = np.linspace(0.0, 1.0, k + 1)
    U, V = np.meshgrid(t, t, indexing="ij")
    for patch in mp.patches:
        x = geometry_derivs(patch, U.ravel(), V.ravel(), 0)[(0, 0)]
        pts.append(x)
        idx = offset + np.arange((k + 1) ** 2).reshape(k + 1, k + 1)
        for i in range(k):
            for j in range(k):
                faces.append([idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]])
        offset += (k + 1) ** 2
    P = np.concatenate(pts)
    pairs = cKDTree(P).query_pairs(tol, output_type="ndarray")
    graph = sps.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(P), len(P)))
    _, label = connected_components(graph, directed=False)
    first = np.unique(label, return_index=True)[1]
    return QuadMesh(P[first], label[np.asarray(faces)])


def grid_mesh(m: int, n: int) -> QuadMesh:
    """Regular ``m x n`` quad grid on the unit square."""
    x, y = np.meshgrid(np.linspace(0, 1, m + 1), np.linspace(0, 1, n + 1), indexing="ij")
    V = np.column_stack([x.ravel(), y.ravel()])
    idx = np.arange(V.shape[0]).reshape(m + 1, n + 1)
    F = [[idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]] for i in range(m) for j in range(n)]
    return QuadMesh(V, np.array(F))
