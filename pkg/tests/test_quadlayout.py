import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpiga import multipatch, quadlayout
from mpiga.quadlayout import HalfEdgeMesh, MeshError


def fig_mesh(k):
    return quadlayout.mesh_from_multipatch(multipatch.make_fig_domain(), k)


@pytest.mark.parametrize("k, counts", [(1, (12, 17, 6)), (2, (35, 58, 24)), (4, (117, 212, 96))])
def test_fig_mesh_counts(k, counts):
    # vertices, edges and faces follow from Euler's formula V - E + F = 1
    assert fig_mesh(k).counts() == counts


def test_vertex_classes_of_fig_mesh():
    hm = HalfEdgeMesh(fig_mesh(2))
    classes = quadlayout.classify_vertices(hm)
    ev = [v for v, c in enumerate(classes) if c == "interior_EV"]
    assert sorted(hm.valence[ev]) == [3, 5]
    assert "boundary_EV" not in classes


@pytest.mark.parametrize("k", [2, 4, 8])
def test_fig_roundtrip_exact_partition(k):
    mesh = fig_mesh(k)
    hm = HalfEdgeMesh(mesh)
    groups = quadlayout.face_groups(hm, quadlayout.trace_interfaces(hm))
    # faces were generated patch by patch, k*k at a time
    expected = {tuple(range(i * k * k, (i + 1) * k * k)) for i in range(6)}
    assert {tuple(g) for g in groups} == expected
    mp, summary = quadlayout.segment(mesh)
    assert str(summary) == "patches=6 iEV=2 bEV=0"
    assert sorted(v.valence for v in mp.interior_evs()) == [3, 5]
    assert all(p.basis.shape == (k + 1, k + 1) for p in mp.patches)


def test_traces_connect_evs_and_boundary():
    hm = HalfEdgeMesh(fig_mesh(2))
    traces = quadlayout.trace_interfaces(hm)
    classes = quadlayout.classify_vertices(hm)
    for path in traces:
        for end in (path[0], path[-1]):
            assert classes[end] == "interior_EV" or hm.on_boundary[end]
        for mid in path[1:-1]:
            assert classes[mid] == "regular"
    # 3 + 5 spokes, one of which joins the two EVs
    assert len(traces) == 7


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 9), st.integers(1, 9))
def test_regular_grid_is_one_patch(m, n):
    mp, summary = quadlayout.segment(quadlayout.grid_mesh(m, n))
    assert str(summary) == "patches=1 iEV=0 bEV=0"
    assert mp.patches[0].basis.shape in ((m + 1, n + 1), (n + 1, m + 1))


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([1, 2, 3]), st.integers(0, 2**32 - 1))
def test_segmentation_ignores_labelling(k, seed):
    # relabel vertices, shuffle faces and rotate each face's corner list
    rng = np.random.default_rng(seed)
    mesh = fig_mesh(k)
    perm = rng.permutation(len(mesh.vertices))
    inv = np.argsort(perm)
    faces = perm[mesh.faces][rng.permutation(len(mesh.faces))]
    faces = np.array([np.roll(f, s) for f, s in zip(faces, rng.integers(0, 4, len(faces)))])
    shuffled = quadlayout.QuadMesh(mesh.vertices[inv], faces)
    hm = HalfEdgeMesh(shuffled)
    groups = quadlayout.face_groups(hm, quadlayout.trace_interfaces(hm))
    assert sorted(len(g) for g in groups) == [k * k] * 6
    assert sorted(f for g in groups for f in g) == list(range(len(faces)))


def test_obj_roundtrip_and_indices():
    text = """# two quads
v 0 0 0
v 1 0 0
v 2 0 0
v 0 1 0
v 1 1 0
v 2 1 0
f 1/1/1 2/2/2 5/5/5 4/4/4
f -4 -3 -0 -1
"""
    with pytest.raises(MeshError):
        quadlayout.load_quad_obj(text)  # index 0 is invalid
    mesh = quadlayout.load_quad_obj(text.replace("f -4 -3 -0 -1", "f -5 -4 -1 -2"))
    assert mesh.vertices.shape == (6, 2)
    assert mesh.faces.tolist() == [[0, 1, 4, 3], [1, 2, 5, 4]]
    again = quadlayout.load_quad_obj(quadlayout.dump_quad_obj(mesh))
    assert np.array_equal(again.faces, mesh.faces) and np.array_equal(again.vertices, mesh.vertices)
    mp, summary = quadlayout.segment(mesh)
    assert summary.patches == 1


@pytest.mark.parametrize("text", [
    "v 0 0\nv 1 0\nv 1 1\nf 1 2 3\n",                    # triangle
    "f 1 2 3 4\n",                                       # no vertices
    "v 0 0\nv 1 0\nv 1 1\nv 0 1\nf 1 2 3 9\n",           # missing vertex
    "v 0 0\nv 1 0 0\n",                                  # mixed dimensions
])
def test_malformed_obj(text):
    with pytest.raises(MeshError):
        quadlayout.load_quad_obj(text)


def test_inconsistent_orientation_rejected():
    V = np.array([[0, 0], [1, 0], [2, 0], [0, 1], [1, 1], [2, 1]], dtype=float)
    F = np.array([[0, 1, 4, 3], [1, 4, 5, 2]])  # second face clockwise
    with pytest.raises(MeshError):
        HalfEdgeMesh(quadlayout.QuadMesh(V, F))


def test_paraboloid_surface_mesh():
    mesh = quadlayout.mesh_from_multipatch(multipatch.make_paraboloid("elliptic"), 3)
    assert mesh.vertices.shape[1] == 3
    _, summary = quadlayout.segment(mesh)
    assert str(summary) == "patches=6 iEV=2 bEV=0"
