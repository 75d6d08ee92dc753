import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biotprec import mesh as M


def test_square_counts():
    m = M.build_structured_square(1)
    assert (m.n_elements, m.n_vertices, m.n_facets) == (2, 4, 5)
    m = M.build_structured_square(2)
    assert (m.n_elements, m.n_vertices, m.n_facets) == (8, 9, 16)
    assert m.n_vertices - m.n_facets + m.n_elements == 1


@pytest.mark.parametrize("N", [1, 3, 8])
def test_square_areas_and_h(N):
    m = M.build_structured_square(N)
    assert m.n_elements == 2 * N * N
    assert np.allclose(m.volumes, 1.0 / (2 * N * N), rtol=0, atol=1e-15)
    assert m.h == 1.0 / N


def test_square_diagonal_direction():
    m = M.build_structured_square(1)
    diag = {tuple(f) for f in m.facets.tolist()} & {(0, 3), (1, 2)}
    assert diag == {(0, 3)}


def test_cube_counts_and_volume():
    m = M.build_structured_cube(1)
    assert (m.n_elements, m.n_vertices) == (6, 8)
    m = M.build_structured_cube(3)
    assert m.n_elements == 6 * 27
    assert abs(m.volumes.sum() - 1.0) < 1e-14
    assert np.all(m.volumes > 0)


def test_zero_cells_rejected():
    with pytest.raises(ValueError):
        M.build_structured_square(0)
    with pytest.raises(ValueError):
        M.build_structured_cube(0)


@pytest.mark.parametrize("build,N", [(M.build_structured_square, 4), (M.build_structured_cube, 2)])
def test_facet_incidence_and_signs(build, N):
    m = build(N)
    fe = m.facet_elements()
    interior = fe[:, 1] >= 0
    assert np.array_equal(np.flatnonzero(~interior), m.boundary_facets)
    sign_sum = np.zeros(m.n_facets)
    np.add.at(sign_sum, m.elem_facets.ravel(), m.elem_signs.ravel())
    assert np.all(sign_sum[interior] == 0)
    assert np.all(np.abs(sign_sum[~interior]) == 1)
    counts = np.bincount(m.elem_facets.ravel(), minlength=m.n_facets)
    assert set(counts.tolist()) == {1, 2}


@pytest.mark.parametrize("build,N", [(M.build_structured_square, 3), (M.build_structured_cube, 2)])
def test_signs_are_outward(build, N):
    m = build(N)
    opp = m.vertices[m.elements]
    fc = m.facet_centroids()[m.elem_facets]
    n = m.facet_normals[m.elem_facets] * m.elem_signs[..., None]
    assert np.all(np.einsum("eid,eid->ei", fc - opp, n) > 0)


def test_facet_canonical_order():
    m = M.build_structured_cube(2)
    assert np.all(np.diff(m.facets, axis=1) > 0)


def test_facet_opposite_vertex():
    m = M.build_structured_square(2)
    for e in range(m.n_elements):
        for i in range(3):
            assert m.elements[e, i] not in m.facets[m.elem_facets[e, i]]


def test_shape_regularity_constant():
    r2 = [M.build_structured_square(N).shape_regularity() for N in (2, 4, 8)]
    r3 = [M.build_structured_cube(N).shape_regularity() for N in (1, 2, 4)]
    assert np.ptp(r2) < 1e-10 and np.ptp(r3) < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 12))
def test_square_volume_property(N):
    assert abs(M.build_structured_square(N).volumes.sum() - 1.0) < 1e-13


def test_mandel_tags():
    m = M.build_structured_square(2)
    tags = M.classify_boundary(m, "mandel2d")
    for lab in (M.SYMMETRY_X, M.SYMMETRY_Y, M.TRACTION, M.RIGID_PLATE):
        assert len(tags.facets_with(lab)) == 2
    assert sorted(tags.labels) == sorted(m.boundary_facets.tolist())
    tags = M.classify_boundary(m, "mandel2d", plate="traction")
    assert len(tags.facets_with(M.LOADED_NOFLUX)) == 2


def test_footing_tags():
    m = M.build_structured_cube(4)
    tags = M.classify_boundary(m, "footing3d")
    assert sorted(tags.labels) == sorted(m.boundary_facets.tolist())
    patch = tags.facets_with(M.LOADED)
    c = m.facet_centroids()[patch]
    assert np.allclose(c[:, 2], 1.0)
    assert np.all(np.abs(c[:, :2] - 0.5) <= 0.25)
    assert abs(m.facet_areas[patch].sum() - 0.25) < 1e-14
    base = tags.facets_with(M.CLAMPED)
    assert abs(m.facet_areas[base].sum() - 1.0) < 1e-14


def test_classify_errors():
    with pytest.raises(ValueError):
        M.classify_boundary(M.build_structured_square(2), "footing3d")
    with pytest.raises(ValueError):
        M.classify_boundary(M.build_structured_square(2), "cantilever")


def test_mesh_from_arrays_reorients():
    elems = np.array([[0, 2, 1]])
    m = M.mesh_from_arrays(2, [[0, 0], [1, 0], [0, 1]], elems)
    assert m.volumes[0] == pytest.approx(0.5)
    assert elems.tolist() == [[0, 2, 1]]


def test_dump(tmp_path):
    m = M.build_structured_square(2)
    tags = M.classify_boundary(m, "mandel2d")
    p = tmp_path / "m.txt"
    m.dump(p, tags)
    lines = p.read_text().splitlines()
    assert lines[0] == "dim 2" and lines[1] == "vertices 9"
    assert sum(ln.endswith("interior") for ln in lines) == m.n_facets - len(m.boundary_facets)
