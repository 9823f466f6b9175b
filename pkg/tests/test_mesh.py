import numpy as np
import pytest

from metawave.mesh import Mesh, build_structured, unit_square


def test_single_square():
    m = unit_square(1)
    assert (m.n_cells, m.n_vertices, m.n_edges) == (2, 4, 5)


@pytest.mark.parametrize("N", [1, 2, 5, 8])
def test_counts_and_euler(N):
    m = unit_square(N)
    assert m.n_cells == 2 * N * N
    assert m.n_vertices == (N + 1) ** 2
    assert m.n_vertices - m.n_edges + m.n_cells == 1
    assert m.h_max == pytest.approx(np.sqrt(2) / N)


def test_area_sum_and_orientation():
    m = build_structured((0.0, 2.0, -1.0, 0.5), 7)
    assert np.all(m.signed_areas() > 0)
    assert m.signed_areas().sum() == pytest.approx(3.0, rel=1e-14)


def test_edge_sharing_and_opposite_signs():
    m = unit_square(6)
    interior = m.interior_edges
    assert np.all(m.edge_cells[interior] >= 0)
    assert np.all(m.edge_cells[m.boundary_edges, 1] == -1)
    assert len(m.boundary_edges) == 4 * 6
    for e in interior:
        c0, c1 = m.edge_cells[e]
        s0 = m.cell_edge_signs[c0][m.cell_edges[c0] == e][0]
        s1 = m.cell_edge_signs[c1][m.cell_edges[c1] == e][0]
        assert s0 == -s1


def test_edges_sorted_low_to_high():
    m = unit_square(4)
    assert np.all(m.edges[:, 0] < m.edges[:, 1])


def test_local_edge_opposite_vertex():
    m = unit_square(3)
    for c in range(m.n_cells):
        for e in range(3):
            verts = set(m.edges[m.cell_edges[c, e]])
            assert m.cells[c, e] not in verts


def test_diagonal_lower_left_to_upper_right():
    m = unit_square(1)
    diag = [tuple(e) for e in m.edges.tolist()]
    # vertices: 0=(0,0), 1=(1,0), 2=(0,1), 3=(1,1)
    assert (0, 3) in diag and (1, 2) not in diag


def test_nonpositive_N_rejected():
    for N in (0, -3):
        with pytest.raises(ValueError):
            unit_square(N)


def test_clockwise_cell_rejected():
    with pytest.raises(ValueError):
        Mesh([[0, 0], [1, 0], [0, 1]], [[0, 2, 1]])


def test_mesh_is_immutable():
    m = unit_square(2)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0


def test_boundary_all_dirichlet():
    m = unit_square(2).classify_boundary([("D", lambda x, y: True)])
    assert len(m.edges_with_label("D")) == 8


def test_boundary_left_source_count():
    m = build_structured((0, 2, 0, 2), 50)
    m = m.classify_boundary([
        ("source", lambda x, y: abs(x) < 1e-12),
        ("zero", lambda x, y: abs(x - 2) < 1e-12 or abs(y) < 1e-12 or abs(y - 2) < 1e-12),
    ])
    assert len(m.edges_with_label("source")) == 50
    assert len(m.edges_with_label("zero")) == 150


def test_boundary_empty_parts_rejected():
    with pytest.raises(ValueError, match="uncovered"):
        unit_square(2).classify_boundary([])


def test_boundary_double_cover_rejected():
    with pytest.raises(ValueError, match="covered by"):
        unit_square(2).classify_boundary([("a", lambda x, y: True), ("b", lambda x, y: x < 0.1)])


def test_slab_region_resolved():
    m = build_structured((0, 2, 0, 2), 50)
    labels = m.cell_regions({"NIM": (0.6, 0.8, 0.0, 2.0)})
    verts = m.vertices[m.cells]
    inside = np.all((verts[..., 0] >= 0.6 - 1e-12) & (verts[..., 0] <= 0.8 + 1e-12), axis=1)
    assert m.n_cells == 5000
    assert np.array_equal(labels == "NIM", inside)
    assert np.sum(labels == "NIM") == 2 * 5 * 50


def test_unresolved_region_rejected():
    with pytest.raises(ValueError, match="cuts"):
        unit_square(4).cell_regions({"NIM": (0.3, 0.6, 0.0, 1.0)})


def test_find_cell_and_map_points():
    m = unit_square(4)
    c = m.find_cell([0.3, 0.8])
    x = m.map_points(np.array([[1 / 3, 1 / 3]]))[c, 0]
    assert np.allclose(x, m.centroids()[c])
    assert m.find_cell([1.5, 0.5]) == -1


def test_dump(tmp_path):
    m = unit_square(1)
    path = tmp_path / "mesh.txt"
    m.dump(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "4 2"
    assert len(lines) == 1 + 4 + 2
