"""
Testing `mesh.py` (triangulations of the cavity and the step channel).

Tests include:
- Vertex/triangle counts and areas of the unit square mesh.
- Lid/wall tagging and rejection of n=0.
- Alfeld split counts, area preservation and tag preservation.
- Step channel counts, tagging of the step faces and graded variant size.
- Validity checks (hanging nodes, inverted triangles) and determinism.
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from ahflow.exceptions import ConfigurationError, MeshError
from ahflow.mesh import (BoundaryTag, Mesh, alfeld_split, build_step_channel_mesh,
                         build_unit_square_mesh, export_mesh_vtk)


def _boundary_midpoints(mesh, tag):
    edges = mesh.boundary_edges
    edges = edges[mesh.edge_tags[edges] == tag]
    return mesh.points[mesh.edges[edges]].mean(axis=1)


@pytest.mark.parametrize("n, n_points, n_triangles", [(1, 4, 2), (2, 9, 8), (32, 1089, 2048)])
def test_unit_square_counts(n, n_points, n_triangles):
    mesh = build_unit_square_mesh(n)
    assert mesh.n_points == n_points
    assert mesh.n_triangles == n_triangles


def test_unit_square_areas():
    mesh = build_unit_square_mesh(2)
    assert_allclose(mesh.signed_areas(), 1.0 / 8.0, rtol=1e-14)
    assert_allclose(mesh.signed_areas().sum(), 1.0, rtol=1e-14)


def test_unit_square_tags():
    mesh = build_unit_square_mesh(4)
    lid = _boundary_midpoints(mesh, BoundaryTag.LID)
    wall = _boundary_midpoints(mesh, BoundaryTag.WALL)
    assert len(lid) == 4
    assert len(wall) == 12
    assert_allclose(lid[:, 1], 1.0)
    assert np.all(wall[:, 1] < 1.0)
    # Interior edges carry no boundary tag.
    interior = mesh.edge_triangles[:, 1] >= 0
    assert np.all(mesh.edge_tags[interior] == BoundaryTag.INTERIOR)


def test_unit_square_rejects_zero():
    with pytest.raises(ConfigurationError):
        build_unit_square_mesh(0)


def test_lid_corners_take_lid_tag():
    mesh = build_unit_square_mesh(2)
    tags = mesh.vertex_tags
    corners = [i for i in range(mesh.n_points)
               if mesh.point(i).y == 1.0 and mesh.point(i).x in (0.0, 1.0)]
    assert len(corners) == 2
    assert all(tags[i] == BoundaryTag.LID for i in corners)


def test_point_and_triangle_accessors():
    mesh = build_unit_square_mesh(1)
    assert mesh.point(3) == (1.0, 1.0)
    assert mesh.triangle(0).vertex_ids == (0, 1, 3)
    table = mesh.edge_table()
    assert table[(0, 3)][0] == BoundaryTag.INTERIOR
    assert len(table[(0, 3)][1]) == 2


def test_alfeld_split_small():
    split = alfeld_split(build_unit_square_mesh(1))
    assert split.n_triangles == 6
    assert split.n_points == 6
    assert split.alfeld


def test_alfeld_split_preserves_area_and_tags():
    mesh = build_unit_square_mesh(32)
    split = alfeld_split(mesh)
    assert split.n_triangles == 6144
    assert_allclose(split.signed_areas().sum(), mesh.signed_areas().sum(), rtol=1e-14)
    for tag in (BoundaryTag.LID, BoundaryTag.WALL):
        assert len(_boundary_midpoints(split, tag)) == len(_boundary_midpoints(mesh, tag))
    split.validate()


def test_step_channel_counts_and_tags():
    mesh = build_step_channel_mesh(1.0)
    assert mesh.n_triangles == 798
    inflow = _boundary_midpoints(mesh, BoundaryTag.INFLOW)
    outflow = _boundary_midpoints(mesh, BoundaryTag.OUTFLOW)
    assert_allclose(inflow[:, 0], 0.0)
    assert_allclose(outflow[:, 0], 40.0)
    assert len(inflow) == 10 and len(outflow) == 10

    wall = _boundary_midpoints(mesh, BoundaryTag.WALL)
    on_step = ((np.isclose(wall[:, 0], 5.0) & (wall[:, 1] < 1.0))
               | (np.isclose(wall[:, 0], 6.0) & (wall[:, 1] < 1.0))
               | (np.isclose(wall[:, 1], 1.0) & (wall[:, 0] > 5.0) & (wall[:, 0] < 6.0)))
    assert on_step.sum() == 3


def test_step_channel_rejects_step_mismatch():
    with pytest.raises(ConfigurationError):
        build_step_channel_mesh(0.3)
    with pytest.raises(ConfigurationError):
        build_step_channel_mesh(0.5, outflow_h=0.7, fine_length=25.0)


def test_graded_step_channel_dof_count():
    split = alfeld_split(build_step_channel_mesh(0.5, outflow_h=1.0, fine_length=25.0))
    velocity_dofs = 2 * (split.n_points + split.n_edges)
    assert abs(velocity_dofs - 32682) <= 0.15 * 32682


def test_generation_is_deterministic():
    first = build_step_channel_mesh(1.0)
    second = build_step_channel_mesh(1.0)
    assert np.array_equal(first.points, second.points)
    assert np.array_equal(first.triangles, second.triangles)
    assert np.array_equal(first.edge_tags, second.edge_tags)


def test_validate_rejects_inverted_triangle():
    points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(MeshError):
        Mesh.from_triangles(points, np.array([[0, 2, 1]]),
                            lambda edges, mids: np.full(len(edges), BoundaryTag.WALL))


def test_validate_rejects_hanging_node():
    # Edge (1, 2) of the added triangle passes through vertex 3.
    points = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [1.0, 0.5], [0.0, 1.0]])
    triangles = np.array([[0, 1, 3], [0, 3, 2], [0, 2, 4]])
    mesh = Mesh.from_triangles(points, triangles,
                               lambda edges, mids: np.full(len(edges), BoundaryTag.WALL))
    assert mesh.n_triangles == 3
    with pytest.raises(MeshError):
        Mesh.from_triangles(np.vstack([points, [[2.0, 0.5]]]),
                            np.vstack([triangles, [[1, 5, 2]]]),
                            lambda edges, mids: np.full(len(edges), BoundaryTag.WALL))


def test_export_mesh_vtk(tmp_path):
    mesh = build_unit_square_mesh(2)
    path = export_mesh_vtk(mesh, tmp_path / "mesh.vtk")
    text = path.read_text()
    assert "POINTS 9 double" in text
    assert "CELLS 8 32" in text


if __name__ == "__main__":
    pytest.main([__file__])
