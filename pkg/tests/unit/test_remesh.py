import numpy as np
import pytest

from tools.coarsen import staged_coarsen
from tools.contraction_remesher import ContractionRemesher
from tools.delaunay_remesher import DelaunayRemesher, link_ring
from tools.mesh import SimplicialMesh
from tools.remesh_base import RemeshConfig, WorkingMesh, contraction_candidates
from tools.remesh_factory import RemesherFactory, remesh, remesh_with_report
from utils import geometry


def _is_delaunay(mesh: SimplicialMesh, tol: float = 1e-9) -> bool:
    for cell in mesh.cells:
        a, b, c = mesh.vertices[cell]
        for q in range(mesh.n_vertices):
            if q in cell:
                continue
            if geometry.incircle(a, b, c, mesh.vertices[q]) > tol:
                return False
    return True


class TestDelaunayRemoval:
    def test_hexagon_center(self, hexagon_mesh):
        coarse = remesh(hexagon_mesh, range(1, 7))
        assert coarse.n_vertices == 6
        assert coarse.n_cells == 4
        assert geometry.is_positively_oriented(coarse.cell_points()).all()
        assert _is_delaunay(coarse)
        assert coarse.cell_measures().sum() == pytest.approx(hexagon_mesh.cell_measures().sum())

    def test_degree_three_vertex(self):
        vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.25, 0.25]])
        mesh = SimplicialMesh(vertices, np.array([[0, 1, 3], [1, 2, 3], [2, 0, 3]]))
        coarse, report = remesh_with_report(mesh, [0, 1, 2])
        assert coarse.n_cells == 1
        assert coarse.cell_measures()[0] == pytest.approx(0.5)
        assert report.delaunay_removals == 1
        assert report.flips == 0

    def test_link_ring_is_counter_clockwise(self, hexagon_mesh):
        ring = link_ring(WorkingMesh(hexagon_mesh), 0)
        assert ring == [1, 2, 3, 4, 5, 6]

    def test_link_ring_of_boundary_vertex(self, hexagon_mesh):
        assert link_ring(WorkingMesh(hexagon_mesh), 1) is None

    def test_pacman_level_stays_delaunay_like(self, pacman_mesh):
        keep = staged_coarsen(pacman_mesh, 1.5)
        coarse, report = remesh_with_report(pacman_mesh, keep)
        assert geometry.is_positively_oriented(coarse.cell_points()).all()
        assert coarse.aspect_ratios().max() <= 10.0
        assert report.removed + len(report.retained) == pacman_mesh.n_vertices - len(keep)


class TestRemeshDriver:
    def test_keep_everything_is_identity(self, square_mesh):
        coarse = remesh(square_mesh, range(square_mesh.n_vertices))
        assert coarse.same_as(square_mesh)
        assert coarse.metadata["remesh_report"].removed == 0

    def test_structured_two_to_one(self, fine_square_mesh):
        keep = [i * 9 + j for i in range(0, 9, 2) for j in range(0, 9, 2)]
        coarse = remesh(fine_square_mesh, keep)
        ratio = fine_square_mesh.n_cells / coarse.n_cells
        assert 3.5 <= ratio <= 4.5
        assert coarse.cell_measures().sum() == pytest.approx(1.0)

    def test_corner_removal_rejected(self, square_mesh):
        with pytest.raises(ValueError, match="corner"):
            remesh(square_mesh, range(1, square_mesh.n_vertices))

    def test_node_nesting(self, pacman_mesh):
        coarse = remesh(pacman_mesh, staged_coarsen(pacman_mesh, 1.5))
        assert np.array_equal(coarse.vertices, pacman_mesh.vertices[coarse.parent_index])
        assert np.array_equal(coarse.markers, pacman_mesh.markers[coarse.parent_index])

    def test_report_lists_every_scheduled_vertex(self, square_mesh):
        keep = staged_coarsen(square_mesh, 1.5)
        _, report = remesh_with_report(square_mesh, keep)
        assert report.removed + len(report.retained) == square_mesh.n_vertices - len(keep)
        assert report.attempts >= report.removed


class TestContraction:
    def test_cube_to_corners(self, cube_mesh):
        keep = staged_coarsen(cube_mesh, 1.8)
        coarse, report = remesh_with_report(cube_mesh, keep)
        assert coarse.n_vertices < cube_mesh.n_vertices
        assert geometry.is_positively_oriented(coarse.cell_points()).all()
        assert coarse.cell_measures().sum() == pytest.approx(1.0)
        assert report.contractions == report.removed

    def test_fichera_level(self, fichera_mesh):
        config = RemeshConfig()
        keep = staged_coarsen(fichera_mesh, 1.8)
        coarse = remesh(fichera_mesh, keep, config)
        assert coarse.n_vertices < fichera_mesh.n_vertices
        assert geometry.is_positively_oriented(coarse.cell_points()).all()
        assert coarse.aspect_ratios().max() < config.c_ar_3d
        assert coarse.cell_measures().sum() == pytest.approx(7.0)

    def test_candidates_follow_features(self, square_mesh):
        working = WorkingMesh(square_mesh)
        assert contraction_candidates(working, 0) == []
        assert contraction_candidates(working, 1) == [0, 2]
        assert contraction_candidates(working, 12) == sorted(square_mesh.vertex_neighbors(12).tolist())


class TestRemesherFactory:
    def test_dimension_dispatch(self):
        assert isinstance(RemesherFactory.create_remesher(2), DelaunayRemesher)
        assert isinstance(RemesherFactory.create_remesher(3), ContractionRemesher)
        assert RemesherFactory.get_supported_dimensions() == [2, 3]

    def test_unsupported_dimension(self):
        with pytest.raises(ValueError, match="Unsupported mesh dimension"):
            RemesherFactory.create_remesher(4)

    def test_register_requires_base_class(self):
        with pytest.raises(ValueError):
            RemesherFactory.register_remesher(4, dict)

    def test_config_rejects_caps_below_minimum(self):
        with pytest.raises(ValueError):
            RemeshConfig(c_ar_2d=1.5)
        with pytest.raises(ValueError):
            RemeshConfig(c_ar_3d=4.0)
