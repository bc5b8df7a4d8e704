import numpy as np
import pytest

from tools.interp import build_prolongation, locate_brute_force, locate_by_bfs
from tools.mesh import SimplicialMesh


def _linear(points):
    return 0.5 + 2.0 * points[:, 0] - 3.0 * points[:, 1]


@pytest.fixture(scope="module")
def pacman_pair(pacman_hierarchy):
    return pacman_hierarchy.levels[-2], pacman_hierarchy.levels[-1]


class TestLocateByBfs:
    def test_barycenter_of_start_cell(self, square_mesh):
        x = square_mesh.barycenters()[5]
        result = locate_by_bfs(square_mesh, 5, x)
        assert (result.cell, result.inside, result.steps) == (5, True, 1)

    def test_matches_brute_force(self, square_mesh):
        points = np.array([[0.1, 0.7], [0.9, 0.05], [0.55, 0.45]])
        reference = locate_brute_force(square_mesh, points)
        for x, cell in zip(points, reference.cells):
            result = locate_by_bfs(square_mesh, 0, x, radius=10.0)
            assert result.inside
            assert result.cell == cell

    def test_outside_point_is_projected(self, square_mesh):
        result = locate_by_bfs(square_mesh, 0, np.array([-0.1, 0.1]))
        assert not result.inside
        assert square_mesh.vertices[square_mesh.cells[result.cell]][:, 0].min() == 0.0

    def test_bad_start_cell(self, square_mesh):
        with pytest.raises(ValueError):
            locate_by_bfs(square_mesh, square_mesh.n_cells, np.array([0.5, 0.5]))


class TestBuildProlongation:
    def test_identical_meshes_give_identity(self, square_mesh):
        op = build_prolongation(square_mesh, square_mesh)
        assert np.array_equal(op.matrix.toarray(), np.eye(square_mesh.n_vertices))

    def test_barycenter_weights(self, reference_triangle):
        vertices = np.vstack([reference_triangle.vertices, [[1.0 / 3.0, 1.0 / 3.0]]])
        fine = SimplicialMesh(vertices, np.array([[0, 1, 3], [1, 2, 3], [2, 0, 3]]))
        op = build_prolongation(fine, reference_triangle)
        assert op.matrix.toarray()[3] == pytest.approx([1.0 / 3.0] * 3, abs=1e-14)
        assert op.matrix.toarray()[:3] == pytest.approx(np.eye(3))

    def test_nested_squares_reproduce_linears(self, fine_square_mesh, square_mesh):
        op = build_prolongation(fine_square_mesh, square_mesh)
        assert op.inside.all()
        values = op.prolongate(_linear(square_mesh.vertices))
        assert np.abs(values - _linear(fine_square_mesh.vertices)).max() <= 1e-10

    def test_traversal_matches_brute_force(self, pacman_pair):
        fine, coarse = pacman_pair
        op = build_prolongation(fine, coarse)
        reference = build_prolongation(fine, coarse, brute_force=True)
        assert abs(op.matrix - reference.matrix).max() <= 1e-12

    def test_partition_of_unity(self, pacman_pair):
        fine, coarse = pacman_pair
        op = build_prolongation(fine, coarse)
        assert np.allclose(op.matrix.sum(axis=1), 1.0, atol=1e-12)
        assert op.matrix.min() >= -1e-12
        assert op.matrix.max() <= 1.0 + 1e-12

    def test_linear_reproduction_inside(self, pacman_pair):
        fine, coarse = pacman_pair
        op = build_prolongation(fine, coarse)
        values = op.prolongate(_linear(coarse.vertices))
        error = np.abs(values - _linear(fine.vertices))[op.inside]
        assert error.max() <= 1e-10

    def test_nested_squares_locate_in_one_step(self, fine_square_mesh, square_mesh):
        op = build_prolongation(fine_square_mesh, square_mesh)
        assert (op.cell_index.steps == 1).all()

    def test_search_steps_stay_local(self, pacman_pair):
        fine, coarse = pacman_pair
        op = build_prolongation(fine, coarse)
        assert op.cell_index is not None
        assert op.cell_index.steps.mean() <= 3.0
        assert np.percentile(op.cell_index.steps, 99) <= 12


class TestTransfer:
    def test_restrict_is_transpose(self, fine_square_mesh, square_mesh):
        op = build_prolongation(fine_square_mesh, square_mesh)
        w = np.linspace(0.0, 1.0, fine_square_mesh.n_vertices)
        assert np.allclose(op.restrict(w), op.matrix.T @ w)

    def test_restrict_prolongate_positive(self, fine_square_mesh, square_mesh):
        op = build_prolongation(fine_square_mesh, square_mesh)
        for j in (0, 7, 12):
            e = np.zeros(square_mesh.n_vertices)
            e[j] = 1.0
            assert op.restrict(op.prolongate(e))[j] > 0.0

    def test_length_mismatch(self, fine_square_mesh, square_mesh):
        op = build_prolongation(fine_square_mesh, square_mesh)
        with pytest.raises(ValueError):
            op.prolongate(np.zeros(fine_square_mesh.n_vertices))
        with pytest.raises(ValueError):
            op.restrict(np.zeros(square_mesh.n_vertices))
