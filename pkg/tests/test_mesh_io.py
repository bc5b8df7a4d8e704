"""
File formats for meshes, operators and vectors.
"""

import numpy as np
import pytest
import scipy.sparse as sp

from utils.mesh_io import read_mesh, read_operator, read_vector, write_mesh, write_operator, write_vector


class TestMeshFiles:
    def test_round_trip_is_bitwise(self, pacman_mesh, tmp_path):
        path = tmp_path / "pacman.mesh"
        write_mesh(pacman_mesh, path)
        reloaded = read_mesh(path)
        assert reloaded.same_as(pacman_mesh)
        assert reloaded.vertices.tobytes() == pacman_mesh.vertices.tobytes()

    def test_round_trip_3d(self, cube_mesh, tmp_path):
        path = tmp_path / "cube.mesh"
        write_mesh(cube_mesh, path)
        assert read_mesh(path).same_as(cube_mesh)

    def test_comments_are_ignored(self, tmp_path):
        path = tmp_path / "triangle.mesh"
        path.write_text("# a single triangle\n2 3 1\n0 0\n1 0  # x axis\n0 1\n0 1 2\n3\n3\n3\n")
        mesh = read_mesh(path)
        assert mesh.n_cells == 1
        assert mesh.markers.tolist() == [3, 3, 3]

    @pytest.mark.parametrize(
        "content,message",
        [
            ("", "missing header"),
            ("2 three 1\n", "bad header"),
            ("4 1 1\n", "dimension"),
            ("2 3 1\n0 0\n1 0\n0 1\n0 1 2\n0\n0\n", "expected"),
            ("2 3 1\n0 0\n1 0\n0 1\n0 1 2\n0\n0\n7\n", "unknown boundary marker"),
            ("2 3 1\n0 0\n1 0\n0 x\n0 1 2\n0\n0\n0\n", "malformed"),
        ],
    )
    def test_malformed_files(self, tmp_path, content, message):
        path = tmp_path / "bad.mesh"
        path.write_text(content)
        with pytest.raises(ValueError, match=message):
            read_mesh(path)

    def test_inverted_cell_rejected(self, tmp_path):
        path = tmp_path / "inverted.mesh"
        path.write_text("2 3 1\n0 0\n1 0\n0 1\n0 2 1\n0\n0\n0\n")
        with pytest.raises(ValueError, match="oriented"):
            read_mesh(path)


class TestOperatorFiles:
    def test_operator_round_trip(self, tmp_path):
        matrix = sp.csr_matrix(np.array([[4.0, -1.0, 0.0], [-1.0, 4.0, 1.0 / 3.0], [0.0, 0.1, 4.0]]))
        path = tmp_path / "a.matrix"
        write_operator(matrix, path)
        assert path.read_text().splitlines()[0] == "3 3 7"
        assert (read_operator(path) != matrix).nnz == 0

    def test_truncated_operator(self, tmp_path):
        path = tmp_path / "a.matrix"
        path.write_text("2 2 2\n0 0 1.0\n")
        with pytest.raises(ValueError, match="triplets"):
            read_operator(path)

    def test_vector_round_trip(self, tmp_path):
        vector = np.array([1.0 / 3.0, -2.5e-17, 1e300])
        path = tmp_path / "x.vec"
        write_vector(vector, path)
        assert np.array_equal(read_vector(path), vector)

    def test_truncated_vector(self, tmp_path):
        path = tmp_path / "x.vec"
        path.write_text("3\n1.0\n")
        with pytest.raises(ValueError):
            read_vector(path)
