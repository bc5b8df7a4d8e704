import math

import numpy as np
import pytest

from tools.meshgen import (
    FICHERA_ANGLE,
    PACMAN_ANGLE,
    GradingSpec,
    _tensor_fichera,
    generate,
    generate_unit_cube,
    generate_unit_square,
    mu_for_angle,
)


def _edge_lengths(mesh):
    e = mesh.edges
    return np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)


class TestGrading:
    def test_mu_for_angle(self):
        assert mu_for_angle(PACMAN_ANGLE) == pytest.approx(5.0 / 9.0)
        assert mu_for_angle(math.pi) == pytest.approx(1.0)
        assert mu_for_angle(FICHERA_ANGLE) == pytest.approx(2.0 / 3.0)

    def test_not_reentrant(self):
        with pytest.raises(ValueError, match="not reentrant"):
            mu_for_angle(math.pi / 2.0)

    @pytest.mark.parametrize("mu", [0.0, -0.5, 1.5])
    def test_mu_out_of_range(self, mu):
        with pytest.raises(ValueError):
            GradingSpec(mu=mu)

    def test_uniform_spec(self):
        assert GradingSpec.pacman(graded=False).mu == 1.0
        assert GradingSpec.fichera().mu == pytest.approx(2.0 / 3.0)


class TestPacman:
    def test_graded_500(self, pacman_mesh):
        assert 375 <= pacman_mesh.n_vertices <= 625
        assert pacman_mesh.aspect_ratios().max() < 10.0
        assert pacman_mesh.metadata["domain"] == "pacman"

        e = pacman_mesh.edges
        lengths = _edge_lengths(pacman_mesh)
        r = np.linalg.norm(pacman_mesh.vertices, axis=1)
        at_corner = lengths[(r[e[:, 0]] == 0.0) | (r[e[:, 1]] == 0.0)].min()
        on_arc = lengths[(r[e[:, 0]] > 0.999) & (r[e[:, 1]] > 0.999)].min()
        assert at_corner / on_arc < 0.05

    def test_uniform_500(self):
        mesh = generate("pacman", 500, graded=False)
        lengths = _edge_lengths(mesh)
        assert lengths.max() / lengths.min() < 5.0

    def test_area(self, pacman_mesh):
        # Polygonal approximation of 9/10 of the unit disk.
        assert pacman_mesh.cell_measures().sum() == pytest.approx(0.9 * math.pi, rel=0.02)

    def test_target_too_small(self):
        with pytest.raises(ValueError, match="too small"):
            generate("pacman", 10)

    def test_unknown_domain(self):
        with pytest.raises(ValueError, match="Unsupported domain"):
            generate("lshape", 500)


class TestFichera:
    def test_uniform_two_cells_per_octant(self):
        mesh = _tensor_fichera(np.linspace(-1.0, 1.0, 5))
        assert mesh.n_cells == 336
        assert mesh.n_vertices == 125 - 8

    def test_graded_mesh(self, fichera_mesh):
        v = fichera_mesh.vertices
        assert not np.any((v > 0).all(axis=1))
        assert fichera_mesh.cell_measures().sum() == pytest.approx(7.0)
        assert fichera_mesh.aspect_ratios().max() < 25.0
        assert fichera_mesh.metadata["domain"] == "fichera"

    def test_grading_toward_reentrant_edges(self, fichera_mesh):
        lengths = _edge_lengths(fichera_mesh)
        e = fichera_mesh.edges
        v = fichera_mesh.vertices
        at_origin = np.flatnonzero(np.all(v == 0.0, axis=1))[0]
        at_far_corner = np.flatnonzero(np.all(v == -1.0, axis=1))[0]
        near = lengths[(e[:, 0] == at_origin) | (e[:, 1] == at_origin)].min()
        far = lengths[(e[:, 0] == at_far_corner) | (e[:, 1] == at_far_corner)].min()
        assert near < 0.6 * far

    def test_infeasible_target(self):
        # Tensor grids give 316 or 665 vertices around this target.
        with pytest.raises(ValueError, match="infeasible target for fichera"):
            generate("fichera", 500)


class TestControlMeshes:
    def test_unit_square(self):
        mesh = generate_unit_square(3)
        assert mesh.n_vertices == 16
        assert mesh.n_cells == 18
        assert mesh.cell_measures().sum() == pytest.approx(1.0)

    def test_unit_cube(self, cube_mesh):
        assert cube_mesh.n_cells == 48
        assert cube_mesh.cell_measures().sum() == pytest.approx(1.0)

    def test_bad_resolution(self):
        with pytest.raises(ValueError):
            generate_unit_cube(0)
