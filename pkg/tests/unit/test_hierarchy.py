from unittest.mock import patch

import numpy as np
import pytest

from tools.coarsen import staged_coarsen
from tools.hierarchy import CoarseningError, MeshHierarchy, build_hierarchy, overlap_metrics
from tools.mesh import VertexKind
from utils import geometry


def _brute_force_overlap(fine, coarse) -> int:
    fine_pts = fine.cell_points()
    return max(
        int(geometry.simplices_intersect(tau, fine_pts).sum())
        for tau in coarse.cell_points()
    )


class TestOverlapMetrics:
    def test_identical_meshes(self, square_mesh):
        metrics = overlap_metrics(square_mesh, square_mesh, threads=1)
        assert metrics.max_lengthscale_ratio == pytest.approx(1.0)
        assert metrics.max_overlap == 13
        assert metrics.unlocated == 0

    def test_threads_do_not_change_result(self, fine_square_mesh):
        one = overlap_metrics(fine_square_mesh, fine_square_mesh, threads=1)
        four = overlap_metrics(fine_square_mesh, fine_square_mesh, threads=4)
        assert one == four

    def test_matches_brute_force(self, pacman_hierarchy):
        fine, coarse = pacman_hierarchy.levels[-2], pacman_hierarchy.levels[-1]
        metrics = overlap_metrics(fine, coarse, threads=1)
        assert metrics.max_overlap == _brute_force_overlap(fine, coarse)


class TestBuildHierarchy:
    def test_levels_shrink(self, pacman_hierarchy):
        assert pacman_hierarchy.n_levels >= 2
        counts = [m.n_vertices for m in pacman_hierarchy.levels]
        assert counts == sorted(counts, reverse=True)
        assert len(set(counts)) == len(counts)

    def test_sufficient_decrease(self, pacman_hierarchy):
        for fine, coarse in zip(pacman_hierarchy.levels, pacman_hierarchy.levels[1:]):
            assert fine.n_cells > 2 * coarse.n_cells

    def test_bounded_reduction_per_level(self, pacman_hierarchy):
        for fine, coarse in zip(pacman_hierarchy.levels, pacman_hierarchy.levels[1:]):
            assert fine.n_vertices < 5 * coarse.n_vertices

    def test_levels_are_node_nested(self, pacman_hierarchy):
        for fine, coarse in zip(pacman_hierarchy.levels, pacman_hierarchy.levels[1:]):
            assert np.array_equal(coarse.vertices, fine.vertices[coarse.parent_index])

    def test_quality_bounds(self, pacman_hierarchy):
        for mesh in pacman_hierarchy.levels:
            assert geometry.is_positively_oriented(mesh.cell_points()).all()
            assert mesh.aspect_ratios().max() <= 10.0

    def test_metrics_rows(self, pacman_hierarchy):
        metrics = pacman_hierarchy.metrics
        assert len(metrics) == pacman_hierarchy.n_levels
        assert metrics[0].max_overlap is None
        for m in metrics[1:]:
            assert m.max_overlap >= 1
            assert m.max_ratio > 1.0
            assert m.max_overlap <= 30
            assert m.max_ratio <= 12.0

    def test_quality_table(self, pacman_hierarchy):
        df = pacman_hierarchy.to_dataframe()
        assert list(df.columns[:6]) == ["level", "cells", "vertices", "max_ar", "max_overlap", "max_ratio"]
        assert "max_ar" in pacman_hierarchy.format_table()

    def test_fichera_hierarchy(self, fichera_hierarchy):
        assert fichera_hierarchy.n_levels >= 2
        for mesh in fichera_hierarchy.levels:
            assert geometry.is_positively_oriented(mesh.cell_points()).all()
            assert mesh.aspect_ratios().max() < 60.0
            assert mesh.cell_measures().sum() == pytest.approx(7.0)
        assert fichera_hierarchy.metrics == []

    def test_small_mesh_has_one_level(self, square_mesh):
        hierarchy = build_hierarchy(square_mesh, min_vertices=100)
        assert hierarchy.n_levels == 1
        with pytest.raises(ValueError, match="single level"):
            hierarchy.require_multilevel()

    def test_argument_checks(self, square_mesh):
        with pytest.raises(ValueError):
            build_hierarchy(square_mesh, min_vertices=3)
        with pytest.raises(ValueError):
            build_hierarchy(square_mesh, max_levels=0)

    def test_max_levels(self, fine_square_mesh):
        hierarchy = build_hierarchy(fine_square_mesh, min_vertices=4, max_levels=2, compute_metrics=False)
        assert hierarchy.n_levels <= 2

    def test_structured_square_level(self, fine_square_mesh):
        hierarchy = build_hierarchy(fine_square_mesh, min_vertices=4, max_levels=2, compute_metrics=False)
        coarse = hierarchy.levels[1]
        assert (coarse.n_vertices, coarse.n_cells) == (25, 32)

    def test_first_level_without_decrease_raises(self, fine_square_mesh):
        keep = np.delete(np.arange(fine_square_mesh.n_vertices), 40)
        with patch("tools.hierarchy.staged_coarsen", return_value=keep):
            with pytest.raises(CoarseningError, match="sufficient decrease"):
                build_hierarchy(fine_square_mesh, min_vertices=4, compute_metrics=False)

    def test_later_level_without_decrease_is_discarded(self, fine_square_mesh):
        def one_real_level(mesh, beta):
            if mesh.n_vertices == fine_square_mesh.n_vertices:
                return staged_coarsen(mesh, beta)
            interior = np.flatnonzero(mesh.markers == VertexKind.INTERIOR)
            return np.setdiff1d(np.arange(mesh.n_vertices), interior[:1])

        with patch("tools.hierarchy.staged_coarsen", side_effect=one_real_level):
            hierarchy = build_hierarchy(fine_square_mesh, min_vertices=4, compute_metrics=False)
        assert hierarchy.n_levels == 2


class TestPersistence:
    def test_save_and_load(self, pacman_hierarchy, tmp_path):
        paths = pacman_hierarchy.save(tmp_path)
        assert len(paths) == pacman_hierarchy.n_levels
        assert (tmp_path / "quality.csv").exists()

        loaded = MeshHierarchy.load(tmp_path)
        assert loaded.n_levels == pacman_hierarchy.n_levels
        for original, restored in zip(pacman_hierarchy.levels, loaded.levels):
            assert np.array_equal(original.vertices, restored.vertices)
            assert np.array_equal(original.cells, restored.cells)
        for fine, coarse in zip(loaded.levels, loaded.levels[1:]):
            assert np.array_equal(coarse.vertices, fine.vertices[coarse.parent_index])

    def test_load_missing_directory(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            MeshHierarchy.load(tmp_path)
