import numpy as np
import pytest

from tools.features import detect_features, merge_inherited_features
from tools.mesh import MeshTopologyError, SimplicialMesh, VertexKind


class TestDetectFeatures2D:
    def test_unit_square(self, square_mesh):
        features = detect_features(square_mesh)
        corners = np.flatnonzero(features.markers == VertexKind.CORNER)
        assert sorted(corners.tolist()) == [0, 4, 20, 24]
        assert features.markers[2] == VertexKind.BOUNDARY
        assert features.markers[12] == VertexKind.INTERIOR
        assert features.ridge_edges == set()

    def test_threshold_above_right_angle(self, square_mesh):
        features = detect_features(square_mesh, curvature_threshold=2.0)
        assert features.count(VertexKind.CORNER) == 0

    def test_non_positive_threshold(self, square_mesh):
        with pytest.raises(ValueError):
            detect_features(square_mesh, curvature_threshold=0.0)

    def test_bowtie_is_non_manifold(self):
        vertices = np.array([[0.0, 0.0], [1.0, -1.0], [1.0, 1.0], [2.0, 0.0], [2.0, 2.0]])
        bowtie = SimplicialMesh(vertices, np.array([[0, 1, 2], [2, 3, 4]]))
        with pytest.raises(MeshTopologyError, match="non-manifold"):
            detect_features(bowtie)

    def test_pacman_corners(self, pacman_mesh):
        corners = np.flatnonzero(pacman_mesh.markers == VertexKind.CORNER)
        points = pacman_mesh.vertices[corners]
        # The reentrant corner and the two ends of the arc.
        assert len(corners) == 3
        assert any(np.allclose(p, 0.0) for p in points)


class TestDetectFeatures3D:
    def test_unit_cube(self, cube_mesh):
        features = detect_features(cube_mesh)
        v = cube_mesh.vertices
        on_corner = np.all(np.isin(v, [0.0, 1.0]), axis=1)
        extreme = np.isin(v, [0.0, 1.0]).sum(axis=1)
        assert (features.markers[on_corner] == VertexKind.CORNER).all()
        assert (features.markers[extreme == 2] == VertexKind.RIDGE).all()
        assert (features.markers[extreme == 1] == VertexKind.BOUNDARY).all()
        assert features.markers[extreme == 0].tolist() == [VertexKind.INTERIOR]
        assert len(features.ridge_edges) == 24

    def test_fichera_reentrant_edges_are_ridges(self, fichera_mesh):
        v = fichera_mesh.vertices
        markers = fichera_mesh.markers
        for axis in range(3):
            others = [a for a in range(3) if a != axis]
            chain = (v[:, axis] > 0) & (v[:, axis] < 1.0) & np.all(v[:, others] == 0.0, axis=1)
            assert chain.sum() > 0
            assert (markers[chain] == VertexKind.RIDGE).all()
        origin = np.flatnonzero(np.all(v == 0.0, axis=1))
        assert markers[origin[0]] == VertexKind.CORNER


class TestMergeInheritedFeatures:
    def test_precedence_and_interior_reset(self, square_mesh):
        inherited = square_mesh.markers.copy()
        inherited[2] = VertexKind.CORNER
        inherited[12] = VertexKind.CORNER
        merged = merge_inherited_features(square_mesh, inherited)
        assert merged.markers[2] == VertexKind.CORNER
        assert merged.markers[12] == VertexKind.INTERIOR
        assert merged.markers[0] == VertexKind.CORNER

    def test_stale_ridges_dropped(self, cube_mesh):
        ridges = set(cube_mesh.ridge_edges) | {(0, 26)}
        merged = merge_inherited_features(cube_mesh, cube_mesh.markers, ridges)
        assert (0, 26) not in merged.ridge_edges
        assert merged.ridge_edges == cube_mesh.ridge_edges
