import math

import numpy as np
import pytest

from utils import geometry

EQUILATERAL = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]])
REGULAR_TET = np.array(
    [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ]
) / (2.0 * math.sqrt(2.0))


class TestAspectRatios:
    def test_equilateral_triangle(self):
        assert geometry.aspect_ratios(EQUILATERAL)[0] == pytest.approx(math.sqrt(3.0))

    def test_regular_tetrahedron(self):
        # Edge length 1 after scaling.
        assert geometry.longest_edges(REGULAR_TET)[0] == pytest.approx(1.0)
        assert geometry.aspect_ratios(REGULAR_TET)[0] == pytest.approx(2.0 * math.sqrt(6.0))

    def test_corner_tetrahedron_uses_insphere_radius(self):
        tet = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        assert geometry.inscribed_diameters(tet)[0] == pytest.approx(1.0 / (3.0 + math.sqrt(3.0)))
        assert geometry.aspect_ratios(tet)[0] == pytest.approx(math.sqrt(2.0) * (3.0 + math.sqrt(3.0)))

    def test_right_triangle(self):
        tri = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 3.0]])
        assert geometry.inscribed_diameters(tri)[0] == pytest.approx(2.0)
        assert geometry.aspect_ratios(tri)[0] == pytest.approx(2.5)

    def test_degenerate_is_infinite(self):
        flat = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        assert np.isinf(geometry.aspect_ratios(flat)[0])

    def test_scale_invariant(self):
        assert geometry.aspect_ratios(7.5 * EQUILATERAL)[0] == pytest.approx(math.sqrt(3.0))


class TestOrientation:
    def test_counter_clockwise_is_positive(self):
        assert geometry.is_positively_oriented(EQUILATERAL)[0]
        assert not geometry.is_positively_oriented(EQUILATERAL[[1, 0, 2]])[0]

    def test_signed_measures(self):
        tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        tet = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        assert geometry.signed_measures(tri)[0] == pytest.approx(0.5)
        assert geometry.signed_measures(tet)[0] == pytest.approx(1.0 / 6.0)

    def test_orient2d_and_incircle(self):
        a, b, c = (0.0, 0.0), (1.0, 0.0), (0.0, 1.0)
        assert geometry.orient2d(a, b, c) > 0
        assert geometry.incircle(a, b, c, (0.5, 0.5)) > 0
        assert geometry.incircle(a, b, c, (2.0, 2.0)) < 0


class TestBarycentric:
    def test_vertices_and_centroid(self):
        tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        lam = geometry.barycentric(tri, np.vstack([tri, tri.mean(axis=0)]))
        np.testing.assert_allclose(lam[:3], np.eye(3), atol=1e-14)
        np.testing.assert_allclose(lam[3], [1 / 3, 1 / 3, 1 / 3])

    def test_closest_point_outside(self):
        tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(geometry.closest_point(tri, np.array([0.5, -1.0])), [0.5, 0.0])
        assert geometry.distance_to_simplex(tri, np.array([2.0, 2.0])) == pytest.approx(
            math.hypot(1.5, 1.5)
        )

    def test_closest_point_inside_is_identity(self):
        tet = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        x = np.array([0.1, 0.2, 0.3])
        np.testing.assert_allclose(geometry.closest_point(tet, x), x)
        assert geometry.distance_to_simplex(tet, np.array([0.0, 0.0, -2.0])) == pytest.approx(2.0)


class TestIntersection:
    def test_touching_counts(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        others = np.array(
            [
                [[1.0, 0.0], [2.0, 0.0], [1.0, 1.0]],  # shares a vertex
                [[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],  # shares an edge
                [[2.0, 2.0], [3.0, 2.0], [2.0, 3.0]],  # apart
                [[0.2, 0.2], [0.3, 0.2], [0.2, 0.3]],  # inside
            ]
        )
        assert geometry.simplices_intersect(a, others).tolist() == [True, True, False, True]

    def test_tetrahedra(self):
        a = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        shifted = a + np.array([2.0, 0.0, 0.0])
        overlapping = a + np.array([0.1, 0.1, 0.1])
        result = geometry.simplices_intersect(a, np.stack([shifted, overlapping]))
        assert result.tolist() == [False, True]
