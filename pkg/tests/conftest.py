import math

import numpy as np
import pytest

from tools.hierarchy import build_hierarchy
from tools.mesh import SimplicialMesh
from tools.meshgen import generate, generate_unit_cube, generate_unit_square


@pytest.fixture
def reference_triangle():
    return SimplicialMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))


@pytest.fixture
def hexagon_mesh():
    """Regular hexagon of unit radius fanned around a center vertex (index 0)."""
    angles = np.arange(6) * math.pi / 3.0
    ring = np.column_stack([np.cos(angles), np.sin(angles)])
    vertices = np.vstack([[0.0, 0.0], ring])
    cells = np.array([[0, 1 + i, 1 + (i + 1) % 6] for i in range(6)])
    return SimplicialMesh(vertices, cells)


@pytest.fixture
def square_mesh():
    """4 x 4 structured unit square with classified boundary."""
    return generate_unit_square(4)


@pytest.fixture
def fine_square_mesh():
    return generate_unit_square(8)


@pytest.fixture
def cube_mesh():
    return generate_unit_cube(2)


@pytest.fixture(scope="session")
def pacman_mesh():
    return generate("pacman", 500)


@pytest.fixture(scope="session")
def pacman_hierarchy():
    mesh = generate("pacman", 1500)
    return build_hierarchy(mesh, min_vertices=100)


@pytest.fixture(scope="session")
def fichera_mesh():
    return generate("fichera", 400)


@pytest.fixture(scope="session")
def fichera_hierarchy(fichera_mesh):
    return build_hierarchy(fichera_mesh, min_vertices=60, compute_metrics=False)
