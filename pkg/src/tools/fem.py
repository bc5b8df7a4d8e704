"""
Piecewise-linear finite elements for the model Laplace problems.

Pacman: -Lap u = 0 on the disk with a tenth removed, Dirichlet data from the exact
solution r^(2/3) sin(2 theta / 3). Fichera: -Lap u = 0 on the cube [-1, 1]^3 without
its positive octant, u = 0 on the three faces bordering the removed octant and
du/dn = g on the outer faces.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from logger import setup_logger
from tools.mesh import MeshTopologyError, SimplicialMesh
from tools.meshgen import PACMAN_ANGLE
from utils.mesh_io import write_operator, write_vector

logger = setup_logger(__name__)

FACE_TOL = 1e-9

# Degree-4 six-point rule on the triangle (barycentric points, weights summing to 1).
_TRI_A, _TRI_WA = 0.445948490915965, 0.223381589678011
_TRI_B, _TRI_WB = 0.091576213509771, 0.109951743655322
TRIANGLE_RULE = (
    np.array(
        [
            [_TRI_A, _TRI_A, 1.0 - 2.0 * _TRI_A],
            [_TRI_A, 1.0 - 2.0 * _TRI_A, _TRI_A],
            [1.0 - 2.0 * _TRI_A, _TRI_A, _TRI_A],
            [_TRI_B, _TRI_B, 1.0 - 2.0 * _TRI_B],
            [_TRI_B, 1.0 - 2.0 * _TRI_B, _TRI_B],
            [1.0 - 2.0 * _TRI_B, _TRI_B, _TRI_B],
        ]
    ),
    np.array([_TRI_WA] * 3 + [_TRI_WB] * 3),
)

# Eleven-point rule on the tetrahedron, exact for degree 4. Weights sum to 1.
_TET_S, _TET_T = 0.0714285714285714, 0.785714285714286
_TET_A, _TET_B = 0.399403576166799, 0.100596423833201
TETRAHEDRON_RULE = (
    np.array(
        [
            [0.25, 0.25, 0.25, 0.25],
            [_TET_T, _TET_S, _TET_S, _TET_S],
            [_TET_S, _TET_T, _TET_S, _TET_S],
            [_TET_S, _TET_S, _TET_T, _TET_S],
            [_TET_S, _TET_S, _TET_S, _TET_T],
            [_TET_A, _TET_A, _TET_B, _TET_B],
            [_TET_A, _TET_B, _TET_A, _TET_B],
            [_TET_A, _TET_B, _TET_B, _TET_A],
            [_TET_B, _TET_A, _TET_A, _TET_B],
            [_TET_B, _TET_A, _TET_B, _TET_A],
            [_TET_B, _TET_B, _TET_A, _TET_A],
        ]
    ),
    6.0 * np.array([-0.0131555555555556] + [0.00762222222222222] * 4 + [0.0248888888888889] * 6),
)


@dataclass
class LinearSystem:
    """
    Assembled operator with Dirichlet rows eliminated symmetrically.

    Dirichlet rows and columns of ``matrix`` are identity; ``rhs`` carries the
    boundary values at those rows. DoF i is vertex i.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dirichlet_dofs: np.ndarray
    dirichlet_values: np.ndarray

    @property
    def n_dofs(self) -> int:
        return self.matrix.shape[0]

    @property
    def dof_to_vertex(self) -> np.ndarray:
        return np.arange(self.n_dofs)

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return np.flatnonzero(mask)

    def write(self, stem: Union[str, Path]) -> None:
        """Dump ``<stem>.matrix`` and ``<stem>.rhs``."""
        stem = Path(stem)
        write_operator(self.matrix, stem.with_suffix(".matrix"))
        write_vector(self.rhs, stem.with_suffix(".rhs"))


def exact_pacman(point: np.ndarray) -> Union[float, np.ndarray]:
    """
    r^(2/3) sin(2 theta / 3), theta measured counter-clockwise from the positive x axis.

    Angles in the removed wedge past its bisector are taken as negative so the value is
    continuous across the edge at theta = 0.
    """
    p = np.asarray(point, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    r = np.hypot(p[:, 0], p[:, 1])
    theta = np.mod(np.arctan2(p[:, 1], p[:, 0]), 2.0 * math.pi)
    theta = np.where(theta > 0.5 * (PACMAN_ANGLE + 2.0 * math.pi), theta - 2.0 * math.pi, theta)
    value = r ** (2.0 / 3.0) * np.sin(2.0 * theta / 3.0)
    return float(value[0]) if single else value


def fichera_flux(points: np.ndarray) -> np.ndarray:
    """
    Neumann data g = sum over the xy, yz and zx planes of r^(2/3) cos(theta).

    In each plane r and theta are polar coordinates with theta measured from the first
    axis of the pair, so each term equals x_i * r^(-1/3).
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    g = np.zeros(len(p))
    for i, j in ((0, 1), (1, 2), (2, 0)):
        r = np.hypot(p[:, i], p[:, j])
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(r > 0.0, p[:, i] * r ** (-1.0 / 3.0), 0.0)
        g += term
    return g


class ModelProblem(ABC):
    """Boundary value problem for -Lap u = 0 on a model domain."""

    name: str = ""
    dim: int = 0

    @abstractmethod
    def classify_facets(self, mesh: SimplicialMesh) -> np.ndarray:
        """
        True for Dirichlet boundary facets, False for Neumann facets.

        Raises:
            MeshTopologyError: If a boundary facet belongs to neither part
        """

    @abstractmethod
    def dirichlet_data(self, points: np.ndarray) -> np.ndarray:
        pass

    def neumann_data(self, points: np.ndarray) -> np.ndarray:
        return np.zeros(len(points))

    def exact(self) -> Optional[Callable[[np.ndarray], np.ndarray]]:
        return None


class PacmanProblem(ModelProblem):
    name = "pacman"
    dim = 2

    def classify_facets(self, mesh: SimplicialMesh) -> np.ndarray:
        return np.ones(len(mesh.boundary_facets), dtype=bool)

    def dirichlet_data(self, points: np.ndarray) -> np.ndarray:
        return exact_pacman(np.atleast_2d(points))

    def exact(self):
        return exact_pacman


class FicheraProblem(ModelProblem):
    name = "fichera"
    dim = 3

    def classify_facets(self, mesh: SimplicialMesh) -> np.ndarray:
        centers = mesh.vertices[mesh.boundary_facets].mean(axis=1)
        reentrant = np.zeros(len(centers), dtype=bool)
        for axis in range(3):
            others = [a for a in range(3) if a != axis]
            on_plane = np.abs(centers[:, axis]) <= FACE_TOL
            reentrant |= on_plane & (centers[:, others] >= -FACE_TOL).all(axis=1)
        outer = (np.abs(np.abs(centers) - 1.0) <= FACE_TOL).any(axis=1)
        unclassified = np.flatnonzero(~reentrant & ~outer)
        if len(unclassified):
            raise MeshTopologyError(
                f"unclassified boundary facet {int(unclassified[0])} at {centers[unclassified[0]].tolist()}"
            )
        return reentrant

    def dirichlet_data(self, points: np.ndarray) -> np.ndarray:
        return np.zeros(len(np.atleast_2d(points)))

    def neumann_data(self, points: np.ndarray) -> np.ndarray:
        return fichera_flux(points)


class ConstantProblem(ModelProblem):
    """All-Dirichlet problem with constant (or given) boundary data, for any domain."""

    name = "constant"

    def __init__(self, value: float = 1.0, data: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        self.value = value
        self.data = data

    def classify_facets(self, mesh: SimplicialMesh) -> np.ndarray:
        return np.ones(len(mesh.boundary_facets), dtype=bool)

    def dirichlet_data(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if self.data is not None:
            return np.asarray(self.data(points), dtype=float)
        return np.full(len(points), float(self.value))


class ProblemFactory:
    """Creates the model problem matching a domain name."""

    _problem_classes = {
        "pacman": PacmanProblem,
        "fichera": FicheraProblem,
    }

    @classmethod
    def create_problem(cls, name: str) -> ModelProblem:
        """
        Raises:
            ValueError: If the problem name is unknown
        """
        key = name.lower()
        if key not in cls._problem_classes:
            raise ValueError(
                f"Unsupported problem: '{name}'. Supported problems: {cls.get_supported_problems()}"
            )
        return cls._problem_classes[key]()

    @classmethod
    def get_supported_problems(cls) -> list[str]:
        return list(cls._problem_classes.keys())

    @classmethod
    def register_problem(cls, name: str, problem_class: type) -> None:
        if not issubclass(problem_class, ModelProblem):
            raise ValueError("Problem class must inherit from ModelProblem")
        cls._problem_classes[name.lower()] = problem_class
        logger.info(f"Registered problem '{name}': {problem_class.__name__}")


def _gradients(points: np.ndarray):
    """P1 basis gradients (m, d+1, d) and cell measures (m,)."""
    d = points.shape[2]
    edges = points[:, 1:, :] - points[:, :1, :]
    measures = np.abs(np.linalg.det(edges)) / math.factorial(d)
    rest = np.transpose(np.linalg.inv(edges), (0, 2, 1))
    first = -rest.sum(axis=1, keepdims=True)
    return np.concatenate([first, rest], axis=1), measures


def local_stiffness(points: np.ndarray) -> np.ndarray:
    """Element stiffness matrices |T| grad(phi_i) . grad(phi_j), shape (m, d+1, d+1)."""
    grads, measures = _gradients(np.asarray(points, dtype=float))
    return measures[:, None, None] * np.einsum("mid,mjd->mij", grads, grads)


def stiffness_matrix(mesh: SimplicialMesh) -> sp.csr_matrix:
    local = local_stiffness(mesh.cell_points())
    k = mesh.dim + 1
    rows = np.repeat(mesh.cells, k, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, k)).ravel()
    matrix = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_vertices, mesh.n_vertices)).tocsr()
    matrix.sum_duplicates()
    matrix.sort_indices()
    return matrix


def neumann_load(mesh: SimplicialMesh, facets: np.ndarray, flux: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """
    Boundary load of the given facets: midpoint rule on segments, edge-midpoint rule on
    triangles.
    """
    b = np.zeros(mesh.n_vertices)
    if len(facets) == 0:
        return b
    pts = mesh.vertices[facets]
    if mesh.dim == 2:
        length = np.linalg.norm(pts[:, 1] - pts[:, 0], axis=1)
        share = 0.5 * length * flux(pts.mean(axis=1))
        np.add.at(b, facets[:, 0], share)
        np.add.at(b, facets[:, 1], share)
        return b
    area = 0.5 * np.linalg.norm(np.cross(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0]), axis=1)
    g = {}
    for i, j in ((0, 1), (1, 2), (0, 2)):
        g[(i, j)] = flux(0.5 * (pts[:, i] + pts[:, j]))
    for i in range(3):
        j, k = [x for x in range(3) if x != i]
        near = g[tuple(sorted((i, j)))] + g[tuple(sorted((i, k)))]
        np.add.at(b, facets[:, i], area / 6.0 * near)
    return b


def apply_dirichlet(matrix: sp.csr_matrix, rhs: np.ndarray, dofs: np.ndarray, values: np.ndarray):
    """
    Symmetric elimination: A <- Df A Df + Dd, b <- Df (b - A u_D) + u_D.
    """
    n = matrix.shape[0]
    fixed = np.zeros(n, dtype=bool)
    fixed[dofs] = True
    u_d = np.zeros(n)
    u_d[dofs] = values
    free = sp.diags((~fixed).astype(float))
    matrix_out = (free @ matrix @ free + sp.diags(fixed.astype(float))).tocsr()
    matrix_out.eliminate_zeros()
    matrix_out.sort_indices()
    rhs_out = (~fixed) * (rhs - matrix @ u_d) + u_d
    return matrix_out, rhs_out


def assemble(mesh: SimplicialMesh, problem: ModelProblem) -> LinearSystem:
    """
    Assemble the P1 system of a model problem on a mesh.

    Raises:
        ValueError: If the problem and mesh dimensions differ
        MeshTopologyError: If a boundary facet cannot be classified
    """
    if problem.dim and problem.dim != mesh.dim:
        raise ValueError(f"{problem.name} problem is {problem.dim}D but the mesh is {mesh.dim}D")
    matrix = stiffness_matrix(mesh)
    dirichlet_facets = problem.classify_facets(mesh)
    facets = mesh.boundary_facets
    rhs = neumann_load(mesh, facets[~dirichlet_facets], problem.neumann_data)

    dofs = np.unique(facets[dirichlet_facets].ravel())
    values = problem.dirichlet_data(mesh.vertices[dofs]) if len(dofs) else np.zeros(0)
    matrix, rhs = apply_dirichlet(matrix, rhs, dofs, values)
    logger.debug(
        f"Assembled {problem.name} system: {matrix.shape[0]} dofs, {matrix.nnz} nonzeros, "
        f"{len(dofs)} Dirichlet dofs"
    )
    return LinearSystem(matrix=matrix, rhs=rhs, dirichlet_dofs=dofs, dirichlet_values=np.asarray(values, dtype=float))


def solve_direct(system: LinearSystem) -> np.ndarray:
    return spsolve(system.matrix.tocsc(), system.rhs)


def l2_error(mesh: SimplicialMesh, solution: np.ndarray, exact: Callable[[np.ndarray], np.ndarray]) -> float:
    """
    ||u_h - u|| in L2 by a degree-4 quadrature rule on every cell.

    Raises:
        ValueError: If the solution length differs from the vertex count
    """
    solution = np.asarray(solution, dtype=float)
    if solution.shape[0] != mesh.n_vertices:
        raise ValueError(f"solution has length {solution.shape[0]}, mesh has {mesh.n_vertices} vertices")
    lam, weights = TRIANGLE_RULE if mesh.dim == 2 else TETRAHEDRON_RULE
    pts = mesh.cell_points()
    measures = np.abs(mesh.cell_measures())
    x = np.einsum("qk,mkd->mqd", lam, pts)
    uh = np.einsum("qk,mk->mq", lam, solution[mesh.cells])
    u = np.asarray(exact(x.reshape(-1, mesh.dim)), dtype=float).reshape(uh.shape)
    return float(np.sqrt(np.sum(measures[:, None] * weights[None, :] * (uh - u) ** 2)))
