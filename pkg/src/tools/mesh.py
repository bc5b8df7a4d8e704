"""
Simplicial meshes in 2D and 3D: vertices, positively oriented cells and per-vertex
boundary markers, with the adjacency, edge and boundary-facet views built lazily from
them. Also cell quality, the spacing function and the vertex map between nested levels.
"""

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import Any, Dict, Iterable, Optional, Set, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from constants import ORIENTATION_EPS
from logger import setup_logger
from utils import geometry

logger = setup_logger(__name__)


class MeshTopologyError(ValueError):
    """Raised when a mesh boundary or traversal violates manifold assumptions."""


class VertexKind(IntEnum):
    """Boundary classification of a vertex. Ordering is the merge precedence."""

    INTERIOR = 0
    BOUNDARY = 1
    RIDGE = 2
    CORNER = 3


Edge = Tuple[int, int]


def edge_key(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


@dataclass
class QualityReport:
    max_aspect_ratio: float
    cell_count: int
    vertex_count: int
    worst_cell: int


class SimplicialMesh:
    """
    Triangle (2D) or tetrahedron (3D) mesh with derived adjacency.

    Vertices and cells are stored as numpy arrays; adjacency is derived lazily and
    cached, so instances must be treated as immutable once queried. Mutation for
    remeshing happens on a separate working copy.
    """

    def __init__(
        self,
        vertices: np.ndarray,
        cells: np.ndarray,
        markers: Optional[np.ndarray] = None,
        ridge_edges: Optional[Iterable[Edge]] = None,
        parent_index: Optional[np.ndarray] = None,
        metadata: Optional[Dict[str, Any]] = None,
        validate: bool = True,
    ):
        """
        Args:
            vertices: (n, d) coordinates
            cells: (m, d+1) vertex indices, positively oriented
            markers: per-vertex VertexKind codes; interior when omitted
            ridge_edges: 3D feature edges as vertex pairs
            parent_index: per-vertex index into the next finer mesh (node-nesting map)
            metadata: free-form generator information (domain, sizing)
            validate: check index ranges and orientation

        Raises:
            ValueError: If the arrays are inconsistent or a cell is not positively oriented
        """
        self.vertices = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64))
        self.cells = np.ascontiguousarray(np.asarray(cells, dtype=np.int64))
        if self.vertices.ndim != 2 or self.vertices.shape[1] not in (2, 3):
            raise ValueError(f"vertices must have shape (n, 2) or (n, 3), got {self.vertices.shape}")
        self.dim = int(self.vertices.shape[1])
        if self.cells.ndim != 2 or self.cells.shape[1] != self.dim + 1:
            raise ValueError(
                f"cells must have shape (m, {self.dim + 1}) for a {self.dim}D mesh, got {self.cells.shape}"
            )

        if markers is None:
            markers = np.zeros(len(self.vertices), dtype=np.int8)
        self.markers = np.asarray(markers, dtype=np.int8).copy()
        if len(self.markers) != len(self.vertices):
            raise ValueError("markers must have one entry per vertex")
        self.ridge_edges: Set[Edge] = {edge_key(int(a), int(b)) for a, b in (ridge_edges or ())}
        self.parent_index = None if parent_index is None else np.asarray(parent_index, dtype=np.int64)
        self.metadata: Dict[str, Any] = dict(metadata or {})

        if validate:
            self.validate()

    def validate(self) -> None:
        n = len(self.vertices)
        if len(self.cells) and (self.cells.min() < 0 or self.cells.max() >= n):
            raise ValueError("cell refers to a vertex index outside the vertex array")
        oriented = geometry.is_positively_oriented(self.cell_points())
        if len(self.cells) and not oriented.all():
            bad = int(np.flatnonzero(~oriented)[0])
            raise ValueError(f"cell {bad} is degenerate or not positively oriented")

    def __repr__(self) -> str:
        return f"SimplicialMesh(dim={self.dim}, vertices={self.n_vertices}, cells={self.n_cells})"

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def cell_points(self, cells: Optional[np.ndarray] = None) -> np.ndarray:
        """Coordinates of the selected cells as an (m, d+1, d) stack."""
        idx = self.cells if cells is None else self.cells[cells]
        return self.vertices[idx]

    @cached_property
    def _incidence(self) -> sp.csr_matrix:
        m, k = self.cells.shape
        rows = np.repeat(np.arange(m), k)
        data = np.ones(m * k, dtype=np.int32)
        return sp.csr_matrix((data, (rows, self.cells.ravel())), shape=(m, self.n_vertices))

    @cached_property
    def _vertex_cells_csr(self) -> sp.csr_matrix:
        incidence = self._incidence.T.tocsr()
        incidence.sort_indices()
        return incidence

    def vertex_cells(self, v: int) -> np.ndarray:
        """Cells incident to vertex ``v``, ascending."""
        csr = self._vertex_cells_csr
        return csr.indices[csr.indptr[v]:csr.indptr[v + 1]]

    @cached_property
    def cell_neighbor_graph(self) -> sp.csr_matrix:
        """Cell adjacency by shared vertex (self excluded), CSR with sorted columns."""
        shared = (self._incidence @ self._incidence.T).tocsr()
        shared.setdiag(0)
        shared.eliminate_zeros()
        shared.sort_indices()
        return shared

    def cell_neighbors(self, c: int) -> np.ndarray:
        graph = self.cell_neighbor_graph
        return graph.indices[graph.indptr[c]:graph.indptr[c + 1]]

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as an (E, 2) array with ``a < b``, lexicographically sorted."""
        k = self.dim + 1
        pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
        raw = np.concatenate([self.cells[:, [i, j]] for i, j in pairs])
        raw.sort(axis=1)
        return np.unique(raw, axis=0)

    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    @cached_property
    def vertex_adjacency(self) -> sp.csr_matrix:
        e = self.edges
        n = self.n_vertices
        data = np.ones(2 * len(e), dtype=np.int8)
        adj = sp.csr_matrix(
            (data, (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))),
            shape=(n, n),
        )
        adj.sort_indices()
        return adj

    def vertex_neighbors(self, v: int) -> np.ndarray:
        adj = self.vertex_adjacency
        return adj.indices[adj.indptr[v]:adj.indptr[v + 1]]

    @cached_property
    def _boundary(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = self.dim + 1
        facets, owners, opposite = [], [], []
        for i in range(k):
            local = [j for j in range(k) if j != i]
            facets.append(self.cells[:, local])
            owners.append(np.arange(self.n_cells))
            opposite.append(self.cells[:, i])
        facets = np.concatenate(facets)
        owners = np.concatenate(owners)
        opposite = np.concatenate(opposite)
        keys = np.sort(facets, axis=1)
        _, first, counts = np.unique(keys, axis=0, return_index=True, return_counts=True)
        if (counts > 2).any():
            raise MeshTopologyError("a facet is shared by more than two cells (non-manifold mesh)")
        boundary = first[counts == 1]
        boundary.sort()
        return facets[boundary], owners[boundary], opposite[boundary]

    @property
    def boundary_facets(self) -> np.ndarray:
        """Facets incident to exactly one cell, (F, d)."""
        return self._boundary[0]

    @property
    def boundary_facet_cells(self) -> np.ndarray:
        return self._boundary[1]

    def boundary_facet_normals(self) -> np.ndarray:
        """Unit outward normals of the boundary facets."""
        facets, _, opposite = self._boundary
        pts = self.vertices[facets]
        if self.dim == 2:
            t = pts[:, 1] - pts[:, 0]
            normals = np.stack([t[:, 1], -t[:, 0]], axis=1)
        else:
            normals = np.cross(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0])
        inward = self.vertices[opposite] - pts[:, 0]
        flip = np.einsum("ij,ij->i", normals, inward) > 0
        normals[flip] *= -1.0
        return normals / np.linalg.norm(normals, axis=1, keepdims=True)

    def boundary_facet_measures(self) -> np.ndarray:
        pts = self.vertices[self.boundary_facets]
        if self.dim == 2:
            return np.linalg.norm(pts[:, 1] - pts[:, 0], axis=1)
        return 0.5 * np.linalg.norm(np.cross(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0]), axis=1)

    @cached_property
    def boundary_vertex_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_facets.ravel()] = True
        return mask

    @cached_property
    def boundary_edges(self) -> Set[Edge]:
        """Edges lying on the boundary (edges of boundary facets)."""
        f = self.boundary_facets
        out: Set[Edge] = set()
        for i in range(f.shape[1]):
            for j in range(i + 1, f.shape[1]):
                out.update(edge_key(int(a), int(b)) for a, b in zip(f[:, i], f[:, j]))
        return out

    @cached_property
    def cell_diameters(self) -> np.ndarray:
        """Longest edge h of every cell."""
        return geometry.longest_edges(self.cell_points())

    def cell_measures(self) -> np.ndarray:
        return geometry.signed_measures(self.cell_points())

    def aspect_ratios(self) -> np.ndarray:
        return geometry.aspect_ratios(self.cell_points())

    def barycenters(self) -> np.ndarray:
        return self.cell_points().mean(axis=1)

    def with_features(self, markers: np.ndarray, ridge_edges: Iterable[Edge]) -> "SimplicialMesh":
        """Copy of the mesh sharing geometry with new feature classification."""
        return SimplicialMesh(
            self.vertices,
            self.cells,
            markers=markers,
            ridge_edges=ridge_edges,
            parent_index=self.parent_index,
            metadata=self.metadata,
            validate=False,
        )

    def same_as(self, other: "SimplicialMesh") -> bool:
        """Bitwise equality of coordinates, cells and markers."""
        return (
            self.dim == other.dim
            and np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.cells, other.cells)
            and np.array_equal(self.markers, other.markers)
        )


def aspect_ratio(mesh: SimplicialMesh, cell: int) -> float:
    """
    Longest edge divided by the inscribed size of one cell (incircle diameter, insphere radius).

    Raises:
        ValueError: If the cell index is invalid or the cell has zero measure
    """
    if not 0 <= cell < mesh.n_cells:
        raise ValueError(f"cell index {cell} out of range for {mesh.n_cells} cells")
    pts = mesh.cell_points(np.array([cell]))
    measure = abs(float(geometry.signed_measures(pts)[0]))
    h = float(geometry.longest_edges(pts)[0])
    if measure <= ORIENTATION_EPS * h ** mesh.dim:
        raise ValueError(f"degenerate cell {cell}")
    return float(geometry.aspect_ratios(pts)[0])


def quality_report(mesh: SimplicialMesh) -> QualityReport:
    ratios = mesh.aspect_ratios()
    worst = int(np.argmax(ratios))
    return QualityReport(
        max_aspect_ratio=float(ratios[worst]),
        cell_count=mesh.n_cells,
        vertex_count=mesh.n_vertices,
        worst_cell=worst,
    )


def spacing_function(mesh: SimplicialMesh) -> np.ndarray:
    """
    Sp(v): length of the shortest mesh edge incident to each vertex.

    Raises:
        ValueError: If some vertex has no incident edge
    """
    e = mesh.edges
    lengths = mesh.edge_lengths()
    sp_values = np.full(mesh.n_vertices, np.inf)
    np.minimum.at(sp_values, e[:, 0], lengths)
    np.minimum.at(sp_values, e[:, 1], lengths)
    isolated = np.flatnonzero(~np.isfinite(sp_values))
    if len(isolated):
        raise ValueError(f"isolated vertex {int(isolated[0])} has no incident edge")
    return sp_values


@dataclass
class MeshSummary:
    """One-line description used by the CLI and the logs."""

    dim: int
    vertices: int
    cells: int
    max_aspect_ratio: float
    corners: int = 0
    ridge_vertices: int = 0
    extra: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def of(cls, mesh: SimplicialMesh) -> "MeshSummary":
        return cls(
            dim=mesh.dim,
            vertices=mesh.n_vertices,
            cells=mesh.n_cells,
            max_aspect_ratio=float(mesh.aspect_ratios().max()) if mesh.n_cells else 0.0,
            corners=int((mesh.markers == VertexKind.CORNER).sum()),
            ridge_vertices=int((mesh.markers == VertexKind.RIDGE).sum()),
        )

    def __str__(self) -> str:
        return (
            f"{self.dim}D mesh: {self.vertices} vertices, {self.cells} cells, "
            f"max AR {self.max_aspect_ratio:.3f}, {self.corners} corners, {self.ridge_vertices} ridge vertices"
        )


def nested_vertex_map(fine: SimplicialMesh, coarse: SimplicialMesh) -> np.ndarray:
    """
    Index of every coarse vertex in the fine mesh, -1 where no fine vertex coincides.

    Uses ``coarse.parent_index`` when it refers to ``fine``; otherwise matches
    coordinates exactly.
    """
    parent = coarse.parent_index
    if parent is not None and len(parent) == coarse.n_vertices and (parent < fine.n_vertices).all():
        if np.array_equal(fine.vertices[parent], coarse.vertices):
            return parent.copy()
    dist, idx = cKDTree(fine.vertices).query(coarse.vertices, k=1)
    return np.where(dist == 0.0, idx, -1).astype(np.int64)
