"""
Prolongation operators between adjacent levels by tandem mesh traversal.

Fine-cell barycenters are located in the coarse mesh first, in waves spreading from the
vertices both meshes share. Each search starts from the candidate coarse cell in which
the point has the largest smallest barycentric coordinate: the cells around shared
vertices for the first wave, the cells holding neighbor barycenters afterwards. Fine
vertices are then located starting from the coarse cell of one of their cells. Points
outside the coarse mesh (curved boundaries) are projected onto the nearest coarse cell.
"""

from collections import deque
from dataclasses import dataclass
from typing import Optional
from weakref import WeakKeyDictionary

import numpy as np
import scipy.sparse as sp

from constants import BARYCENTRIC_TOL
from logger import setup_logger
from tools.mesh import MeshTopologyError, SimplicialMesh, nested_vertex_map
from utils import geometry

logger = setup_logger(__name__)


@dataclass
class LocationResult:
    cell: int
    inside: bool
    steps: int


class CellLocator:
    """Cached per-cell data of a mesh used by repeated point location."""

    def __init__(self, mesh: SimplicialMesh):
        self.mesh = mesh
        self.points = mesh.cell_points()
        self.origin = self.points[:, 0, :]
        edges = np.transpose(self.points[:, 1:, :] - self.points[:, :1, :], (0, 2, 1))
        self.inverse = np.linalg.inv(edges)
        self.lower = self.points.min(axis=1)
        self.upper = self.points.max(axis=1)
        self.diameters = mesh.cell_diameters
        graph = mesh.cell_neighbor_graph
        self.indptr = graph.indptr
        self.indices = graph.indices

    def neighbors(self, c: int) -> np.ndarray:
        return self.indices[self.indptr[c]:self.indptr[c + 1]]

    def barycentric(self, cells: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Barycentric coordinates of points ``x`` (k, d) in ``cells`` (k,)."""
        lam = np.einsum("kij,kj->ki", self.inverse[cells], x - self.origin[cells])
        return np.hstack([1.0 - lam.sum(axis=1, keepdims=True), lam])

    def contains(self, c: int, x: np.ndarray) -> bool:
        lam = self.barycentric(np.array([c]), x[None, :])[0]
        return bool(lam.min() >= -BARYCENTRIC_TOL)

    def box_distance(self, c: int, x: np.ndarray) -> float:
        gap = np.maximum(self.lower[c] - x, 0.0) + np.maximum(x - self.upper[c], 0.0)
        return float(np.sqrt(gap @ gap))

    def distance(self, c: int, x: np.ndarray) -> float:
        return geometry.distance_to_simplex(self.points[c], x)

    def locate(self, start: int, x: np.ndarray, radius: Optional[float] = None) -> LocationResult:
        """
        Breadth-first search from ``start`` for the cell containing ``x``.

        Cells are expanded while their bounding box lies within ``radius`` of ``x``.
        When the bounded search finds no containing cell, the nearest visited cell is
        improved by a descent over neighbors and returned as projected.
        """
        if radius is None:
            radius = 2.0 * float(self.diameters[start])
        queue = deque([start])
        visited = {start}
        steps = 0
        while queue:
            c = queue.popleft()
            steps += 1
            if self.contains(c, x):
                return LocationResult(cell=c, inside=True, steps=steps)
            for n in self.neighbors(c):
                n = int(n)
                if n not in visited and self.box_distance(n, x) <= radius:
                    visited.add(n)
                    queue.append(n)
        return self._nearest(sorted(visited), x, steps)

    def _nearest(self, candidates, x: np.ndarray, steps: int) -> LocationResult:
        best = min(candidates, key=lambda c: (self.distance(c, x), c))
        best_dist = self.distance(best, x)
        seen = set(candidates)
        improved = True
        while improved:
            improved = False
            for n in self.neighbors(best):
                n = int(n)
                if n in seen:
                    continue
                seen.add(n)
                steps += 1
                if self.contains(n, x):
                    return LocationResult(cell=n, inside=True, steps=steps)
                d = self.distance(n, x)
                if d < best_dist or (d == best_dist and n < best):
                    best, best_dist, improved = n, d, True
        return LocationResult(cell=best, inside=False, steps=steps)


_LOCATORS: "WeakKeyDictionary[SimplicialMesh, CellLocator]" = WeakKeyDictionary()


def locator_for(mesh: SimplicialMesh) -> CellLocator:
    locator = _LOCATORS.get(mesh)
    if locator is None:
        locator = CellLocator(mesh)
        _LOCATORS[mesh] = locator
    return locator


def locate_by_bfs(
    coarse: SimplicialMesh, start_cell: int, point: np.ndarray, radius: Optional[float] = None
) -> LocationResult:
    """
    Locate one point by breadth-first search over the cell neighbor graph.

    Args:
        coarse: mesh to search
        start_cell: first cell visited
        point: query coordinates
        radius: search radius; twice the start cell diameter when omitted

    Returns:
        LocationResult with the containing cell (inside) or the nearest cell (projected)

    Raises:
        ValueError: If start_cell is not a cell of the mesh
    """
    if not 0 <= start_cell < coarse.n_cells:
        raise ValueError(f"start cell {start_cell} out of range for {coarse.n_cells} cells")
    return locator_for(coarse).locate(int(start_cell), np.asarray(point, dtype=float), radius)


@dataclass
class PointLocations:
    cells: np.ndarray
    inside: np.ndarray
    steps: np.ndarray


def locate_points(
    coarse: SimplicialMesh,
    points: np.ndarray,
    hints: np.ndarray,
    radii: Optional[np.ndarray] = None,
) -> PointLocations:
    """
    Locate a point set, each point starting from its hint cell.

    Points inside their hint cell are resolved by one vectorized check; the rest go
    through the breadth-first search of ``locate_by_bfs``.
    """
    locator = locator_for(coarse)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    hints = np.asarray(hints, dtype=np.int64)
    k = len(points)
    cells = hints.copy()
    steps = np.ones(k, dtype=np.int64)
    inside = np.zeros(k, dtype=bool)
    if k == 0:
        return PointLocations(cells, inside, steps)

    inside = locator.barycentric(hints, points).min(axis=1) >= -BARYCENTRIC_TOL
    for i in np.flatnonzero(~inside):
        x = points[i]
        if radii is None:
            result = locator.locate(int(hints[i]), x)
        else:
            result = locator.locate(int(hints[i]), x, float(radii[i]))
        cells[i], inside[i], steps[i] = result.cell, result.inside, result.steps
    return PointLocations(cells, inside, steps)


def locate_brute_force(coarse: SimplicialMesh, points: np.ndarray) -> PointLocations:
    """Reference location by scanning every cell; the nearest cell when none contains a point."""
    locator = locator_for(coarse)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    k = len(points)
    cells = np.zeros(k, dtype=np.int64)
    inside = np.zeros(k, dtype=bool)
    all_cells = np.arange(coarse.n_cells)
    for i, x in enumerate(points):
        lam = locator.barycentric(all_cells, np.broadcast_to(x, (coarse.n_cells, coarse.dim)))
        containing = np.flatnonzero(lam.min(axis=1) >= -BARYCENTRIC_TOL)
        if len(containing):
            cells[i], inside[i] = containing[0], True
        else:
            dists = [locator.distance(c, x) for c in all_cells]
            cells[i] = int(np.argmin(dists))
    return PointLocations(cells, inside, np.full(k, coarse.n_cells, dtype=np.int64))


@dataclass
class LocationIndex:
    """Coarse cell holding each fine-cell barycenter, with search instrumentation."""

    cells: np.ndarray
    inside: np.ndarray
    hints: np.ndarray
    steps: np.ndarray


@dataclass
class ProlongationOperator:
    """
    P1 interpolation from a coarse level to the next finer one.

    Row i holds the coarse basis functions evaluated at fine vertex i; ``cells`` and
    ``inside`` record where each fine vertex was located.
    """

    matrix: sp.csr_matrix
    cells: np.ndarray
    inside: np.ndarray
    steps: np.ndarray
    cell_index: Optional[LocationIndex] = None

    @property
    def shape(self):
        return self.matrix.shape

    def prolongate(self, coarse_vec: np.ndarray) -> np.ndarray:
        return prolongate(self, coarse_vec)

    def restrict(self, fine_vec: np.ndarray) -> np.ndarray:
        return restrict(self, fine_vec)


def _best_hint(locator: CellLocator, candidates: np.ndarray, x: np.ndarray) -> int:
    """Candidate cell whose smallest barycentric coordinate of ``x`` is largest."""
    candidates = np.unique(candidates)
    if len(candidates) == 1:
        return int(candidates[0])
    lam = locator.barycentric(candidates, np.broadcast_to(x, (len(candidates), len(x))))
    return int(candidates[np.argmax(lam.min(axis=1))])


def _resolve_fine_cells(fine: SimplicialMesh, coarse: SimplicialMesh, vertex_map: np.ndarray) -> LocationIndex:
    """Outer loop: locate every fine barycenter in waves spreading from shared vertices."""
    n = fine.n_cells
    bary = fine.barycenters()
    diam = fine.cell_diameters
    cells = -np.ones(n, dtype=np.int64)
    inside = np.zeros(n, dtype=bool)
    hints = -np.ones(n, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    radii = np.zeros(n)

    shared = np.flatnonzero(vertex_map >= 0)
    if len(shared) == 0:
        raise MeshTopologyError("traversal could not cover mesh: the meshes share no vertices")
    fine_of_coarse = np.full(fine.n_vertices, -1, dtype=np.int64)
    fine_of_coarse[vertex_map[shared]] = shared
    locator = locator_for(coarse)
    for cf in range(n):
        around = [coarse.vertex_cells(int(cv)) for cv in fine_of_coarse[fine.cells[cf]] if cv >= 0]
        if around:
            hints[cf] = _best_hint(locator, np.concatenate(around), bary[cf])
            radii[cf] = 2.0 * diam[cf]

    graph = fine.cell_neighbor_graph
    wave = np.flatnonzero(hints >= 0)
    while len(wave):
        found = locate_points(coarse, bary[wave], hints[wave], radii[wave])
        cells[wave], inside[wave], steps[wave] = found.cells, found.inside, found.steps
        resolved = cells >= 0
        candidates = np.unique(graph[wave].indices)
        candidates = candidates[~resolved[candidates]]
        for cf in candidates:
            nbrs = graph.indices[graph.indptr[cf]:graph.indptr[cf + 1]]
            nbrs = nbrs[resolved[nbrs]]
            hints[cf] = _best_hint(locator, cells[nbrs], bary[cf])
            radii[cf] = diam[cf] + diam[nbrs].max()
        wave = candidates

    missing = np.flatnonzero(cells < 0)
    if len(missing):
        raise MeshTopologyError(
            f"traversal could not cover mesh: {len(missing)} fine cells unreachable (first {int(missing[0])})"
        )
    return LocationIndex(cells=cells, inside=inside, hints=hints, steps=steps)


def _projected_weights(coarse: SimplicialMesh, cell: int, x: np.ndarray) -> np.ndarray:
    """Clipped barycentric weights of the point of ``cell`` closest to ``x``."""
    locator = locator_for(coarse)
    projected = geometry.closest_point(locator.points[cell], x)
    lam = np.clip(locator.barycentric(np.array([cell]), projected[None, :])[0], 0.0, None)
    return lam / lam.sum()


def _assemble(fine, coarse, vertex_map, cells, inside) -> sp.csr_matrix:
    locator = locator_for(coarse)
    coincident = -np.ones(fine.n_vertices, dtype=np.int64)
    shared = np.flatnonzero(vertex_map >= 0)
    coincident[vertex_map[shared]] = shared

    rows, cols, vals = [], [], []
    plain = np.flatnonzero((coincident < 0) & inside)
    if len(plain):
        lam = locator.barycentric(cells[plain], fine.vertices[plain])
        k = coarse.dim + 1
        rows.append(np.repeat(plain, k))
        cols.append(coarse.cells[cells[plain]].ravel())
        vals.append(lam.ravel())
    for i in np.flatnonzero((coincident < 0) & ~inside):
        lam = _projected_weights(coarse, int(cells[i]), fine.vertices[i])
        rows.append(np.full(len(lam), i))
        cols.append(coarse.cells[cells[i]])
        vals.append(lam)
    unit = np.flatnonzero(coincident >= 0)
    rows.append(unit)
    cols.append(coincident[unit])
    vals.append(np.ones(len(unit)))

    matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(fine.n_vertices, coarse.n_vertices),
    )
    matrix.eliminate_zeros()
    matrix.sort_indices()
    return matrix


def build_prolongation(fine: SimplicialMesh, coarse: SimplicialMesh, brute_force: bool = False) -> ProlongationOperator:
    """
    Nodal P1 prolongation from ``coarse`` to ``fine``.

    Args:
        fine: finer level
        coarse: coarser level sharing vertices with ``fine``
        brute_force: locate every fine vertex by a full scan instead of traversal

    Returns:
        ProlongationOperator of shape (fine vertices, coarse vertices)

    Raises:
        MeshTopologyError: If part of the fine mesh cannot be reached by the traversal
    """
    vertex_map = nested_vertex_map(fine, coarse)
    coincident = -np.ones(fine.n_vertices, dtype=np.int64)
    shared = np.flatnonzero(vertex_map >= 0)
    coincident[vertex_map[shared]] = shared

    if brute_force:
        index = None
        found = locate_brute_force(coarse, fine.vertices)
        cells, inside, steps = found.cells, found.inside, found.steps
    else:
        index = _resolve_fine_cells(fine, coarse, vertex_map)
        first_cell = np.array([fine.vertex_cells(v)[0] for v in range(fine.n_vertices)], dtype=np.int64)
        hints = index.cells[first_cell]
        radii = 2.0 * fine.cell_diameters[first_cell]
        todo = np.flatnonzero(coincident < 0)
        cells = hints.copy()
        inside = np.ones(fine.n_vertices, dtype=bool)
        steps = np.zeros(fine.n_vertices, dtype=np.int64)
        found = locate_points(coarse, fine.vertices[todo], hints[todo], radii[todo])
        cells[todo], inside[todo], steps[todo] = found.cells, found.inside, found.steps

    unit = np.flatnonzero(coincident >= 0)
    for i in unit:
        cells[i] = coarse.vertex_cells(int(coincident[i]))[0]
        inside[i] = True

    matrix = _assemble(fine, coarse, vertex_map, cells, inside)
    projected = int((~inside).sum())
    logger.debug(
        f"Prolongation {fine.n_vertices}x{coarse.n_vertices}: {matrix.nnz} nonzeros, "
        f"{projected} projected rows, {int(steps.sum())} search steps"
    )
    return ProlongationOperator(matrix=matrix, cells=cells, inside=inside, steps=steps, cell_index=index)


def prolongate(op: ProlongationOperator, coarse_vec: np.ndarray) -> np.ndarray:
    """
    Raises:
        ValueError: If the vector length differs from the coarse dimension
    """
    coarse_vec = np.asarray(coarse_vec)
    if coarse_vec.shape[0] != op.shape[1]:
        raise ValueError(f"coarse vector has length {coarse_vec.shape[0]}, operator expects {op.shape[1]}")
    return op.matrix @ coarse_vec


def restrict(op: ProlongationOperator, fine_vec: np.ndarray) -> np.ndarray:
    """
    Raises:
        ValueError: If the vector length differs from the fine dimension
    """
    fine_vec = np.asarray(fine_vec)
    if fine_vec.shape[0] != op.shape[0]:
        raise ValueError(f"fine vector has length {fine_vec.shape[0]}, operator expects {op.shape[0]}")
    return op.matrix.T @ fine_vec
