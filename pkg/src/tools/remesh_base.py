from abc import ABC, abstractmethod
from collections import defaultdict, deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import numpy as np

from constants import DEFAULT_C_AR_2D, DEFAULT_C_AR_3D, MIN_ASPECT_RATIO
from logger import setup_logger
from tools.mesh import Edge, SimplicialMesh, VertexKind, edge_key
from utils import geometry

logger = setup_logger(__name__)

OMEGA = -1  # virtual vertex coning off the boundary in link tests


@dataclass
class RemeshConfig:
    """
    Remeshing parameters.

    Attributes:
        c_ar_3d: aspect-ratio cap for cells created by 3D contractions
        c_ar_2d: aspect-ratio cap for 2D fallback and boundary contractions
        delaunay_2d: remove interior 2D vertices by Delaunay deletion
        retry: re-attempt retained vertices when their link changes
    """

    c_ar_3d: float = DEFAULT_C_AR_3D
    c_ar_2d: float = DEFAULT_C_AR_2D
    delaunay_2d: bool = True
    retry: bool = True

    def __post_init__(self):
        if self.c_ar_2d <= MIN_ASPECT_RATIO[2]:
            raise ValueError(f"2D aspect-ratio cap must exceed {MIN_ASPECT_RATIO[2]:.4f}, got {self.c_ar_2d}")
        if self.c_ar_3d <= MIN_ASPECT_RATIO[3]:
            raise ValueError(f"3D aspect-ratio cap must exceed {MIN_ASPECT_RATIO[3]:.4f}, got {self.c_ar_3d}")

    def cap(self, dim: int) -> float:
        return self.c_ar_2d if dim == 2 else self.c_ar_3d


@dataclass
class RemeshReport:
    removed: int = 0
    retained: List[int] = field(default_factory=list)
    attempts: int = 0
    flips: int = 0
    contractions: int = 0
    delaunay_removals: int = 0
    operations: int = 0

    def summary(self) -> str:
        return (
            f"removed {self.removed}, retained {len(self.retained)}, attempts {self.attempts}, "
            f"flips {self.flips}, contractions {self.contractions}"
        )


def _faces(vertices: Iterable[int]) -> Set[FrozenSet[int]]:
    vertices = tuple(vertices)
    return {frozenset(s) for k in range(1, len(vertices) + 1) for s in combinations(vertices, k)}


class WorkingMesh:
    """
    Mutable cell soup used while vertices are removed.

    Cells keep the vertex order they were created with, so replacing a vertex in
    place keeps the orientation sign of the tuple.
    """

    def __init__(self, mesh: SimplicialMesh):
        self.source = mesh
        self.dim = mesh.dim
        self.points = mesh.vertices
        self.coords = mesh.vertices.tolist()
        self.markers = mesh.markers.copy()
        self.ridge_edges: Set[Edge] = set(mesh.ridge_edges)
        self.cells: Dict[int, Tuple[int, ...]] = {i: tuple(c) for i, c in enumerate(mesh.cells.tolist())}
        self.vertex_cells: List[Set[int]] = [set() for _ in range(mesh.n_vertices)]
        for cid, verts in self.cells.items():
            for v in verts:
                self.vertex_cells[v].add(cid)
        self.alive = np.ones(mesh.n_vertices, dtype=bool)
        self._next_id = mesh.n_cells

    def add_cell(self, verts: Tuple[int, ...]) -> int:
        cid = self._next_id
        self._next_id += 1
        self.cells[cid] = tuple(verts)
        for v in verts:
            self.vertex_cells[v].add(cid)
        return cid

    def remove_cell(self, cid: int) -> Tuple[int, ...]:
        verts = self.cells.pop(cid)
        for v in verts:
            self.vertex_cells[v].discard(cid)
        return verts

    def neighbors(self, v: int) -> Set[int]:
        out: Set[int] = set()
        for cid in self.vertex_cells[v]:
            out.update(self.cells[cid])
        out.discard(v)
        return out

    def cells_with_edge(self, a: int, b: int) -> Set[int]:
        return self.vertex_cells[a] & self.vertex_cells[b]

    def boundary_facets_at(self, v: int) -> List[Tuple[int, ...]]:
        """Facets containing v that belong to exactly one cell."""
        counts: Dict[FrozenSet[int], int] = defaultdict(int)
        for cid in self.vertex_cells[v]:
            verts = self.cells[cid]
            for drop in verts:
                if drop == v:
                    continue
                counts[frozenset(x for x in verts if x != drop)] += 1
        return [tuple(sorted(f)) for f, n in counts.items() if n == 1]

    def is_boundary_vertex(self, v: int) -> bool:
        return bool(self.boundary_facets_at(v))

    def is_boundary_edge(self, a: int, b: int) -> bool:
        return any(b in f for f in self.boundary_facets_at(a))

    def extended_link(self, simplex: Tuple[int, ...]) -> Set[FrozenSet[int]]:
        """
        Link of a vertex or edge, with the boundary coned to a virtual vertex.
        """
        s = set(simplex)
        anchor = simplex[0]
        link: Set[FrozenSet[int]] = set()
        for cid in self.vertex_cells[anchor]:
            verts = self.cells[cid]
            if s.issubset(verts):
                rest = [x for x in verts if x not in s]
                if rest:
                    link |= _faces(rest)
        boundary = [f for f in self.boundary_facets_at(anchor) if s.issubset(f)]
        if boundary:
            link.add(frozenset([OMEGA]))
            for f in boundary:
                rest = [x for x in f if x not in s]
                for face in _faces(rest) if rest else ():
                    link.add(face | {OMEGA})
        return link

    def link_condition(self, v: int, n: int) -> bool:
        """Edge (v, n) can be contracted without changing the topology."""
        return (self.extended_link((v,)) & self.extended_link((n,))) == self.extended_link((v, n))

    def aspect_ratios(self, cells: List[Tuple[int, ...]]) -> np.ndarray:
        return geometry.aspect_ratios(self.points[np.array(cells)])

    def oriented(self, cells: List[Tuple[int, ...]]) -> np.ndarray:
        return geometry.is_positively_oriented(self.points[np.array(cells)])

    def to_mesh(self) -> SimplicialMesh:
        """Compact surviving vertices (node-nested: coordinates copied bitwise)."""
        used = np.zeros(len(self.alive), dtype=bool)
        ordered = [self.cells[cid] for cid in sorted(self.cells)]
        cells = np.array(ordered, dtype=np.int64).reshape(-1, self.dim + 1)
        used[cells.ravel()] = True
        old = np.flatnonzero(used & self.alive)
        new_index = -np.ones(len(self.alive), dtype=np.int64)
        new_index[old] = np.arange(len(old))
        ridges = [
            (int(new_index[a]), int(new_index[b]))
            for a, b in self.ridge_edges
            if new_index[a] >= 0 and new_index[b] >= 0
        ]
        return SimplicialMesh(
            self.points[old],
            new_index[cells],
            markers=self.markers[old],
            ridge_edges=ridges,
            parent_index=old,
            metadata=dict(self.source.metadata),
        )


def contraction_candidates(working: WorkingMesh, v: int) -> List[int]:
    """Neighbors v may be contracted onto, restricted to its boundary feature."""
    kind = working.markers[v]
    nbrs = sorted(working.neighbors(v))
    if kind == VertexKind.CORNER:
        return []
    if kind == VertexKind.RIDGE:
        return [n for n in nbrs if edge_key(v, n) in working.ridge_edges]
    if kind == VertexKind.BOUNDARY:
        return [
            n for n in nbrs
            if working.markers[n] >= VertexKind.BOUNDARY and working.is_boundary_edge(v, n)
        ]
    return nbrs


class BaseRemesher(ABC):
    """
    Removes the vertices outside a kept set, one at a time.

    Subclasses implement ``remove_vertex``; the driver handles ordering, the retry
    queue for retained vertices and the final compaction.
    """

    def __init__(self, config: Optional[RemeshConfig] = None):
        self.config = config or RemeshConfig()

    @abstractmethod
    def remove_vertex(self, working: WorkingMesh, v: int, report: RemeshReport) -> Optional[Set[int]]:
        """
        Remove one vertex.

        Returns:
            The vertices whose link changed, or None when the vertex was retained
        """

    def remesh(self, mesh: SimplicialMesh, keep: Iterable[int]) -> Tuple[SimplicialMesh, RemeshReport]:
        """
        Remove every vertex not in ``keep``.

        Raises:
            ValueError: If a corner vertex is scheduled for removal
        """
        keep_mask = np.zeros(mesh.n_vertices, dtype=bool)
        keep_mask[np.asarray(list(keep), dtype=np.int64)] = True
        dropped_corners = np.flatnonzero(~keep_mask & (mesh.markers == VertexKind.CORNER))
        if len(dropped_corners):
            raise ValueError(f"corner vertex {int(dropped_corners[0])} cannot be removed")

        working = WorkingMesh(mesh)
        report = RemeshReport()
        queue = deque(np.flatnonzero(~keep_mask).tolist())
        attempts: Dict[int, int] = defaultdict(int)
        budget: Dict[int, int] = {}
        waiting: Set[int] = set()

        while queue:
            v = queue.popleft()
            if not working.alive[v]:
                continue
            attempts[v] += 1
            report.attempts += 1
            affected = self.remove_vertex(working, v, report)
            if affected is not None:
                working.alive[v] = False
                report.removed += 1
                for u in sorted(affected & waiting):
                    waiting.discard(u)
                    queue.append(u)
                continue
            budget.setdefault(v, max(1, len(working.neighbors(v))))
            if self.config.retry and attempts[v] < budget[v]:
                waiting.add(v)

        report.retained = sorted(int(v) for v in np.flatnonzero(~keep_mask) if working.alive[v])
        if report.retained:
            logger.warning(f"Remeshing retained {len(report.retained)} vertices that could not be removed")
            logger.debug(f"Retained vertices: {report.retained[:50]}")
        coarse = working.to_mesh()
        logger.info(f"Remeshed {mesh.n_vertices} -> {coarse.n_vertices} vertices: {report.summary()}")
        return coarse, report
