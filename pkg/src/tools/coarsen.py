"""
Graph coarsening: pick coarse vertices satisfying the graph spacing condition.

Every vertex v carries a spacing radius Sp(v), half its shortest incident edge. Two
vertices joined by a graph edge violate the spacing condition when
beta * (Sp(v1) + Sp(v2)) >= dist(v1, v2), so beta just above sqrt(d) keeps every other
vertex of a structured grid. Vertices are visited in a fixed order; a visit includes the
vertex, excludes every unknown neighbor that violates the condition and contracts its
edges onto the visited vertex. The pass runs in time linear in the number of vertices
and edges.
"""

import math
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, List, Optional, Set

import numpy as np

from constants import BETA_0
from logger import setup_logger
from tools.mesh import SimplicialMesh, VertexKind, spacing_function

logger = setup_logger(__name__)


class VertexStatus(IntEnum):
    UNKNOWN = 0
    INCLUDED = 1
    EXCLUDED = 2


@dataclass
class CoarseningState:
    """
    Mutable coarsening graph with per-vertex status.

    ``graph`` holds adjacency sets over the vertices taking part in the pass; vertices
    outside the pass have empty sets and are never visited.
    """

    graph: List[Set[int]]
    status: np.ndarray
    spacing: np.ndarray
    points: np.ndarray
    beta: float
    forced: Set[int] = field(default_factory=set)
    edge_visit_counter: int = 0
    edges_created: int = 0
    contractions: int = 0
    contraction_edges: Set[tuple] = field(default_factory=set)
    initial_edges: int = 0
    _coords: list = field(init=False, repr=False)
    _sp: list = field(init=False, repr=False)

    def __post_init__(self):
        self._coords = np.asarray(self.points, dtype=float).tolist()
        self._sp = np.asarray(self.spacing, dtype=float).tolist()

    @classmethod
    def from_edges(
        cls,
        points: np.ndarray,
        edges: Iterable,
        spacing: np.ndarray,
        beta: float,
    ) -> "CoarseningState":
        graph: List[Set[int]] = [set() for _ in range(len(points))]
        count = 0
        for a, b in edges:
            a, b = int(a), int(b)
            if a == b or b in graph[a]:
                continue
            graph[a].add(b)
            graph[b].add(a)
            count += 1
        return cls(
            graph=graph,
            status=np.full(len(points), VertexStatus.UNKNOWN, dtype=np.int8),
            spacing=np.asarray(spacing, dtype=float),
            points=np.asarray(points, dtype=float),
            beta=float(beta),
            initial_edges=count,
        )

    def included(self) -> np.ndarray:
        return np.flatnonzero(self.status == VertexStatus.INCLUDED)

    def edge_count(self) -> int:
        return sum(len(s) for s in self.graph) // 2


def graph_spacing_violated(state: CoarseningState, v1: int, v2: int) -> bool:
    """
    True when beta * (Sp(v1) + Sp(v2)) >= dist(v1, v2).

    Raises:
        ValueError: If v1 == v2
    """
    if v1 == v2:
        raise ValueError("spacing test needs two distinct vertices")
    state.edge_visit_counter += 1
    dist = math.dist(state._coords[v1], state._coords[v2])
    return state.beta * (state._sp[v1] + state._sp[v2]) >= dist


def _contract(state: CoarseningState, v: int, w: int, pending: deque) -> None:
    """Exclude w and move its edges onto v."""
    graph = state.graph
    state.status[w] = VertexStatus.EXCLUDED
    state.contractions += 1
    for u in graph[w]:
        graph[u].discard(w)
        if u == v or u in graph[v]:
            continue
        graph[v].add(u)
        graph[u].add(v)
        state.edges_created += 1
        state.contraction_edges.add((min(u, v), max(u, v)))
        pending.append(u)
    graph[w].clear()


def visit_vertex(state: CoarseningState, v: int) -> CoarseningState:
    """
    Coarsen the neighborhood of ``v`` until its unknown neighbors satisfy the condition.

    v is included first. Unknown neighbors violating the condition are then excluded
    and contracted onto v. Included neighbors are never removed, so an edge created by
    a contraction may join v to an included vertex that violates the condition; such
    edges are recorded in ``contraction_edges``.

    Raises:
        RuntimeError: If v was already excluded
    """
    if state.status[v] == VertexStatus.EXCLUDED:
        raise RuntimeError(f"vertex {v} is excluded and cannot be visited")

    state.status[v] = VertexStatus.INCLUDED
    graph = state.graph
    pending = deque(sorted(graph[v]))
    while pending:
        w = pending.popleft()
        if w not in graph[v] or state.status[w] != VertexStatus.UNKNOWN:
            continue
        if graph_spacing_violated(state, v, w):
            _contract(state, v, w, pending)
    return state


@dataclass
class CoarseningResult:
    included: np.ndarray
    state: CoarseningState

    @property
    def edge_tests(self) -> int:
        return self.state.edge_visit_counter


def spacing_radius(mesh: SimplicialMesh) -> np.ndarray:
    """Half the shortest incident edge of every vertex."""
    return 0.5 * spacing_function(mesh)


def _check_beta(beta: float, dim: int) -> None:
    if beta <= 1.0:
        raise ValueError(f"beta must be greater than 1, got {beta}")
    if beta <= BETA_0[dim]:
        logger.warning(
            f"beta={beta} is at or below {BETA_0[dim]:.4f}; coarsening may be slower than 2:1"
        )


def coarsen_graph(state: CoarseningState, forced: Iterable[int], order: Iterable[int]) -> np.ndarray:
    """
    Visit forced vertices first, then ``order``; return the included vertices.
    """
    forced = sorted({int(v) for v in forced})
    state.forced = set(forced)
    for v in forced:
        state.status[v] = VertexStatus.INCLUDED
    for v in forced:
        visit_vertex(state, v)
    for v in order:
        if state.status[v] == VertexStatus.UNKNOWN:
            visit_vertex(state, int(v))
    return state.included()


def select_coarse_vertices(
    mesh: SimplicialMesh,
    beta: float,
    forced_included: Iterable[int] = (),
    spacing: Optional[np.ndarray] = None,
    edges: Optional[Iterable] = None,
    participants: Optional[np.ndarray] = None,
) -> CoarseningResult:
    """
    Run one coarsening pass.

    Args:
        mesh: mesh supplying coordinates and (by default) the graph edges
        beta: coarsening parameter, > 1
        forced_included: vertices included automatically and visited first
        spacing: Sp values; ``spacing_radius(mesh)`` when omitted
        edges: graph edges; the mesh edges when omitted
        participants: vertices taking part in the pass; all vertices when omitted

    Returns:
        CoarseningResult with the included vertices and the final state
    """
    _check_beta(beta, mesh.dim)
    if spacing is None:
        spacing = spacing_radius(mesh)
    if edges is None:
        edges = mesh.edges
    forced = np.unique(np.asarray(list(forced_included), dtype=np.int64))
    if participants is None:
        order = np.arange(mesh.n_vertices)
    else:
        order = np.unique(np.asarray(participants, dtype=np.int64))
        members = np.zeros(mesh.n_vertices, dtype=bool)
        members[order] = True
        members[forced] = True
        edges = [(a, b) for a, b in edges if members[a] and members[b]]

    state = CoarseningState.from_edges(mesh.vertices, edges, spacing, beta)
    included = coarsen_graph(state, forced.tolist(), order)
    logger.debug(
        f"Coarsening pass: {len(included)}/{len(np.union1d(order, forced))} included, "
        f"{state.contractions} contractions, {state.edge_visit_counter} edge tests"
    )
    return CoarseningResult(included=included, state=state)


def spacing_violations(state: CoarseningState) -> List[tuple]:
    """Graph edges between included, non-forced vertices that violate the condition."""
    out = []
    for v, nbrs in enumerate(state.graph):
        if state.status[v] != VertexStatus.INCLUDED or v in state.forced:
            continue
        for u in nbrs:
            if u > v and state.status[u] == VertexStatus.INCLUDED and u not in state.forced:
                d = state.points[v] - state.points[u]
                if state.beta * (state.spacing[v] + state.spacing[u]) >= float(np.sqrt(d @ d)):
                    out.append((v, u))
    return out


@dataclass
class StagedCoarsening:
    keep: np.ndarray
    stages: List[CoarseningResult]


def _boundary_graph_edges(mesh: SimplicialMesh) -> list:
    return sorted(mesh.boundary_edges)


def staged_coarsen(mesh: SimplicialMesh, beta: float, return_stages: bool = False):
    """
    Staged coarsening preserving boundary features.

    Stage 1 visits the interior with every boundary vertex forced. Stage 2 visits the
    boundary surface graph with ridge and corner vertices forced. In 3D, stage 3 visits
    the ridge graph with corners forced. Corners are included in every stage.

    Returns:
        Sorted array of kept vertex indices, or StagedCoarsening when ``return_stages``
    """
    spacing = spacing_radius(mesh)
    markers = mesh.markers
    boundary = np.flatnonzero(markers >= VertexKind.BOUNDARY)
    interior = np.flatnonzero(markers == VertexKind.INTERIOR)
    features = np.flatnonzero(markers >= VertexKind.RIDGE)
    corners = np.flatnonzero(markers == VertexKind.CORNER)

    stages = []
    interior_stage = select_coarse_vertices(
        mesh, beta, forced_included=boundary, spacing=spacing, participants=interior
    )
    stages.append(interior_stage)
    keep = set(interior_stage.included.tolist()) - set(boundary.tolist())

    forced_boundary = features if mesh.dim == 3 else corners
    boundary_stage = select_coarse_vertices(
        mesh,
        beta,
        forced_included=forced_boundary,
        spacing=spacing,
        edges=_boundary_graph_edges(mesh),
        participants=boundary,
    )
    stages.append(boundary_stage)
    surviving_boundary = set(boundary_stage.included.tolist())

    if mesh.dim == 3:
        ridge_stage = select_coarse_vertices(
            mesh,
            beta,
            forced_included=corners,
            spacing=spacing,
            edges=sorted(mesh.ridge_edges),
            participants=features,
        )
        stages.append(ridge_stage)
        surviving_boundary -= set(features.tolist())
        surviving_boundary |= set(ridge_stage.included.tolist())

    keep |= surviving_boundary
    keep |= set(corners.tolist())
    kept = np.array(sorted(keep), dtype=np.int64)
    logger.info(
        f"Staged coarsening kept {len(kept)}/{mesh.n_vertices} vertices "
        f"({len(corners)} corners, beta={beta})"
    )
    if return_stages:
        return StagedCoarsening(keep=kept, stages=stages)
    return kept
