"""
2D vertex removal that keeps a Delaunay triangulation Delaunay.

An interior vertex is deleted by clipping Delaunay ears off its link polygon: an ear
(a, b, c) is taken when it is convex, the flip of edge v-b it corresponds to is valid
(v strictly left of a->c) and no link vertex lies strictly inside its circumcircle.
Each clipped ear is one edge flip reducing the degree of v; at degree three v is
deleted with the last triangle. Boundary vertices, and interior vertices whose ear
search stalls, fall back to a capped edge contraction followed by Lawson flips.
"""

from typing import List, Optional, Set, Tuple

from constants import ORIENTATION_EPS
from logger import setup_logger
from tools.contraction_remesher import remove_vertex_contract
from tools.mesh import VertexKind
from tools.remesh_base import BaseRemesher, RemeshReport, WorkingMesh, contraction_candidates
from utils.geometry import incircle, orient2d

logger = setup_logger(__name__)


def link_ring(working: WorkingMesh, v: int) -> Optional[List[int]]:
    """Counter-clockwise cycle of the neighbors of an interior vertex, None on the boundary."""
    successor = {}
    for cid in working.vertex_cells[v]:
        a, b, c = working.cells[cid]
        if a == v:
            successor[b] = c
        elif b == v:
            successor[c] = a
        else:
            successor[a] = b
    if not successor:
        return None
    start = min(successor)
    ring = [start]
    while True:
        nxt = successor.get(ring[-1])
        if nxt is None:
            return None
        if nxt == start:
            break
        ring.append(nxt)
        if len(ring) > len(successor):
            return None
    return ring if len(ring) == len(successor) else None


def _scale(coords, ring: List[int]) -> float:
    xs = [coords[i][0] for i in ring]
    ys = [coords[i][1] for i in ring]
    return max(max(xs) - min(xs), max(ys) - min(ys))


def delaunay_ears(working: WorkingMesh, v: int, ring: List[int]) -> Tuple[Optional[List[Tuple[int, int, int]]], int]:
    """
    Triangulate the link polygon of v by Delaunay ear clipping.

    Returns:
        (triangles or None when no valid ear exists, predicate evaluations)
    """
    coords = working.coords
    span = _scale(coords, ring)
    orient_tol = ORIENTATION_EPS * span * span
    circle_tol = ORIENTATION_EPS * span ** 4
    p = coords[v]
    poly = list(ring)
    triangles = []
    ops = 0
    while len(poly) > 3:
        chosen = None
        k = len(poly)
        for i in range(k):
            a, b, c = poly[i - 1], poly[i], poly[(i + 1) % k]
            pa, pb, pc = coords[a], coords[b], coords[c]
            ops += 2
            if orient2d(pa, pb, pc) <= orient_tol or orient2d(p, pa, pc) <= orient_tol:
                continue
            empty = True
            for q in ring:
                if q == a or q == b or q == c:
                    continue
                ops += 1
                if incircle(pa, pb, pc, coords[q]) > circle_tol:
                    empty = False
                    break
            if empty:
                chosen = i
                break
        if chosen is None:
            return None, ops
        triangles.append((poly[chosen - 1], poly[chosen], poly[(chosen + 1) % k]))
        poly.pop(chosen)
    a, b, c = poly
    ops += 1
    if orient2d(coords[a], coords[b], coords[c]) <= orient_tol:
        return None, ops
    triangles.append((a, b, c))
    return triangles, ops


def remove_vertex_2d(working: WorkingMesh, v: int, report: Optional[RemeshReport] = None) -> Optional[Set[int]]:
    """
    Delaunay-preserving deletion of an interior vertex.

    Returns:
        The link vertices, or None when v is on the boundary or no valid ear exists
    """
    ring = link_ring(working, v)
    if ring is None or len(ring) < 3:
        return None
    triangles, ops = delaunay_ears(working, v, ring)
    if report is not None:
        report.operations += ops
    if triangles is None:
        logger.debug(f"Ear clipping stalled at vertex {v} (degree {len(ring)})")
        return None
    for cid in sorted(working.vertex_cells[v]):
        working.remove_cell(cid)
    for tri in triangles:
        working.add_cell(tri)
    if report is not None:
        report.flips += len(ring) - 3
        report.delaunay_removals += 1
    return set(ring)


def _directed(cell: Tuple[int, int, int], a: int, b: int) -> Tuple[int, int, int]:
    """Rotate a CCW triangle containing {a, b} to (s, t, r) with s->t along the triangle."""
    for i in range(3):
        s, t, r = cell[i], cell[(i + 1) % 3], cell[(i + 2) % 3]
        if {s, t} == {a, b}:
            return s, t, r
    raise ValueError(f"edge ({a}, {b}) not in cell {cell}")


def legalize(working: WorkingMesh, edges: List[Tuple[int, int]], report: Optional[RemeshReport] = None) -> int:
    """
    Lawson flips until every edge reachable from ``edges`` is locally Delaunay.

    Returns:
        Number of flips performed
    """
    coords = working.coords
    stack = list(edges)
    flips = 0
    limit = 20 * len(stack) + 100
    while stack and flips < limit:
        a, b = stack.pop()
        shared = sorted(working.cells_with_edge(a, b))
        if len(shared) != 2:
            continue
        s, t, c = _directed(working.cells[shared[0]], a, b)
        t2 = working.cells[shared[1]]
        d = next(x for x in t2 if x != s and x != t)
        pts = [coords[s], coords[t], coords[c], coords[d]]
        span = max(max(q[0] for q in pts) - min(q[0] for q in pts), max(q[1] for q in pts) - min(q[1] for q in pts))
        if report is not None:
            report.operations += 1
        if incircle(coords[s], coords[t], coords[c], coords[d]) <= ORIENTATION_EPS * span ** 4:
            continue
        # s, t, c is CCW and d lies right of s->t: the quad is s, d, t, c.
        n1, n2 = (s, d, c), (d, t, c)
        tol = ORIENTATION_EPS * span * span
        if orient2d(coords[s], coords[d], coords[c]) <= tol or orient2d(coords[d], coords[t], coords[c]) <= tol:
            continue
        working.remove_cell(shared[0])
        working.remove_cell(shared[1])
        working.add_cell(n1)
        working.add_cell(n2)
        flips += 1
        stack.extend([(s, d), (d, t), (t, c), (c, s)])
    if report is not None:
        report.flips += flips
    return flips


def _star_edges(working: WorkingMesh, vertices: Set[int]) -> List[Tuple[int, int]]:
    edges = set()
    for v in vertices:
        for cid in working.vertex_cells[v]:
            a, b, c = working.cells[cid]
            edges.update({tuple(sorted(e)) for e in ((a, b), (b, c), (a, c))})
    return sorted(edges)


class DelaunayRemesher(BaseRemesher):
    """2D remesher: Delaunay deletion for interior vertices, boundary-edge contraction otherwise."""

    def remove_vertex(self, working: WorkingMesh, v: int, report: RemeshReport) -> Optional[Set[int]]:
        interior = working.markers[v] == VertexKind.INTERIOR
        if interior and self.config.delaunay_2d:
            affected = remove_vertex_2d(working, v, report)
            if affected is not None:
                return affected

        target_candidates = contraction_candidates(working, v)
        affected = remove_vertex_contract(working, v, self.config, report, target_candidates)
        if affected is None:
            return None
        legalize(working, _star_edges(working, affected), report)
        return affected
