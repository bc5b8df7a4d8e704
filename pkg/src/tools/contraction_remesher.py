from typing import List, Optional, Set, Tuple

from logger import setup_logger
from tools.mesh import VertexKind, edge_key
from tools.remesh_base import BaseRemesher, RemeshConfig, RemeshReport, WorkingMesh, contraction_candidates

logger = setup_logger(__name__)


def contraction_cells(working: WorkingMesh, v: int, n: int) -> Tuple[List[int], List[Tuple[int, ...]]]:
    """Cells of v that collapse, and the cells of v rewritten with n in place of v."""
    collapsed, moved = [], []
    for cid in sorted(working.vertex_cells[v]):
        verts = working.cells[cid]
        if n in verts:
            collapsed.append(cid)
        else:
            moved.append(tuple(n if x == v else x for x in verts))
    return collapsed, moved


def evaluate_contraction(working: WorkingMesh, v: int, n: int, c_ar: float) -> Optional[float]:
    """
    Worst aspect ratio of the cells created by contracting v onto n.

    Returns:
        The worst new aspect ratio, or None when the contraction is infeasible
        (inverted or capped cells, topology change, or no collapsed cell)
    """
    collapsed, moved = contraction_cells(working, v, n)
    if not collapsed or not moved:
        return None
    if not working.oriented(moved).all():
        return None
    worst = float(working.aspect_ratios(moved).max())
    if not worst < c_ar:
        return None
    if not working.link_condition(v, n):
        return None
    return worst


def apply_contraction(working: WorkingMesh, v: int, n: int) -> Set[int]:
    """Contract v onto n in place; returns the vertices of the old star."""
    affected: Set[int] = set()
    for cid in sorted(working.vertex_cells[v]):
        verts = working.remove_cell(cid)
        affected.update(verts)
        if n not in verts:
            working.add_cell(tuple(n if x == v else x for x in verts))

    moved_ridges = [e for e in working.ridge_edges if v in e] if working.markers[v] >= VertexKind.RIDGE else []
    for a, b in moved_ridges:
        working.ridge_edges.discard((a, b))
        other = b if a == v else a
        if other != n:
            working.ridge_edges.add(edge_key(other, n))
    affected.discard(v)
    return affected


def remove_vertex_contract(
    working: WorkingMesh,
    v: int,
    config: RemeshConfig,
    report: Optional[RemeshReport] = None,
    candidates: Optional[List[int]] = None,
) -> Optional[Set[int]]:
    """
    Quality-conserving edge contraction of v.

    v is contracted onto the candidate neighbor whose new cells have the smallest
    worst aspect ratio, subject to positive orientation, the aspect-ratio cap and the
    link condition. Ties go to the lowest vertex index.

    Returns:
        Vertices whose link changed, or None if v is retained
    """
    if candidates is None:
        candidates = contraction_candidates(working, v)
    best_n, best_ar = None, float("inf")
    c_ar = config.cap(working.dim)
    for n in sorted(candidates):
        if report is not None:
            report.operations += len(working.vertex_cells[v])
        ar = evaluate_contraction(working, v, n, c_ar)
        if ar is not None and ar < best_ar:
            best_n, best_ar = n, ar
    if best_n is None:
        logger.debug(f"Vertex {v} retained: no feasible contraction among {len(candidates)} candidates")
        return None
    affected = apply_contraction(working, v, best_n)
    if report is not None:
        report.contractions += 1
    return affected


class ContractionRemesher(BaseRemesher):
    """3D remesher: every removal is a quality-conserving edge contraction."""

    def remove_vertex(self, working: WorkingMesh, v: int, report: RemeshReport) -> Optional[Set[int]]:
        return remove_vertex_contract(working, v, self.config, report, contraction_candidates(working, v))
