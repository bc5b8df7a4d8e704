"""
Boundary feature classification: corners, ridges and plain boundary vertices.

2D: a boundary vertex is a corner when its interior angle differs from a straight
line by more than C_K. 3D: a vertex is a corner when the boundary facet angles around
it differ from 2*pi by more than C_K; a boundary edge is a ridge when the normals of
its two boundary facets differ by more than C_K; ridge vertices where ridges end,
branch or bend more than C_K are promoted to corners.
"""

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set

import numpy as np

from constants import DEFAULT_C_K
from logger import setup_logger
from tools.mesh import Edge, MeshTopologyError, SimplicialMesh, VertexKind, edge_key

logger = setup_logger(__name__)


@dataclass
class FeatureMarkers:
    markers: np.ndarray
    ridge_edges: Set[Edge] = field(default_factory=set)

    def count(self, kind: VertexKind) -> int:
        return int((self.markers == kind).sum())


def _corner_angles(points: np.ndarray) -> np.ndarray:
    """Angle at every corner of every simplex face stack (m, k, d), k = 3."""
    angles = np.empty(points.shape[:2])
    k = points.shape[1]
    for i in range(k):
        a = points[:, (i + 1) % k] - points[:, i]
        b = points[:, (i + 2) % k] - points[:, i]
        cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        angles[:, i] = np.arccos(np.clip(cos, -1.0, 1.0))
    return angles


def _angle_between(u: np.ndarray, v: np.ndarray) -> float:
    cos = float(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def _detect_2d(mesh: SimplicialMesh, c_k: float) -> FeatureMarkers:
    n = mesh.n_vertices
    facets = mesh.boundary_facets
    counts = np.bincount(facets.ravel(), minlength=n)
    boundary = np.flatnonzero(counts > 0)
    bad = boundary[counts[boundary] != 2]
    if len(bad):
        raise MeshTopologyError(
            f"non-manifold boundary: vertex {int(bad[0])} has {int(counts[bad[0]])} boundary edges"
        )

    angles = _corner_angles(mesh.cell_points())
    interior_angle = np.bincount(mesh.cells.ravel(), weights=angles.ravel(), minlength=n)

    markers = np.zeros(n, dtype=np.int8)
    markers[boundary] = VertexKind.BOUNDARY
    deviation = np.abs(np.pi - interior_angle[boundary])
    markers[boundary[deviation > c_k]] = VertexKind.CORNER
    return FeatureMarkers(markers=markers, ridge_edges=set())


def _detect_3d(mesh: SimplicialMesh, c_k: float) -> FeatureMarkers:
    n = mesh.n_vertices
    facets = mesh.boundary_facets
    normals = mesh.boundary_facet_normals()

    edge_facets: Dict[Edge, List[int]] = defaultdict(list)
    for f, (a, b, c) in enumerate(facets.tolist()):
        edge_facets[edge_key(a, b)].append(f)
        edge_facets[edge_key(b, c)].append(f)
        edge_facets[edge_key(a, c)].append(f)
    for e, owners in edge_facets.items():
        if len(owners) != 2:
            raise MeshTopologyError(
                f"non-manifold boundary: edge {e} lies on {len(owners)} boundary facets"
            )

    angles = _corner_angles(mesh.vertices[facets])
    angle_sum = np.bincount(facets.ravel(), weights=angles.ravel(), minlength=n)
    boundary = np.unique(facets)

    markers = np.zeros(n, dtype=np.int8)
    markers[boundary] = VertexKind.BOUNDARY

    ridge_edges: Set[Edge] = set()
    for e, (f1, f2) in edge_facets.items():
        if _angle_between(normals[f1], normals[f2]) > c_k:
            ridge_edges.add(e)

    ridge_neighbors: Dict[int, List[int]] = defaultdict(list)
    for a, b in ridge_edges:
        ridge_neighbors[a].append(b)
        ridge_neighbors[b].append(a)
    for v, others in ridge_neighbors.items():
        if len(others) != 2:
            markers[v] = VertexKind.CORNER
            continue
        p = mesh.vertices[v]
        bend = np.pi - _angle_between(mesh.vertices[others[0]] - p, mesh.vertices[others[1]] - p)
        markers[v] = VertexKind.CORNER if bend > c_k else VertexKind.RIDGE

    curvature = np.abs(2.0 * np.pi - angle_sum[boundary])
    markers[boundary[curvature > c_k]] = VertexKind.CORNER
    return FeatureMarkers(markers=markers, ridge_edges=ridge_edges)


def detect_features(mesh: SimplicialMesh, curvature_threshold: float = DEFAULT_C_K) -> FeatureMarkers:
    """
    Classify boundary vertices (and, in 3D, ridge edges) of a mesh.

    Args:
        mesh: mesh with a closed manifold boundary
        curvature_threshold: C_K in radians

    Returns:
        FeatureMarkers with per-vertex VertexKind codes and the ridge edge set

    Raises:
        MeshTopologyError: If the boundary is not a closed manifold
    """
    if curvature_threshold <= 0:
        raise ValueError(f"curvature threshold must be positive, got {curvature_threshold}")
    features = _detect_2d(mesh, curvature_threshold) if mesh.dim == 2 else _detect_3d(mesh, curvature_threshold)
    logger.debug(
        f"Detected {features.count(VertexKind.CORNER)} corners, "
        f"{features.count(VertexKind.RIDGE)} ridge vertices, {len(features.ridge_edges)} ridge edges"
    )
    return features


def classify(mesh: SimplicialMesh, curvature_threshold: float = DEFAULT_C_K) -> SimplicialMesh:
    """Mesh copy carrying freshly detected features."""
    features = detect_features(mesh, curvature_threshold)
    return mesh.with_features(features.markers, features.ridge_edges)


def merge_inherited_features(
    coarse: SimplicialMesh,
    inherited_markers: np.ndarray,
    inherited_ridges: Optional[Set[Edge]] = None,
    curvature_threshold: float = DEFAULT_C_K,
) -> SimplicialMesh:
    """
    Combine features carried over from the finer level with features detected anew.

    Markers merge by precedence (corner > ridge > boundary > interior) on vertices that
    are on the coarse boundary; inherited ridge edges survive while they are still
    edges of the coarse mesh.
    """
    detected = detect_features(coarse, curvature_threshold)
    merged = np.maximum(detected.markers, np.asarray(inherited_markers, dtype=np.int8))
    merged[~coarse.boundary_vertex_mask] = VertexKind.INTERIOR

    ridges = set(detected.ridge_edges)
    if inherited_ridges:
        mesh_edges = {(int(a), int(b)) for a, b in coarse.edges}
        ridges |= {e for e in inherited_ridges if e in mesh_edges}

    promoted = int((merged > detected.markers).sum())
    if promoted:
        logger.debug(f"Kept {promoted} inherited feature markers stronger than re-detection")
    return coarse.with_features(merged, ridges)
