"""
Mesh hierarchy construction and inter-level quality metrics.

Each level is produced from the previous one by staged coarsening, remeshing and
feature re-detection. Between adjacent levels the hierarchy records the overlap count
(how many fine cells a coarse cell intersects) and the length-scale ratios that the
multigrid convergence theory bounds.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from constants import (
    BARYCENTRIC_TOL,
    DEFAULT_BETA,
    DEFAULT_C_K,
    DEFAULT_MAX_LEVELS,
    DEFAULT_MIN_COARSE,
    SUFFICIENT_DECREASE_C_M,
)
from logger import setup_logger
from tools.coarsen import staged_coarsen
from tools.features import merge_inherited_features
from tools.mesh import SimplicialMesh, nested_vertex_map
from tools.remesh_base import RemeshConfig, RemeshReport
from tools.remesh_factory import remesh_with_report
from utils import geometry
from utils.environment import thread_count
from utils.mesh_io import read_mesh, write_mesh

logger = setup_logger(__name__)


class CoarseningError(RuntimeError):
    """Raised when the finest mesh cannot be coarsened at the requested beta."""


@dataclass
class OverlapMetrics:
    max_overlap: int
    max_lengthscale_ratio: float
    max_cell_ratio: float
    unlocated: int = 0


@dataclass
class LevelMetrics:
    """
    One row of the hierarchy quality table.

    ``max_overlap``, ``max_ratio`` and ``max_cell_ratio`` compare the level with the
    next finer one and are None on the finest level.
    """

    level: int
    cells: int
    vertices: int
    max_ar: float
    max_overlap: Optional[int] = None
    max_ratio: Optional[float] = None
    max_cell_ratio: Optional[float] = None
    retained: int = 0


def _vertex_scales(mesh: SimplicialMesh) -> np.ndarray:
    """Largest diameter among the cells incident to each vertex."""
    h = np.zeros(mesh.n_vertices)
    diam = mesh.cell_diameters
    for j in range(mesh.dim + 1):
        np.maximum.at(h, mesh.cells[:, j], diam)
    return h


class _OverlapScan:
    """Per-coarse-cell breadth-first scan of the fine cells intersecting it."""

    def __init__(self, fine: SimplicialMesh, coarse: SimplicialMesh):
        self.fine = fine
        self.coarse = coarse
        self.fine_pts = fine.cell_points()
        self.fine_bary = fine.barycenters()
        self.fine_diam = fine.cell_diameters
        self.fine_vertex_h = _vertex_scales(fine)
        self.coarse_pts = coarse.cell_points()
        self.coarse_diam = coarse.cell_diameters
        self.graph = fine.cell_neighbor_graph
        self.vertex_map = nested_vertex_map(fine, coarse)
        self._tree = None

    def _fallback_seeds(self, t: int) -> np.ndarray:
        if self._tree is None:
            self._tree = cKDTree(self.fine.vertices)
        _, v = self._tree.query(self.coarse_pts[t].mean(axis=0))
        return self.fine.vertex_cells(int(v))

    def _seeds(self, t: int) -> np.ndarray:
        fine_vertices = self.vertex_map[self.coarse.cells[t]]
        fine_vertices = fine_vertices[fine_vertices >= 0]
        if len(fine_vertices) == 0:
            return self._fallback_seeds(t)
        return np.unique(np.concatenate([self.fine.vertex_cells(int(v)) for v in fine_vertices]))

    def scan(self, cells: np.ndarray):
        n_fine = self.fine.n_cells
        mark = np.zeros(n_fine, dtype=bool)
        bary_found = np.zeros(n_fine, dtype=bool)
        vertex_found = np.zeros(self.fine.n_vertices, dtype=bool)
        overlap, ratio, cell_ratio = 0, 0.0, 0.0

        for t in cells:
            tau = self.coarse_pts[t]
            frontier = self._seeds(int(t))
            mark[frontier] = True
            touched = [frontier]
            hits_all = []
            while len(frontier):
                hits = frontier[geometry.simplices_intersect(tau, self.fine_pts[frontier])]
                if len(hits) == 0:
                    break
                hits_all.append(hits)
                nbrs = np.unique(self.graph[hits].indices)
                frontier = nbrs[~mark[nbrs]]
                mark[frontier] = True
                touched.append(frontier)
            for arr in touched:
                mark[arr] = False
            if not hits_all:
                continue

            s = np.concatenate(hits_all)
            h_tau = self.coarse_diam[t]
            overlap = max(overlap, len(s))
            cell_ratio = max(cell_ratio, float(h_tau / self.fine_diam[s].min()))

            inside = geometry.barycentric(tau, self.fine_bary[s]).min(axis=1) >= -BARYCENTRIC_TOL
            if inside.any():
                ratio = max(ratio, float(h_tau / self.fine_diam[s[inside]].min()))
                bary_found[s[inside]] = True

            verts = np.unique(self.fine.cells[s].ravel())
            inside = geometry.barycentric(tau, self.fine.vertices[verts]).min(axis=1) >= -BARYCENTRIC_TOL
            if inside.any():
                ratio = max(ratio, float(h_tau / self.fine_vertex_h[verts[inside]].min()))
                vertex_found[verts[inside]] = True

        return overlap, ratio, cell_ratio, bary_found, vertex_found


def overlap_metrics(fine: SimplicialMesh, coarse: SimplicialMesh, threads: Optional[int] = None) -> OverlapMetrics:
    """
    Overlap and length-scale comparability between two adjacent levels.

    For every coarse cell the fine cells intersecting it (closed intersection) are found
    by a breadth-first walk seeded at the fine cells around its vertices.
    ``max_lengthscale_ratio`` is the largest coarse/fine diameter ratio over fine-cell
    barycenters and fine vertices located in a coarse cell; ``max_cell_ratio`` is the
    largest coarse/fine diameter ratio over intersecting pairs.

    Args:
        fine: finer mesh
        coarse: coarser mesh covering approximately the same domain
        threads: worker threads; GRADEDMG_THREADS when omitted

    Returns:
        OverlapMetrics; samples not located in any coarse cell are counted in ``unlocated``
    """
    threads = threads or thread_count()
    scan = _OverlapScan(fine, coarse)
    order = np.arange(coarse.n_cells)
    chunks = [c for c in np.array_split(order, max(1, threads)) if len(c)]
    if len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(scan.scan, chunks))
    else:
        parts = [scan.scan(order)]

    bary_found = np.logical_or.reduce([p[3] for p in parts])
    vertex_found = np.logical_or.reduce([p[4] for p in parts])
    unlocated = int((~bary_found).sum() + (~vertex_found).sum())
    if unlocated:
        logger.debug(f"{unlocated} fine sample points lie outside the coarse mesh and were skipped")
    return OverlapMetrics(
        max_overlap=max(p[0] for p in parts),
        max_lengthscale_ratio=max(p[1] for p in parts),
        max_cell_ratio=max(p[2] for p in parts),
        unlocated=unlocated,
    )


def level_metrics(
    level: int,
    mesh: SimplicialMesh,
    finer: Optional[SimplicialMesh] = None,
    report: Optional[RemeshReport] = None,
) -> LevelMetrics:
    metrics = LevelMetrics(
        level=level,
        cells=mesh.n_cells,
        vertices=mesh.n_vertices,
        max_ar=float(mesh.aspect_ratios().max()),
        retained=len(report.retained) if report is not None else 0,
    )
    if finer is not None:
        overlap = overlap_metrics(finer, mesh)
        metrics.max_overlap = overlap.max_overlap
        metrics.max_ratio = overlap.max_lengthscale_ratio
        metrics.max_cell_ratio = overlap.max_cell_ratio
    return metrics


@dataclass
class MeshHierarchy:
    """Meshes M^0 (finest) ... M^n with their quality metrics."""

    levels: List[SimplicialMesh]
    metrics: List[LevelMetrics] = field(default_factory=list)
    reports: List[RemeshReport] = field(default_factory=list)
    beta: Optional[float] = None

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, k: int) -> SimplicialMesh:
        return self.levels[k]

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def finest(self) -> SimplicialMesh:
        return self.levels[0]

    @property
    def coarsest(self) -> SimplicialMesh:
        return self.levels[-1]

    def require_multilevel(self) -> None:
        """
        Raises:
            ValueError: If the hierarchy has fewer than two levels
        """
        if self.n_levels < 2:
            raise ValueError(
                f"hierarchy has a single level ({self.finest.n_vertices} vertices); "
                "a multigrid solve needs at least two"
            )

    def to_dataframe(self) -> pd.DataFrame:
        columns = list(LevelMetrics.__dataclass_fields__)
        return pd.DataFrame([asdict(m) for m in self.metrics], columns=columns)

    def format_table(self) -> str:
        df = self.to_dataframe()
        return df.to_string(
            index=False,
            na_rep="-",
            float_format=lambda x: f"{x:.3f}",
        )

    def write_csv(self, path: Union[str, Path]) -> None:
        self.to_dataframe().to_csv(path, index=False)
        logger.info(f"Wrote hierarchy quality table to {path}")

    def save(self, directory: Union[str, Path]) -> List[Path]:
        """Write ``level_XX.mesh`` for every level and ``quality.csv``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for k, mesh in enumerate(self.levels):
            path = directory / f"level_{k:02d}.mesh"
            write_mesh(mesh, path)
            paths.append(path)
        if self.metrics:
            self.write_csv(directory / "quality.csv")
        return paths

    @classmethod
    def load(
        cls,
        directory: Union[str, Path],
        curvature_threshold: float = DEFAULT_C_K,
        compute_metrics: bool = False,
    ) -> "MeshHierarchy":
        """
        Read the level files written by ``save``.

        Raises:
            FileNotFoundError: If the directory holds no level files
        """
        directory = Path(directory)
        files = sorted(directory.glob("level_*.mesh"))
        if not files:
            raise FileNotFoundError(f"No level_*.mesh files found in {directory}")
        levels = []
        for path in files:
            mesh = read_mesh(path)
            levels.append(merge_inherited_features(mesh, mesh.markers, mesh.ridge_edges, curvature_threshold))
        for k in range(1, len(levels)):
            levels[k].parent_index = nested_vertex_map(levels[k - 1], levels[k])
        metrics = []
        if compute_metrics:
            metrics = [level_metrics(k, m, levels[k - 1] if k else None) for k, m in enumerate(levels)]
        logger.info(f"Loaded {len(levels)}-level hierarchy from {directory}")
        return cls(levels=levels, metrics=metrics)


def build_hierarchy(
    mesh: SimplicialMesh,
    beta: Optional[float] = None,
    config: Optional[RemeshConfig] = None,
    min_vertices: Optional[int] = None,
    max_levels: int = DEFAULT_MAX_LEVELS,
    curvature_threshold: float = DEFAULT_C_K,
    compute_metrics: bool = True,
) -> MeshHierarchy:
    """
    Coarsen repeatedly until the mesh is small enough.

    Building stops when the coarsest level has at most ``min_vertices`` vertices, when
    ``max_levels`` levels exist, or when a new level fails sufficient decrease
    (cells_k <= C_m * cells_{k+1}); a failing coarse level below the first is discarded.

    Args:
        mesh: finest mesh with classified boundary features
        beta: coarsening parameter; 1.5 in 2D and 1.8 in 3D when omitted
        config: remeshing parameters
        min_vertices: target size of the coarsest level; 200 in 2D and 300 in 3D when omitted
        max_levels: cap on the number of levels, finest included
        curvature_threshold: C_K used when re-detecting features on coarse levels
        compute_metrics: compute overlap and length-scale metrics per level

    Returns:
        MeshHierarchy

    Raises:
        ValueError: If min_vertices < d + 2 or max_levels < 1
        CoarseningError: If the first coarse level removes no vertex or fails sufficient decrease
    """
    beta = DEFAULT_BETA[mesh.dim] if beta is None else beta
    min_vertices = DEFAULT_MIN_COARSE[mesh.dim] if min_vertices is None else min_vertices
    if min_vertices < mesh.dim + 2:
        raise ValueError(f"min_vertices must be at least {mesh.dim + 2}, got {min_vertices}")
    if max_levels < 1:
        raise ValueError(f"max_levels must be positive, got {max_levels}")

    levels = [mesh]
    reports: List[RemeshReport] = []
    metrics = [level_metrics(0, mesh)] if compute_metrics else []

    if mesh.n_vertices <= min_vertices:
        logger.warning(
            f"Mesh has {mesh.n_vertices} vertices, already at or below min_vertices={min_vertices}; "
            "hierarchy has a single level"
        )

    while levels[-1].n_vertices > min_vertices and len(levels) < max_levels:
        fine = levels[-1]
        keep = staged_coarsen(fine, beta)
        coarse, report = remesh_with_report(fine, keep, config)
        coarse = merge_inherited_features(coarse, coarse.markers, coarse.ridge_edges, curvature_threshold)

        if coarse.n_vertices == fine.n_vertices:
            if len(levels) == 1:
                raise CoarseningError(f"mesh not coarsenable at this beta ({beta})")
            logger.warning(f"Level {len(levels)} removed no vertices; stopping")
            break
        if fine.n_cells <= SUFFICIENT_DECREASE_C_M * coarse.n_cells:
            if len(levels) == 1:
                raise CoarseningError(
                    f"first coarse level fails sufficient decrease ({fine.n_cells} -> {coarse.n_cells} cells) "
                    f"at beta {beta}"
                )
            logger.warning(
                f"Level {len(levels)} fails sufficient decrease ({fine.n_cells} -> {coarse.n_cells} cells); "
                "discarding it and stopping"
            )
            break

        levels.append(coarse)
        reports.append(report)
        if compute_metrics:
            metrics.append(level_metrics(len(levels) - 1, coarse, fine, report))
        logger.info(
            f"Level {len(levels) - 1}: {coarse.n_vertices} vertices, {coarse.n_cells} cells "
            f"({len(report.retained)} retained)"
        )

    if levels[-1].n_vertices > min_vertices:
        logger.warning(
            f"Hierarchy stopped with {levels[-1].n_vertices} vertices on the coarsest level "
            f"(min_vertices={min_vertices})"
        )
    logger.info(f"Built {len(levels)}-level hierarchy from {mesh.n_vertices} vertices (beta={beta})")
    return MeshHierarchy(levels=levels, metrics=metrics, reports=reports, beta=beta)

