"""
Model-domain mesh generators with a priori grading toward the reentrant feature.

Pacman (2D): the unit disk with the wedge of angles (9*pi/5, 2*pi) removed, meshed by
rings of vertices whose spacing follows h(r) = clamp(c * r^(1 - mu), h_min, h_max) and
triangulated with scipy's Delaunay. Fichera (3D): [-1, 1]^3 with the octant x, y, z > 0
removed, meshed by a graded tensor grid whose hexahedra are each split into six
tetrahedra. The size constant c is fitted by bisection to the requested vertex count.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.spatial import Delaunay

from constants import ORIENTATION_EPS
from logger import setup_logger
from tools.features import classify
from tools.mesh import SimplicialMesh
from utils import geometry

logger = setup_logger(__name__)

PACMAN_ANGLE = 9.0 * math.pi / 5.0
FICHERA_ANGLE = 3.0 * math.pi / 2.0
DEFAULT_DEPTH = {2: 1e-4, 3: 0.03}
TARGET_TOLERANCE = 0.25
MIN_TARGET_VERTICES = 50


def mu_for_angle(theta_r: float) -> float:
    """
    Smallest admissible grading exponent for a reentrant angle.

    Raises:
        ValueError: If theta_r < pi ("not reentrant")
    """
    if theta_r < math.pi - 1e-14:
        raise ValueError(f"angle {theta_r} is not reentrant (must be at least pi)")
    return min(1.0, math.pi / theta_r)


@dataclass
class GradingSpec:
    """
    Grading law parameters.

    ``c_a`` and ``c_b`` multiply the fitted size constant to give the documented
    envelope C_a * r^(1-mu) <= h <= C_b * r^(1-mu). ``depth`` is the distance from the
    singular feature below which the grading law is frozen (h_min = c * depth^(1-mu)).
    """

    mu: float
    h_max: float = 1.0
    c_a: float = 0.25
    c_b: float = 3.0
    depth: Optional[float] = None
    reentrant_point: Tuple[float, ...] = (0.0, 0.0)
    reentrant_edges: Tuple[Tuple[float, float, float], ...] = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))

    def __post_init__(self):
        if not 0.0 < self.mu <= 1.0:
            raise ValueError(f"mu must lie in (0, 1], got {self.mu}")
        if self.h_max <= 0.0:
            raise ValueError(f"h_max must be positive, got {self.h_max}")
        if self.c_a <= 0.0 or not math.isfinite(self.c_b) or self.c_b <= 0.0:
            raise ValueError("grading envelope constants must be positive and finite")
        if self.depth is not None and not 0.0 < self.depth < 1.0:
            raise ValueError(f"depth must lie in (0, 1), got {self.depth}")

    @classmethod
    def pacman(cls, graded: bool = True, **overrides) -> "GradingSpec":
        mu = mu_for_angle(PACMAN_ANGLE) if graded else 1.0
        return cls(mu=mu, **overrides)

    @classmethod
    def fichera(cls, graded: bool = True, **overrides) -> "GradingSpec":
        mu = mu_for_angle(FICHERA_ANGLE) if graded else 1.0
        overrides.setdefault("h_max", 0.5)
        return cls(mu=mu, reentrant_point=(0.0, 0.0, 0.0), **overrides)


@dataclass
class SizeFunction:
    """h(r) = clamp(c * r^(1-mu), h_min, h_max) with h_min = c * depth^(1-mu)."""

    c: float
    mu: float
    h_max: float
    depth: float

    @property
    def h_min(self) -> float:
        return min(self.h_max, self.c * self.depth ** (1.0 - self.mu))

    def __call__(self, r):
        r = np.maximum(np.asarray(r, dtype=float), self.depth)
        return np.clip(self.c * r ** (1.0 - self.mu), self.h_min, self.h_max)

    def envelope_constant(self, dim: int, c_b: float) -> float:
        """C_b of the upper envelope h <= C_b * max(r, h_min)^(1-mu) met by the generator."""
        if dim == 2:
            return c_b * self.c
        s_max = self.h_max
        return math.sqrt(3.0) * s_max / self.h_min ** (1.0 - self.mu)


def _fit_size_constant(count: Callable[[float], int], target: int, c_max: float) -> Tuple[float, int]:
    """Bisection in log(c) for the vertex count closest to ``target``; count decreases with c."""
    lo, hi = math.log(1e-4), math.log(c_max)
    best_c, best_n = math.exp(hi), count(math.exp(hi))
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        c = math.exp(mid)
        n = count(c)
        if abs(n - target) < abs(best_n - target) or (abs(n - target) == abs(best_n - target) and c > best_c):
            best_c, best_n = c, n
        if n > target:
            lo = mid
        elif n < target:
            hi = mid
        else:
            break
    return best_c, best_n


def _check_target(target_vertices: int) -> None:
    if target_vertices < MIN_TARGET_VERTICES:
        raise ValueError(
            f"target of {target_vertices} vertices is too small to cover the domain "
            f"(minimum {MIN_TARGET_VERTICES})"
        )


def _check_fit(found: int, target: int, domain: str) -> None:
    if abs(found - target) > TARGET_TOLERANCE * target:
        raise ValueError(
            f"infeasible target for {domain}: closest achievable vertex count is {found} for target {target}"
        )


# ---------------------------------------------------------------------------
# Pacman
# ---------------------------------------------------------------------------


def _pacman_rings(size: SizeFunction) -> list:
    radii = []
    r = size.h_min
    while r < 1.0:
        radii.append(r)
        r = r + min(float(size(r)), 0.9 * r)
    if len(radii) > 1 and 1.0 - radii[-1] < 0.5 * float(size(radii[-1])):
        radii.pop()
    radii.append(1.0)
    return radii


def _ring_segments(r: float, size: SizeFunction) -> int:
    return max(6, int(math.ceil(PACMAN_ANGLE * r / float(size(r)))))


def _pacman_vertex_count(size: SizeFunction) -> int:
    return 1 + sum(_ring_segments(r, size) + 1 for r in _pacman_rings(size))


def _pacman_points(size: SizeFunction) -> np.ndarray:
    points = [np.zeros((1, 2))]
    for r in _pacman_rings(size):
        n = _ring_segments(r, size)
        theta = np.linspace(0.0, PACMAN_ANGLE, n + 1)
        ring = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        ring[0] = (r, 0.0)
        ring[-1] = (r * math.cos(PACMAN_ANGLE), r * math.sin(PACMAN_ANGLE))
        points.append(ring)
    return np.vstack(points)


def _orient_cells(points: np.ndarray, cells: np.ndarray) -> np.ndarray:
    cells = cells.copy()
    measures = geometry.signed_measures(points[cells])
    flip = measures < 0
    cells[flip, 0], cells[flip, 1] = cells[flip, 1].copy(), cells[flip, 0].copy()
    return cells


def generate_pacman(grading: GradingSpec, target_vertices: int) -> SimplicialMesh:
    """
    Graded triangulation of the Pacman domain with about ``target_vertices`` vertices.

    Raises:
        ValueError: If the target is below the minimum or cannot be met within 25%
    """
    _check_target(target_vertices)
    depth = grading.depth if grading.depth is not None else DEFAULT_DEPTH[2]

    def count(c: float) -> int:
        return _pacman_vertex_count(SizeFunction(c, grading.mu, max(grading.h_max, 1e-12), depth))

    c, found = _fit_size_constant(count, target_vertices, c_max=max(grading.h_max, 1.0))
    _check_fit(found, target_vertices, "pacman")
    size = SizeFunction(c, grading.mu, grading.h_max, depth)

    points = _pacman_points(size)
    triangles = Delaunay(points).simplices.astype(np.int64)

    centroids = points[triangles].mean(axis=1)
    angle = np.mod(np.arctan2(centroids[:, 1], centroids[:, 0]), 2.0 * math.pi)
    inside = angle < PACMAN_ANGLE
    triangles = _orient_cells(points, triangles[inside])
    pts = points[triangles]
    scale = geometry.longest_edges(pts) ** 2
    triangles = triangles[geometry.signed_measures(pts) > ORIENTATION_EPS * scale]

    mesh = SimplicialMesh(
        points,
        triangles,
        metadata={"domain": "pacman", "sizing": size, "grading": grading},
    )
    mesh = classify(mesh)
    logger.info(
        f"Generated pacman mesh: {mesh.n_vertices} vertices, {mesh.n_cells} cells "
        f"(target {target_vertices}, mu={grading.mu:.4f}, c={c:.4g})"
    )
    return mesh


# ---------------------------------------------------------------------------
# Fichera
# ---------------------------------------------------------------------------


def fichera_axis_nodes(size: SizeFunction) -> np.ndarray:
    """Graded nodes on [-1, 1], symmetric, refined toward 0, ending exactly at +-1."""
    nodes = [0.0]
    while nodes[-1] < 1.0:
        t = nodes[-1]
        nodes.append(t + float(size(t)))
    if len(nodes) > 2 and nodes[-1] - 1.0 > 0.5 * (nodes[-1] - nodes[-2]):
        nodes.pop()
    half = np.array(nodes) / nodes[-1]
    half[-1] = 1.0
    return np.concatenate([-half[:0:-1], half])


def _fichera_vertex_count(axis: np.ndarray) -> int:
    k = len(axis)
    positive = int((axis > 0).sum())
    return k ** 3 - positive ** 3


# Kuhn subdivision of the unit cube along the (0,0,0)-(1,1,1) diagonal.
_KUHN_PATHS = [
    (0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0),
]


def _kuhn_tets() -> np.ndarray:
    tets = []
    for perm in _KUHN_PATHS:
        corner = [0, 0, 0]
        path = [tuple(corner)]
        for axis in perm:
            corner[axis] = 1
            path.append(tuple(corner))
        tets.append(path)
    return np.array(tets)  # (6, 4, 3) offsets


def generate_fichera(grading: GradingSpec, target_vertices: int) -> SimplicialMesh:
    """
    Graded tetrahedral mesh of the Fichera corner with about ``target_vertices`` vertices.

    Raises:
        ValueError: If the target is below the minimum or no tensor grid comes within 25% of it;
            grid vertex counts are k^3 - ((k - 1) / 2)^3 for odd k
    """
    _check_target(target_vertices)
    depth = grading.depth if grading.depth is not None else DEFAULT_DEPTH[3]

    def count(c: float) -> int:
        return _fichera_vertex_count(fichera_axis_nodes(SizeFunction(c, grading.mu, grading.h_max, depth)))

    c, found = _fit_size_constant(count, target_vertices, c_max=2.0 * grading.h_max)
    _check_fit(found, target_vertices, "fichera")
    size = SizeFunction(c, grading.mu, grading.h_max, depth)
    axis = fichera_axis_nodes(size)
    mesh = _tensor_fichera(axis)
    mesh.metadata.update({"domain": "fichera", "sizing": size, "grading": grading})
    mesh = classify(mesh)
    logger.info(
        f"Generated fichera mesh: {mesh.n_vertices} vertices, {mesh.n_cells} cells "
        f"(target {target_vertices}, mu={grading.mu:.4f}, c={c:.4g})"
    )
    return mesh


def _tensor_fichera(axis: np.ndarray) -> SimplicialMesh:
    k = len(axis)
    ii, jj, kk = np.meshgrid(np.arange(k), np.arange(k), np.arange(k), indexing="ij")
    coords = np.stack([axis[ii], axis[jj], axis[kk]], axis=-1)
    in_domain = ~((coords[..., 0] > 0) & (coords[..., 1] > 0) & (coords[..., 2] > 0))
    index = -np.ones((k, k, k), dtype=np.int64)
    index[in_domain] = np.arange(int(in_domain.sum()))
    vertices = coords[in_domain]

    hi, hj, hk = np.meshgrid(np.arange(k - 1), np.arange(k - 1), np.arange(k - 1), indexing="ij")
    lower = np.stack([hi.ravel(), hj.ravel(), hk.ravel()], axis=1)
    centers = 0.5 * (axis[lower] + axis[lower + 1])
    keep = ~((centers[:, 0] > 0) & (centers[:, 1] > 0) & (centers[:, 2] > 0))
    lower = lower[keep]

    offsets = _kuhn_tets()
    corners = lower[:, None, None, :] + offsets[None, :, :, :]  # (h, 6, 4, 3)
    cells = index[corners[..., 0], corners[..., 1], corners[..., 2]].reshape(-1, 4)
    cells = _orient_cells(vertices, cells)
    return SimplicialMesh(vertices, cells)


# ---------------------------------------------------------------------------
# Uniform control meshes
# ---------------------------------------------------------------------------


def generate_unit_square(n: int, size: float = 1.0) -> SimplicialMesh:
    """Structured n x n grid of [0, size]^2, each square split into two right triangles."""
    if n < 1:
        raise ValueError(f"grid resolution must be positive, got {n}")
    t = np.linspace(0.0, size, n + 1)
    xx, yy = np.meshgrid(t, t, indexing="ij")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[:-1, 1:].ravel()
    cells = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return classify(SimplicialMesh(vertices, cells, metadata={"domain": "square"}))


def generate_unit_cube(n: int) -> SimplicialMesh:
    """Structured n^3 grid of [0, 1]^3 split into Kuhn tetrahedra."""
    if n < 1:
        raise ValueError(f"grid resolution must be positive, got {n}")
    t = np.linspace(0.0, 1.0, n + 1)
    k = n + 1
    ii, jj, kk = np.meshgrid(np.arange(k), np.arange(k), np.arange(k), indexing="ij")
    vertices = np.stack([t[ii], t[jj], t[kk]], axis=-1).reshape(-1, 3)
    index = np.arange(k ** 3).reshape(k, k, k)
    hi, hj, hk = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    lower = np.stack([hi.ravel(), hj.ravel(), hk.ravel()], axis=1)
    corners = lower[:, None, None, :] + _kuhn_tets()[None]
    cells = index[corners[..., 0], corners[..., 1], corners[..., 2]].reshape(-1, 4)
    cells = _orient_cells(vertices, cells)
    return classify(SimplicialMesh(vertices, cells, metadata={"domain": "cube"}))


GENERATORS = {
    "pacman": (generate_pacman, GradingSpec.pacman),
    "fichera": (generate_fichera, GradingSpec.fichera),
}


def generate(domain: str, target_vertices: int, graded: bool = True, **grading_overrides) -> SimplicialMesh:
    """
    Generate a model-domain mesh by name.

    Raises:
        ValueError: If the domain is unknown
    """
    key = domain.lower()
    if key not in GENERATORS:
        raise ValueError(f"Unsupported domain: '{domain}'. Supported domains: {list(GENERATORS)}")
    generator, grading_factory = GENERATORS[key]
    return generator(grading_factory(graded=graded, **grading_overrides), target_vertices)
