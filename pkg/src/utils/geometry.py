"""
Vectorized geometry kernels for triangles and tetrahedra.

All functions take simplices as coordinate stacks of shape ``(m, d + 1, d)`` (or a
single simplex of shape ``(d + 1, d)`` where noted) and work for d = 2 and d = 3.
Predicates use plain float64 arithmetic with relative tolerances; no exact
arithmetic is attempted.
"""

import itertools
import math

import numpy as np

from constants import ORIENTATION_EPS


def _as_stack(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim == 2:
        points = points[None, :, :]
    return points


def signed_measures(points: np.ndarray) -> np.ndarray:
    """Signed area (2D) or volume (3D) of each simplex."""
    points = _as_stack(points)
    d = points.shape[2]
    edges = points[:, 1:, :] - points[:, :1, :]
    return np.linalg.det(edges) / math.factorial(d)


def edge_lengths(points: np.ndarray) -> np.ndarray:
    """Lengths of all simplex edges, shape (m, number of edges)."""
    points = _as_stack(points)
    pairs = list(itertools.combinations(range(points.shape[1]), 2))
    a = points[:, [p[0] for p in pairs], :]
    b = points[:, [p[1] for p in pairs], :]
    return np.linalg.norm(a - b, axis=2)


def longest_edges(points: np.ndarray) -> np.ndarray:
    return edge_lengths(points).max(axis=1)


def _triangle_areas(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=-1)


def inscribed_diameters(points: np.ndarray) -> np.ndarray:
    """
    Inscribed size rho of each simplex used by the aspect ratio.

    2D: incircle diameter, 4 * area / perimeter. 3D: insphere radius, 3 * volume / total
    facet area, so the regular tetrahedron has aspect ratio 2 * sqrt(6).
    """
    points = _as_stack(points)
    d = points.shape[2]
    measure = np.abs(signed_measures(points))
    if d == 2:
        perimeter = edge_lengths(points).sum(axis=1)
        return 4.0 * measure / perimeter
    p0, p1, p2, p3 = (points[:, i, :] for i in range(4))
    area = (
        _triangle_areas(p1, p2, p3)
        + _triangle_areas(p0, p2, p3)
        + _triangle_areas(p0, p1, p3)
        + _triangle_areas(p0, p1, p2)
    )
    return 3.0 * measure / area


def aspect_ratios(points: np.ndarray) -> np.ndarray:
    """
    Longest edge over the inscribed size rho. Degenerate simplices get ``inf``.
    """
    points = _as_stack(points)
    h = longest_edges(points)
    rho = inscribed_diameters(points)
    degenerate = rho <= ORIENTATION_EPS * h
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = h / rho
    ratio[degenerate] = np.inf
    return ratio


def is_positively_oriented(points: np.ndarray) -> np.ndarray:
    """Signed measure above a relative epsilon of the local edge-length scale."""
    points = _as_stack(points)
    d = points.shape[2]
    scale = longest_edges(points) ** d
    return signed_measures(points) > ORIENTATION_EPS * scale


def barycentric(cell: np.ndarray, x: np.ndarray) -> np.ndarray:
    """
    Barycentric coordinates of points ``x`` (k, d) in one simplex ``cell`` (d+1, d).
    """
    cell = np.asarray(cell, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    T = (cell[1:] - cell[0]).T
    lam = np.linalg.solve(T, (x - cell[0]).T).T
    return np.hstack([1.0 - lam.sum(axis=1, keepdims=True), lam])


def orient2d(a, b, c) -> float:
    """Twice the signed area of (a, b, c); positive when counter-clockwise."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def incircle(a, b, c, d) -> float:
    """
    Positive when ``d`` lies strictly inside the circumcircle of CCW triangle abc.
    """
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    ad = adx * adx + ady * ady
    bd = bdx * bdx + bdy * bdy
    cd = cdx * cdx + cdy * cdy
    return (
        adx * (bdy * cd - bd * cdy)
        - ady * (bdx * cd - bd * cdx)
        + ad * (bdx * cdy - bdy * cdx)
    )


def _closest_on_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return a.copy()
    t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return a + t * ab


def _closest_on_triangle(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    # Voronoi-region walk over vertices, edges and face of triangle abc.
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0.0 and d2 <= 0.0:
        return a.copy()
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0.0 and d4 <= d3:
        return b.copy()
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        return a + (d1 / (d1 - d3)) * ab
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0.0 and d5 <= d6:
        return c.copy()
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        return a + (d2 / (d2 - d6)) * ac
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b)
    denom = 1.0 / (va + vb + vc)
    return a + ab * (vb * denom) + ac * (vc * denom)


def closest_point(cell: np.ndarray, x: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """
    Closest point of the closed simplex ``cell`` to ``x``; ``x`` itself when inside.
    """
    cell = np.asarray(cell, dtype=float)
    x = np.asarray(x, dtype=float)
    if barycentric(cell, x)[0].min() >= -tol:
        return x.copy()
    d = cell.shape[1]
    best, best_dist = None, np.inf
    if d == 2:
        for i, j in ((0, 1), (1, 2), (2, 0)):
            q = _closest_on_segment(x, cell[i], cell[j])
            dist = float(np.linalg.norm(q - x))
            if dist < best_dist:
                best, best_dist = q, dist
    else:
        for face in ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)):
            q = _closest_on_triangle(x, *cell[list(face)])
            dist = float(np.linalg.norm(q - x))
            if dist < best_dist:
                best, best_dist = q, dist
    return best


def distance_to_simplex(cell: np.ndarray, x: np.ndarray) -> float:
    return float(np.linalg.norm(closest_point(cell, x) - np.asarray(x, dtype=float)))


def _separating_axes(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Candidate separating axes for simplex ``a`` against a stack ``b``."""
    m, k, d = b.shape
    if d == 2:
        def edge_normals(s):
            e = np.roll(s, -1, axis=1) - s
            return np.stack([-e[..., 1], e[..., 0]], axis=-1)

        na = np.broadcast_to(edge_normals(a[None])[0], (m, 3, 2))
        nb = edge_normals(b)
        return np.concatenate([na, nb], axis=1)

    faces = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))
    pairs = list(itertools.combinations(range(4), 2))

    def face_normals(s):
        out = []
        for f in faces:
            out.append(np.cross(s[:, f[1]] - s[:, f[0]], s[:, f[2]] - s[:, f[0]]))
        return np.stack(out, axis=1)

    def edges(s):
        return np.stack([s[:, j] - s[:, i] for i, j in pairs], axis=1)

    na = np.broadcast_to(face_normals(a[None])[0], (m, 4, 3))
    nb = face_normals(b)
    ea = np.broadcast_to(edges(a[None])[0], (m, 6, 3))
    eb = edges(b)
    cross = np.cross(ea[:, :, None, :], eb[:, None, :, :]).reshape(m, 36, 3)
    return np.concatenate([na, nb, cross], axis=1)


def simplices_intersect(a: np.ndarray, b: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    """
    Closed intersection test of simplex ``a`` (d+1, d) against each simplex of
    ``b`` (m, d+1, d) by the separating axis theorem. Touching counts as
    intersecting.
    """
    a = np.asarray(a, dtype=float)
    b = _as_stack(b)
    if b.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    axes = _separating_axes(a, b)
    norms = np.linalg.norm(axes, axis=2, keepdims=True)
    usable = norms[..., 0] > 0.0
    axes = np.where(norms > 0.0, axes / np.where(norms > 0.0, norms, 1.0), 0.0)
    pa = np.einsum("mkd,vd->mkv", axes, a)
    pb = np.einsum("mkd,mvd->mkv", axes, b)
    scale = max(float(np.ptp(a, axis=0).max()), 1e-300)
    tol = rel_tol * scale
    separated = (pa.max(axis=2) < pb.min(axis=2) - tol) | (pb.max(axis=2) < pa.min(axis=2) - tol)
    separated &= usable
    return ~separated.any(axis=1)
