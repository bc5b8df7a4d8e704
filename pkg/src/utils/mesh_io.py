"""
Plain-text formats for meshes, sparse operators and vectors.

Mesh format: header ``dim nv nc``; nv coordinate lines; nc cell lines of zero-based
vertex indices; nv boundary-marker lines (0 interior, 1 boundary, 2 ridge, 3 corner).
Operator format: header ``rows cols nnz`` followed by ``row col value`` triplets.
Whitespace separated, ``#`` starts a comment.
"""

from pathlib import Path
from typing import List, Union

import numpy as np
import scipy.sparse as sp

from constants import MARKER_CODES
from logger import setup_logger
from tools.mesh import SimplicialMesh

logger = setup_logger(__name__)

PathLike = Union[str, Path]


def _tokens(path: PathLike) -> List[str]:
    tokens: List[str] = []
    with open(path, "r") as file:
        for line in file:
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
    return tokens


def write_mesh(mesh: SimplicialMesh, path: PathLike) -> None:
    """Write a mesh; coordinates use ``repr`` so a reload is bitwise identical."""
    with open(path, "w") as file:
        file.write("# graded-mg mesh: dim nv nc\n")
        file.write(f"{mesh.dim} {mesh.n_vertices} {mesh.n_cells}\n")
        for row in mesh.vertices:
            file.write(" ".join(repr(float(x)) for x in row) + "\n")
        for cell in mesh.cells:
            file.write(" ".join(str(int(i)) for i in cell) + "\n")
        for marker in mesh.markers:
            file.write(f"{int(marker)}\n")
    logger.info(f"Wrote {mesh.dim}D mesh with {mesh.n_vertices} vertices to {path}")


def read_mesh(path: PathLike) -> SimplicialMesh:
    """
    Read a mesh in the text format.

    Raises:
        ValueError: If the file is truncated or contains invalid values
    """
    tokens = _tokens(path)
    if len(tokens) < 3:
        raise ValueError(f"malformed mesh file {path}: missing header")
    try:
        dim, nv, nc = (int(t) for t in tokens[:3])
    except ValueError as e:
        raise ValueError(f"malformed mesh file {path}: bad header") from e
    if dim not in (2, 3):
        raise ValueError(f"malformed mesh file {path}: dimension {dim} not supported")

    expected = 3 + nv * dim + nc * (dim + 1) + nv
    if len(tokens) != expected:
        raise ValueError(
            f"malformed mesh file {path}: expected {expected} values, found {len(tokens)}"
        )

    pos = 3
    try:
        vertices = np.array([float(t) for t in tokens[pos:pos + nv * dim]]).reshape(nv, dim)
        pos += nv * dim
        cells = np.array([int(t) for t in tokens[pos:pos + nc * (dim + 1)]], dtype=np.int64).reshape(nc, dim + 1)
        pos += nc * (dim + 1)
        markers = np.array([int(t) for t in tokens[pos:pos + nv]], dtype=np.int8)
    except ValueError as e:
        raise ValueError(f"malformed mesh file {path}: {e}") from e

    valid_codes = set(MARKER_CODES.values())
    if not set(np.unique(markers).tolist()) <= valid_codes:
        raise ValueError(f"malformed mesh file {path}: unknown boundary marker")

    return SimplicialMesh(vertices, cells, markers=markers)


def write_operator(matrix: sp.spmatrix, path: PathLike) -> None:
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as file:
        file.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for k in order:
            file.write(f"{int(coo.row[k])} {int(coo.col[k])} {float(coo.data[k])!r}\n")


def read_operator(path: PathLike) -> sp.csr_matrix:
    tokens = _tokens(path)
    if len(tokens) < 3:
        raise ValueError(f"malformed operator file {path}: missing header")
    rows, cols, nnz = (int(t) for t in tokens[:3])
    body = tokens[3:]
    if len(body) != 3 * nnz:
        raise ValueError(f"malformed operator file {path}: expected {nnz} triplets")
    r = np.array([int(t) for t in body[0::3]], dtype=np.int64)
    c = np.array([int(t) for t in body[1::3]], dtype=np.int64)
    v = np.array([float(t) for t in body[2::3]], dtype=np.float64)
    return sp.csr_matrix((v, (r, c)), shape=(rows, cols))


def write_vector(vector: np.ndarray, path: PathLike) -> None:
    with open(path, "w") as file:
        file.write(f"{len(vector)}\n")
        for value in np.asarray(vector, dtype=float):
            file.write(f"{float(value)!r}\n")


def read_vector(path: PathLike) -> np.ndarray:
    tokens = _tokens(path)
    n = int(tokens[0])
    if len(tokens) != n + 1:
        raise ValueError(f"malformed vector file {path}: expected {n} values")
    return np.array([float(t) for t in tokens[1:]])
