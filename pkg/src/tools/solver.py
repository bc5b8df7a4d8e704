"""
Sparse solvers: ILU(0), restarted right-preconditioned GMRES and a V-cycle multigrid
preconditioner over a mesh hierarchy with rediscretized level operators.
"""

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Union

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, spsolve_triangular, splu

from constants import (
    DEFAULT_MAX_ITERS,
    DEFAULT_RTOL,
    DEFAULT_SMOOTHS,
    GMRES_RESTART_ILU,
    MAX_DENSE_COARSE,
)
from logger import setup_logger
from tools.fem import LinearSystem, ModelProblem, assemble
from tools.hierarchy import MeshHierarchy
from tools.interp import build_prolongation

logger = setup_logger(__name__)

Preconditioner = Callable[[np.ndarray], np.ndarray]


class ZeroPivotError(ArithmeticError):
    """Raised when ILU(0) meets a zero (or structurally missing) pivot."""

    def __init__(self, row: int):
        super().__init__(f"zero pivot in row {row}")
        self.row = row


def as_csr(matrix) -> sp.csr_matrix:
    """Square CSR copy with summed duplicates and sorted column indices."""
    csr = sp.csr_matrix(matrix, dtype=np.float64, copy=True)
    if csr.shape[0] != csr.shape[1]:
        raise ValueError(f"matrix must be square, got shape {csr.shape}")
    csr.sum_duplicates()
    csr.sort_indices()
    return csr


@dataclass
class Ilu0Factors:
    """Unit lower factor L and upper factor U with the sparsity of A."""

    lower: sp.csr_matrix
    upper: sp.csr_matrix

    @property
    def shape(self):
        return self.upper.shape


def _ilu0_updates(a: sp.csr_matrix, rows: np.ndarray, diag: np.ndarray, lower: np.ndarray):
    """
    Symbolic phase: for every lower entry p = (i, k), the entries q = (k, j) of the strict
    upper part of row k whose position t = (i, j) is in the pattern of A.
    """
    n = a.shape[0]
    k = a.indices[lower]
    start = diag[k] + 1
    counts = a.indptr[k + 1] - start
    owner = np.repeat(lower, counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    q = np.repeat(start, counts) + offsets
    keys = rows.astype(np.int64) * n + a.indices
    wanted = rows[owner].astype(np.int64) * n + a.indices[q]
    t = np.minimum(np.searchsorted(keys, wanted), len(keys) - 1)
    hit = keys[t] == wanted
    return owner[hit], q[hit], t[hit]


def _row_levels(a: sp.csr_matrix, rows: np.ndarray, lower: np.ndarray) -> np.ndarray:
    """Wavefront of each row; a row depends only on rows of earlier wavefronts."""
    level = [0] * a.shape[0]
    for i, k in zip(rows[lower].tolist(), a.indices[lower].tolist()):
        if level[k] + 1 > level[i]:
            level[i] = level[k] + 1
    return np.array(level, dtype=np.int64)


def _check_pivots(data: np.ndarray, diag: np.ndarray, rows: np.ndarray) -> None:
    zero = rows[data[diag[rows]] == 0.0]
    if len(zero):
        raise ZeroPivotError(int(zero.min()))


def ilu0_factor(matrix) -> Ilu0Factors:
    """
    Incomplete LU factorization with zero fill, natural ordering.

    Rows are grouped into wavefronts. Within a wavefront the r-th lower entry of every
    row is eliminated in one vectorized step, so the numeric phase loops over
    (wavefront, rank) pairs rather than matrix entries.

    Raises:
        ZeroPivotError: If a diagonal entry is missing or becomes zero
    """
    a = as_csr(matrix)
    n = a.shape[0]
    rows = np.repeat(np.arange(n), np.diff(a.indptr))
    on_diag = np.flatnonzero(a.indices == rows)
    diag = np.full(n, -1, dtype=np.int64)
    diag[rows[on_diag]] = on_diag
    missing = np.flatnonzero(diag < 0)
    if len(missing):
        raise ZeroPivotError(int(missing[0]))

    lower = np.flatnonzero(a.indices < rows)
    owner, q, t = _ilu0_updates(a, rows, diag, lower)
    level = _row_levels(a, rows, lower)
    rank = lower - a.indptr[rows[lower]]
    ranks = int(rank.max()) + 1 if len(lower) else 1
    group = level[rows[lower]] * ranks + rank

    order = np.argsort(group, kind="stable")
    lower, group = lower[order], group[order]
    group_of = np.empty(a.nnz, dtype=np.int64)
    group_of[lower] = group
    by_group = np.argsort(group_of[owner], kind="stable")
    owner, q, t = owner[by_group], q[by_group], t[by_group]
    update_group = group_of[owner]

    level_rows = np.argsort(level, kind="stable")
    per_level = np.split(level_rows, np.searchsorted(level[level_rows], np.arange(1, level.max() + 1)))
    starts = np.flatnonzero(np.diff(group, prepend=-1))
    ends = np.append(starts[1:], len(group))

    data = a.data.copy()
    checked = 0
    for lo, hi in zip(starts, ends):
        g = int(group[lo])
        while checked < g // ranks:
            _check_pivots(data, diag, per_level[checked])
            checked += 1
        ps = lower[lo:hi]
        data[ps] /= data[diag[a.indices[ps]]]
        u_lo, u_hi = np.searchsorted(update_group, [g, g + 1])
        data[t[u_lo:u_hi]] -= data[owner[u_lo:u_hi]] * data[q[u_lo:u_hi]]
    for level_of_rows in per_level[checked:]:
        _check_pivots(data, diag, level_of_rows)

    lu = sp.csr_matrix((data, a.indices.copy(), a.indptr.copy()), shape=a.shape)
    lower_factor = (sp.tril(lu, k=-1, format="csr") + sp.identity(n, format="csr")).tocsr()
    upper = sp.triu(lu, k=0, format="csr")
    lower_factor.sort_indices()
    upper.sort_indices()
    return Ilu0Factors(lower=lower_factor, upper=upper)


def ilu0_apply(factors: Ilu0Factors, vector: np.ndarray) -> np.ndarray:
    """Solve L U x = b by forward and back substitution."""
    y = spsolve_triangular(factors.lower, vector, lower=True, unit_diagonal=True)
    return spsolve_triangular(factors.upper, y, lower=False)


@dataclass
class GmresResult:
    x: np.ndarray
    iterations: int
    converged: bool
    residuals: List[float] = field(default_factory=list)
    times: List[float] = field(default_factory=list)
    restarts: int = 0

    @property
    def relative_residual(self) -> float:
        return self.residuals[-1] if self.residuals else 0.0

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "iteration": np.arange(len(self.residuals)),
                "relative_residual": self.residuals,
                "wall_time": self.times,
            }
        )

    def write_csv(self, path: Union[str, Path]) -> None:
        self.to_dataframe().to_csv(path, index=False)
        logger.info(f"Wrote convergence history to {path}")


def _rotation(a: float, b: float):
    if b == 0.0:
        return 1.0, 0.0
    r = float(np.hypot(a, b))
    return a / r, b / r


def gmres(
    matrix,
    rhs: np.ndarray,
    preconditioner: Optional[Preconditioner] = None,
    rtol: float = DEFAULT_RTOL,
    restart: int = GMRES_RESTART_ILU,
    max_iters: int = DEFAULT_MAX_ITERS,
    x0: Optional[np.ndarray] = None,
) -> GmresResult:
    """
    Restarted GMRES with right preconditioning and modified Gram-Schmidt.

    The Arnoldi residual estimate drives the inner loop; the true residual
    ||b - A x|| / ||b|| is recomputed at every restart and decides convergence.

    Args:
        matrix: square operator supporting ``@``
        rhs: right-hand side
        preconditioner: callable applying M^-1; identity when omitted
        rtol: relative residual tolerance
        restart: Krylov dimension between restarts
        max_iters: cap on total inner iterations

    Returns:
        GmresResult with the solution, iteration count and residual history

    Raises:
        ValueError: If rtol or restart is not positive, or the dimensions differ
    """
    if rtol <= 0:
        raise ValueError(f"rtol must be positive, got {rtol}")
    if restart < 1:
        raise ValueError(f"restart must be positive, got {restart}")
    b = np.asarray(rhs, dtype=float)
    n = b.shape[0]
    if matrix.shape != (n, n):
        raise ValueError(f"matrix shape {matrix.shape} does not match rhs length {n}")
    precond = preconditioner or (lambda v: v)

    start = time.perf_counter()
    b_norm = float(np.linalg.norm(b))
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    if b_norm == 0.0:
        return GmresResult(x=np.zeros(n), iterations=0, converged=True, residuals=[0.0], times=[0.0])

    r = b - matrix @ x
    beta = float(np.linalg.norm(r))
    residuals = [beta / b_norm]
    times = [0.0]
    iterations = 0
    restarts = 0
    converged = residuals[0] <= rtol

    while not converged and iterations < max_iters:
        m = min(restart, max_iters - iterations)
        basis = np.zeros((m + 1, n))
        search = np.zeros((m, n))
        hess = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        basis[0] = r / beta
        k = 0
        breakdown = False
        for j in range(m):
            search[j] = precond(basis[j])
            w = matrix @ search[j]
            for i in range(j + 1):
                hess[i, j] = w @ basis[i]
                w = w - hess[i, j] * basis[i]
            h_next = float(np.linalg.norm(w))
            hess[j + 1, j] = h_next
            for i in range(j):
                upper = cs[i] * hess[i, j] + sn[i] * hess[i + 1, j]
                hess[i + 1, j] = -sn[i] * hess[i, j] + cs[i] * hess[i + 1, j]
                hess[i, j] = upper
            cs[j], sn[j] = _rotation(hess[j, j], hess[j + 1, j])
            hess[j, j] = cs[j] * hess[j, j] + sn[j] * hess[j + 1, j]
            hess[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]

            iterations += 1
            k = j + 1
            residuals.append(abs(g[j + 1]) / b_norm)
            times.append(time.perf_counter() - start)
            breakdown = h_next <= 1e-14 * max(beta, 1e-300)
            if residuals[-1] <= rtol or breakdown:
                break
            basis[j + 1] = w / h_next

        y = scipy.linalg.solve_triangular(hess[:k, :k], g[:k], lower=False)
        x = x + search[:k].T @ y
        r = b - matrix @ x
        previous = beta
        beta = float(np.linalg.norm(r))
        residuals[-1] = beta / b_norm
        restarts += 1
        converged = residuals[-1] <= rtol
        if not converged and beta >= previous:
            logger.warning(
                f"GMRES stagnated after {iterations} iterations at relative residual {residuals[-1]:.3e}"
            )
            break

    if not converged and iterations >= max_iters:
        logger.warning(f"GMRES hit the iteration cap {max_iters} at relative residual {residuals[-1]:.3e}")
    logger.debug(f"GMRES finished: {iterations} iterations, relative residual {residuals[-1]:.3e}")
    return GmresResult(
        x=x,
        iterations=iterations,
        converged=converged,
        residuals=residuals,
        times=times,
        restarts=restarts,
    )


class CoarseSolver:
    """Direct solve on the coarsest level: dense LU when small, sparse LU otherwise."""

    def __init__(self, matrix: sp.csr_matrix, max_dense: int = MAX_DENSE_COARSE):
        n = matrix.shape[0]
        self.dense = n <= max_dense
        if self.dense:
            self.factors = scipy.linalg.lu_factor(matrix.toarray())
        else:
            logger.warning(f"Coarse problem has {n} dofs (> {max_dense}); using sparse LU")
            self.factors = splu(matrix.tocsc())

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.dense:
            return scipy.linalg.lu_solve(self.factors, rhs)
        return self.factors.solve(rhs)


class MgPreconditioner:
    """
    V-cycle over a mesh hierarchy, usable as a GMRES preconditioner.

    Every level is rediscretized by assembling the problem on its own mesh. Levels
    above the coarsest are smoothed by ILU(0) sweeps x <- x + ILU^-1 (r - A x).
    """

    def __init__(
        self,
        hierarchy: MeshHierarchy,
        problem: ModelProblem,
        pre_smooths: int = DEFAULT_SMOOTHS,
        post_smooths: int = DEFAULT_SMOOTHS,
        systems: Optional[List[LinearSystem]] = None,
    ):
        if pre_smooths < 0 or post_smooths < 0:
            raise ValueError("smoothing counts must be non-negative")
        self.pre_smooths = pre_smooths
        self.post_smooths = post_smooths
        self.systems = systems or [assemble(mesh, problem) for mesh in hierarchy.levels]
        if len(self.systems) != hierarchy.n_levels:
            raise ValueError(f"expected {hierarchy.n_levels} level systems, got {len(self.systems)}")
        self.prolongations = [
            build_prolongation(hierarchy.levels[k], hierarchy.levels[k + 1]).matrix
            for k in range(hierarchy.n_levels - 1)
        ]
        self.smoothers = [ilu0_factor(s.matrix) for s in self.systems[:-1]]
        self.coarse = CoarseSolver(self.systems[-1].matrix)
        logger.info(
            f"Multigrid preconditioner: {len(self.systems)} levels, "
            f"dofs {[s.n_dofs for s in self.systems]}"
        )

    @property
    def n_levels(self) -> int:
        return len(self.systems)

    @property
    def matrix(self) -> sp.csr_matrix:
        return self.systems[0].matrix

    def __call__(self, residual: np.ndarray) -> np.ndarray:
        return vcycle(self, residual)

    def as_linear_operator(self) -> LinearOperator:
        n = self.systems[0].n_dofs
        return LinearOperator((n, n), matvec=self.__call__, dtype=np.float64)


def _smooth(matrix, factors: Ilu0Factors, rhs: np.ndarray, x: np.ndarray, sweeps: int) -> np.ndarray:
    for _ in range(sweeps):
        x = x + ilu0_apply(factors, rhs - matrix @ x)
    return x


def vcycle(precond: MgPreconditioner, residual: np.ndarray, level: int = 0) -> np.ndarray:
    """
    One V-cycle applied to ``residual`` on ``level``.

    Raises:
        ValueError: If the residual length differs from the level dimension
    """
    residual = np.asarray(residual, dtype=float)
    system = precond.systems[level]
    if residual.shape[0] != system.n_dofs:
        raise ValueError(f"residual has length {residual.shape[0]}, level {level} has {system.n_dofs} dofs")
    if level == precond.n_levels - 1:
        return precond.coarse.solve(residual)

    a = system.matrix
    smoother = precond.smoothers[level]
    p = precond.prolongations[level]
    x = _smooth(a, smoother, residual, np.zeros_like(residual), precond.pre_smooths)
    coarse_residual = p.T @ (residual - a @ x)
    coarse_residual[precond.systems[level + 1].dirichlet_dofs] = 0.0
    x = x + p @ vcycle(precond, coarse_residual, level + 1)
    return _smooth(a, smoother, residual, x, precond.post_smooths)
