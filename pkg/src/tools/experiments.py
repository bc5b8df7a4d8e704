"""
Reproducible experiment drivers behind the command-line interface.
"""

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from constants import (
    DEFAULT_BETA,
    DEFAULT_C_AR_2D,
    DEFAULT_C_AR_3D,
    DEFAULT_C_K,
    DEFAULT_MAX_ITERS,
    DEFAULT_MAX_LEVELS,
    DEFAULT_MIN_COARSE,
    DEFAULT_RTOL,
    DEFAULT_SMOOTHS,
    GMRES_RESTART_ILU,
    GMRES_RESTART_MG,
)
from logger import setup_logger
from tools.features import merge_inherited_features
from tools.fem import LinearSystem, ModelProblem, ProblemFactory, assemble, l2_error
from tools.hierarchy import MeshHierarchy, build_hierarchy
from tools.mesh import MeshSummary, SimplicialMesh
from tools.meshgen import generate
from tools.remesh_base import RemeshConfig
from tools.solver import GmresResult, MgPreconditioner, gmres, ilu0_apply, ilu0_factor
from utils.config_parser import ExperimentConfigLoader
from utils.mesh_io import read_mesh, write_mesh, write_vector

logger = setup_logger(__name__)

SOLVE_METHODS = ("mg", "ilu")
DEFAULT_PROBLEMS = {2: "pacman", 3: "fichera"}
DEFAULT_SEQUENCE = [750, 1500, 3000, 6000, 12000, 24000]
# Fichera tensor grids jump from 316 to 665 vertices.
DEFAULT_VERTICES = {"pacman": 500, "fichera": 665}


@dataclass
class ExperimentConfig:
    """
    Parameters of one command. ``None`` means the dimension-dependent default.
    """

    command: str = "generate"
    domain: str = "pacman"
    vertices: Optional[int] = None
    graded: bool = True
    mesh: Optional[str] = None
    hierarchy: Optional[str] = None
    problem: Optional[str] = None
    method: str = "mg"
    beta: Optional[float] = None
    c_ar: float = DEFAULT_C_AR_3D
    c_ar_2d: float = DEFAULT_C_AR_2D
    c_k: float = DEFAULT_C_K
    min_coarse: Optional[int] = None
    max_levels: int = DEFAULT_MAX_LEVELS
    rtol: float = DEFAULT_RTOL
    smooths: int = DEFAULT_SMOOTHS
    max_iters: int = DEFAULT_MAX_ITERS
    sizes: List[int] = field(default_factory=lambda: list(DEFAULT_SEQUENCE))
    out: str = "output"

    def __post_init__(self):
        positive = {
            "vertices": self.vertices,
            "beta": self.beta,
            "c_ar": self.c_ar,
            "c_ar_2d": self.c_ar_2d,
            "c_k": self.c_k,
            "min_coarse": self.min_coarse,
            "max_levels": self.max_levels,
            "rtol": self.rtol,
            "smooths": self.smooths,
            "max_iters": self.max_iters,
        }
        for name, value in positive.items():
            if value is not None and value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if any(s <= 0 for s in self.sizes):
            raise ValueError(f"sequence sizes must be positive, got {self.sizes}")
        if self.method not in SOLVE_METHODS:
            raise ValueError(f"Unsupported method: '{self.method}'. Supported methods: {list(SOLVE_METHODS)}")

    @classmethod
    def keys(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_sources(cls, cli_values: Dict[str, Any], config_path: Optional[str] = None) -> "ExperimentConfig":
        """YAML values first, then every CLI value that was given explicitly."""
        values: Dict[str, Any] = {}
        if config_path:
            values.update(ExperimentConfigLoader(cls.keys()).load(config_path))
        values.update({k: v for k, v in cli_values.items() if v is not None and k in cls.keys()})
        return cls(**values)

    def beta_for(self, dim: int) -> float:
        return DEFAULT_BETA[dim] if self.beta is None else self.beta

    def vertices_for(self, domain: str) -> int:
        if self.vertices is not None:
            return self.vertices
        return DEFAULT_VERTICES.get(domain, DEFAULT_VERTICES["pacman"])

    def min_coarse_for(self, dim: int) -> int:
        return DEFAULT_MIN_COARSE[dim] if self.min_coarse is None else self.min_coarse

    def remesh_config(self) -> RemeshConfig:
        return RemeshConfig(c_ar_3d=self.c_ar, c_ar_2d=self.c_ar_2d)


@dataclass
class SolveSummary:
    """One row of the solver performance table."""

    problem: str
    method: str
    dofs: int
    levels: int
    iterations: int
    converged: bool
    relative_residual: float
    l2_error: Optional[float] = None


class ExperimentRunner:
    """Runs generation, coarsening and solves for an ExperimentConfig."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.out_dir = Path(config.out)

    def _ensure_out(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir

    def generate(self, domain: Optional[str] = None, vertices: Optional[int] = None,
                 graded: Optional[bool] = None, write: bool = True) -> Tuple[SimplicialMesh, Optional[Path]]:
        domain = domain or self.config.domain
        vertices = vertices or self.config.vertices_for(domain)
        graded = self.config.graded if graded is None else graded
        mesh = generate(domain, vertices, graded=graded)
        path = None
        if write:
            kind = "graded" if graded else "uniform"
            path = self._ensure_out() / f"{domain}_{vertices}_{kind}.mesh"
            write_mesh(mesh, path)
        logger.info(str(MeshSummary.of(mesh)))
        return mesh, path

    def load_mesh(self, path: str) -> SimplicialMesh:
        """Read a mesh file and restore its ridge edges by feature detection."""
        mesh = read_mesh(path)
        return merge_inherited_features(mesh, mesh.markers, mesh.ridge_edges, self.config.c_k)

    def coarsen(self, mesh: SimplicialMesh, write: bool = True, compute_metrics: bool = True) -> MeshHierarchy:
        hierarchy = build_hierarchy(
            mesh,
            beta=self.config.beta_for(mesh.dim),
            config=self.config.remesh_config(),
            min_vertices=self.config.min_coarse_for(mesh.dim),
            max_levels=self.config.max_levels,
            curvature_threshold=self.config.c_k,
            compute_metrics=compute_metrics,
        )
        if write:
            hierarchy.save(self._ensure_out())
        if hierarchy.metrics:
            logger.info("Hierarchy quality metrics\n" + hierarchy.format_table())
        return hierarchy

    def load_hierarchy(self, directory: str, compute_metrics: bool = False) -> MeshHierarchy:
        return MeshHierarchy.load(directory, curvature_threshold=self.config.c_k, compute_metrics=compute_metrics)

    def problem_for(self, mesh: SimplicialMesh, name: Optional[str] = None) -> ModelProblem:
        name = name or self.config.problem or mesh.metadata.get("domain")
        if name not in ProblemFactory.get_supported_problems():
            name = DEFAULT_PROBLEMS[mesh.dim]
        return ProblemFactory.create_problem(name)

    def solve(self, hierarchy: MeshHierarchy, method: Optional[str] = None,
              problem: Optional[ModelProblem] = None, write: bool = True) -> SolveSummary:
        """
        Solve the model problem on the finest level with MG- or ILU-preconditioned GMRES.

        Raises:
            ValueError: If the method is unknown or MG is requested on a single level
        """
        method = method or self.config.method
        if method not in SOLVE_METHODS:
            raise ValueError(f"Unsupported method: '{method}'. Supported methods: {list(SOLVE_METHODS)}")
        mesh = hierarchy.finest
        problem = problem or self.problem_for(mesh)

        if method == "mg":
            hierarchy.require_multilevel()
            precond = MgPreconditioner(hierarchy, problem, self.config.smooths, self.config.smooths)
            system = precond.systems[0]
            result = gmres(system.matrix, system.rhs, precond, self.config.rtol,
                           restart=GMRES_RESTART_MG, max_iters=self.config.max_iters)
            levels = hierarchy.n_levels
        else:
            system = assemble(mesh, problem)
            factors = ilu0_factor(system.matrix)
            result = gmres(system.matrix, system.rhs, lambda r: ilu0_apply(factors, r), self.config.rtol,
                           restart=GMRES_RESTART_ILU, max_iters=self.config.max_iters)
            levels = 1

        exact = problem.exact()
        summary = SolveSummary(
            problem=problem.name,
            method=method,
            dofs=system.n_dofs,
            levels=levels,
            iterations=result.iterations,
            converged=result.converged,
            relative_residual=result.relative_residual,
            l2_error=l2_error(mesh, result.x, exact) if exact is not None else None,
        )
        if write:
            self._write_solve(result, summary, system)
        logger.info(
            f"{method.upper()}-GMRES on {problem.name}: {summary.dofs} dofs, {summary.iterations} iterations"
            + (f", L2 error {summary.l2_error:.3e}" if summary.l2_error is not None else "")
        )
        return summary

    def _write_solve(self, result: GmresResult, summary: SolveSummary, system: LinearSystem) -> None:
        out = self._ensure_out()
        stem = f"{summary.problem}_{summary.method}_{summary.dofs}"
        result.write_csv(out / f"convergence_{stem}.csv")
        write_vector(result.x, out / f"solution_{stem}.vec")
        system.write(out / f"system_{stem}")

    def run_sequence(self, domain: Optional[str] = None, sizes: Optional[List[int]] = None,
                     graded: Optional[bool] = None) -> pd.DataFrame:
        """
        Generate, coarsen and solve with MG and ILU for each mesh size.

        Returns:
            DataFrame with one row per size
        """
        domain = domain or self.config.domain
        sizes = sizes or self.config.sizes
        rows = []
        for size in sizes:
            mesh, _ = self.generate(domain, size, graded, write=False)
            hierarchy = self.coarsen(mesh, write=False, compute_metrics=False)
            mg = self.solve(hierarchy, "mg", write=False)
            ilu = self.solve(hierarchy, "ilu", write=False)
            rows.append({
                "target": size,
                "dofs": mg.dofs,
                "levels": mg.levels,
                "mg_cycles": mg.iterations,
                "ilu_iterations": ilu.iterations,
                "l2_error": mg.l2_error,
            })
        df = pd.DataFrame(rows)
        path = self._ensure_out() / f"sequence_{domain}.csv"
        df.to_csv(path, index=False)
        logger.info(f"Wrote refinement sequence to {path}\n" + df.to_string(index=False))
        return df

    def summary_frame(self, summaries: List[SolveSummary]) -> pd.DataFrame:
        return pd.DataFrame([asdict(s) for s in summaries])
