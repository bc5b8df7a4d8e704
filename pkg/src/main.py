import argparse
import json
import sys
from typing import List, Optional

from logger import setup_logger
from tools.experiments import SOLVE_METHODS, ExperimentConfig, ExperimentRunner
from tools.fem import ProblemFactory
from tools.mesh import MeshSummary
from tools.meshgen import GENERATORS
from validators.hierarchy_validator import HierarchyValidator

logger = setup_logger(__name__)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--beta", type=float, help="coarsening parameter (default 1.5 in 2D, 1.8 in 3D)")
    parser.add_argument("--c-ar", dest="c_ar", type=float, help="3D aspect-ratio cap for contractions")
    parser.add_argument("--c-k", dest="c_k", type=float, help="feature detection angle threshold in radians")
    parser.add_argument("--min-coarse", dest="min_coarse", type=int, help="target vertex count of the coarsest level")
    parser.add_argument("--max-levels", dest="max_levels", type=int, help="cap on the number of levels")
    parser.add_argument("--rtol", type=float, help="GMRES relative residual tolerance")
    parser.add_argument("--smooths", type=int, help="ILU(0) smoothing steps before and after the coarse correction")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--config", help="YAML file with experiment parameters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graded-mg",
        description="Coarsen graded simplicial meshes into multigrid hierarchies and solve model problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a graded or quasi-uniform model mesh")
    gen.add_argument("domain", choices=sorted(GENERATORS))
    gen.add_argument("--vertices", type=int, help="target vertex count")
    grading = gen.add_mutually_exclusive_group()
    grading.add_argument("--graded", dest="graded", action="store_true", default=None)
    grading.add_argument("--uniform", dest="graded", action="store_false")
    _add_common_flags(gen)

    coarsen = sub.add_parser("coarsen", help="build a hierarchy from a mesh file")
    coarsen.add_argument("mesh", help="mesh file written by 'generate'")
    _add_common_flags(coarsen)

    solve = sub.add_parser("solve", help="solve a model problem on a saved hierarchy")
    solve.add_argument("hierarchy", help="directory holding level_XX.mesh files")
    solve.add_argument("--problem", choices=ProblemFactory.get_supported_problems())
    solve.add_argument("--method", choices=list(SOLVE_METHODS))
    _add_common_flags(solve)

    sequence = sub.add_parser("sequence", help="refinement sequence comparing MG and ILU")
    sequence.add_argument("domain", choices=sorted(GENERATORS))
    sequence.add_argument("--sizes", type=int, nargs="+", help="target vertex counts")
    grading = sequence.add_mutually_exclusive_group()
    grading.add_argument("--graded", dest="graded", action="store_true", default=None)
    grading.add_argument("--uniform", dest="graded", action="store_false")
    _add_common_flags(sequence)

    validate = sub.add_parser("validate", help="check a saved hierarchy against the quality criteria")
    validate.add_argument("hierarchy", help="directory holding level_XX.mesh files")
    validate.add_argument("--max-overlap", dest="max_overlap", type=int)
    validate.add_argument("--max-ratio", dest="max_ratio", type=float)
    _add_common_flags(validate)

    return parser


def cmd_generate(runner: ExperimentRunner) -> int:
    mesh, path = runner.generate()
    print(f"{path}: {MeshSummary.of(mesh)}")
    return 0


def cmd_coarsen(runner: ExperimentRunner) -> int:
    mesh = runner.load_mesh(runner.config.mesh)
    hierarchy = runner.coarsen(mesh)
    print("Hierarchy quality metrics")
    print(hierarchy.format_table())
    return 0


def cmd_solve(runner: ExperimentRunner) -> int:
    hierarchy = runner.load_hierarchy(runner.config.hierarchy)
    summary = runner.solve(hierarchy)
    print(runner.summary_frame([summary]).to_string(index=False))
    return 0 if summary.converged else 1


def cmd_sequence(runner: ExperimentRunner) -> int:
    df = runner.run_sequence()
    print(df.to_string(index=False))
    return 0


def cmd_validate(runner: ExperimentRunner, max_overlap: Optional[int], max_ratio: Optional[float]) -> int:
    hierarchy = runner.load_hierarchy(runner.config.hierarchy, compute_metrics=True)
    result = HierarchyValidator(hierarchy, runner.config.remesh_config(), max_overlap, max_ratio).validate()
    print(json.dumps(result, indent=2, default=str))
    return 1 if result["validation_status"] == "FAILED" else 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    values = vars(args)
    try:
        config = ExperimentConfig.from_sources(values, values.get("config"))
        runner = ExperimentRunner(config)
        if args.command == "generate":
            return cmd_generate(runner)
        if args.command == "coarsen":
            return cmd_coarsen(runner)
        if args.command == "solve":
            return cmd_solve(runner)
        if args.command == "sequence":
            return cmd_sequence(runner)
        return cmd_validate(runner, args.max_overlap, args.max_ratio)
    except Exception:
        logger.exception(f"Command '{args.command}' failed")
        return 1


if __name__ == "__main__":
    sys.exit(main())
