from typing import Optional

from constants import SUFFICIENT_DECREASE_C_M
from logger import setup_logger
from tools.hierarchy import MeshHierarchy
from tools.remesh_base import RemeshConfig
from utils import geometry


logger = setup_logger(__name__)


class HierarchyValidator:
    """
    Checks a mesh hierarchy against the properties multigrid relies on.

    Errors mark hierarchies that should not be used (inverted cells, levels that do not
    shrink). Warnings mark quality concerns such as retained vertices or large overlap.
    """

    def __init__(
        self,
        hierarchy: MeshHierarchy,
        config: Optional[RemeshConfig] = None,
        max_overlap: Optional[int] = None,
        max_ratio: Optional[float] = None,
    ):
        """
        Initialize the validator.

        Args:
            hierarchy: hierarchy to check, finest level first
            config: remeshing parameters holding the aspect-ratio caps
            max_overlap: warn when a level's overlap count exceeds this
            max_ratio: warn when a level's length-scale ratio exceeds this
        """
        self.hierarchy = hierarchy
        self.config = config or RemeshConfig()
        self.max_overlap = max_overlap
        self.max_ratio = max_ratio
        self._initialize_result()

    def validate(self) -> dict:
        """
        Run every check.

        Returns:
            dict: validation_status ("PASSED", "WARNINGS" or "FAILED") with errors,
            warnings, suggestions and per-level statistics
        """
        logger.info(f"Validating {self.hierarchy.n_levels}-level hierarchy")

        try:
            if self.hierarchy.n_levels == 0:
                self.result["errors"].append({
                    "type": "EMPTY_HIERARCHY",
                    "message": "Hierarchy has no levels",
                    "remediation": "Build the hierarchy from a non-empty mesh",
                })
                self.result["validation_status"] = "FAILED"
                return self.result

            self._validate_orientation()
            self._validate_decrease()
            self._validate_aspect_ratios()
            self._validate_overlap()
            self._validate_retained()
            self._collect_level_stats()

            self._set_final_status()

        except Exception as e:
            self._handle_validation_error(e)

        return self.result

    def _initialize_result(self) -> None:
        self.result = {
            "levels": self.hierarchy.n_levels,
            "validation_status": "PASSED",
            "errors": [],
            "warnings": [],
            "suggestions": [],
            "level_stats": [],
        }

    def _validate_orientation(self) -> None:
        for k, mesh in enumerate(self.hierarchy.levels):
            bad = int((~geometry.is_positively_oriented(mesh.cell_points())).sum())
            if bad:
                self.result["errors"].append({
                    "type": "NON_POSITIVE_CELLS",
                    "level": k,
                    "message": f"Level {k} has {bad} cells with non-positive orientation",
                    "remediation": "Regenerate the level; remeshing must never create inverted cells",
                })

    def _validate_decrease(self) -> None:
        levels = self.hierarchy.levels
        if len(levels) == 1:
            self.result["warnings"].append({
                "type": "SINGLE_LEVEL",
                "message": f"Hierarchy has a single level with {levels[0].n_vertices} vertices",
                "remediation": "Lower min_coarse or start from a finer mesh to enable multigrid",
            })
            return
        for k in range(1, len(levels)):
            fine, coarse = levels[k - 1], levels[k]
            if coarse.n_vertices >= fine.n_vertices:
                self.result["errors"].append({
                    "type": "NO_COARSENING",
                    "level": k,
                    "message": f"Level {k} has {coarse.n_vertices} vertices, not fewer than level {k - 1}",
                    "remediation": "Rebuild the hierarchy; each level must remove vertices",
                })
            elif fine.n_cells <= SUFFICIENT_DECREASE_C_M * coarse.n_cells:
                self.result["errors"].append({
                    "type": "INSUFFICIENT_DECREASE",
                    "level": k,
                    "message": (
                        f"Level {k} keeps {coarse.n_cells} of {fine.n_cells} cells; "
                        f"needs fewer than 1/{SUFFICIENT_DECREASE_C_M:g}"
                    ),
                    "remediation": "Increase beta so that more vertices are removed per level",
                })

    def _validate_aspect_ratios(self) -> None:
        levels = self.hierarchy.levels
        finest_ar = float(levels[0].aspect_ratios().max())
        cap = max(self.config.cap(levels[0].dim), finest_ar)
        for k, mesh in enumerate(levels[1:], start=1):
            max_ar = float(mesh.aspect_ratios().max())
            if max_ar > cap:
                self.result["warnings"].append({
                    "type": "ASPECT_RATIO",
                    "level": k,
                    "message": f"Level {k} max aspect ratio {max_ar:.2f} exceeds {cap:.2f}",
                    "remediation": "Lower the aspect-ratio cap or re-detect features with a smaller C_K",
                })

    def _validate_overlap(self) -> None:
        for m in self.hierarchy.metrics:
            if m.max_overlap is None:
                continue
            if self.max_overlap is not None and m.max_overlap > self.max_overlap:
                self.result["warnings"].append({
                    "type": "OVERLAP",
                    "level": m.level,
                    "message": f"Level {m.level} overlap {m.max_overlap} exceeds {self.max_overlap}",
                    "remediation": "Use a smaller beta to keep adjacent levels comparable",
                })
            if self.max_ratio is not None and m.max_ratio is not None and m.max_ratio > self.max_ratio:
                self.result["warnings"].append({
                    "type": "LENGTHSCALE_RATIO",
                    "level": m.level,
                    "message": f"Level {m.level} length-scale ratio {m.max_ratio:.2f} exceeds {self.max_ratio:.2f}",
                    "remediation": "Use a smaller beta to keep adjacent levels comparable",
                })
        if not self.hierarchy.metrics and self.hierarchy.n_levels > 1:
            self.result["suggestions"].append(
                "Overlap metrics were not computed; build or load the hierarchy with compute_metrics=True"
            )

    def _validate_retained(self) -> None:
        for k, report in enumerate(self.hierarchy.reports, start=1):
            if report.retained:
                self.result["warnings"].append({
                    "type": "RETAINED_VERTICES",
                    "level": k,
                    "vertices": list(report.retained),
                    "message": f"Level {k} retained {len(report.retained)} vertices marked for removal",
                    "remediation": "Raise the aspect-ratio cap if retained vertices cluster near features",
                })

    def _collect_level_stats(self) -> None:
        if self.hierarchy.metrics:
            self.result["level_stats"] = self.hierarchy.to_dataframe().to_dict(orient="records")
        else:
            self.result["level_stats"] = [
                {"level": k, "cells": m.n_cells, "vertices": m.n_vertices}
                for k, m in enumerate(self.hierarchy.levels)
            ]

    def _set_final_status(self) -> None:
        """Set the final validation status based on errors and warnings."""
        if self.result["errors"]:
            self.result["validation_status"] = "FAILED"
        elif self.result["warnings"]:
            self.result["validation_status"] = "WARNINGS"
        else:
            self.result["validation_status"] = "PASSED"

    def _handle_validation_error(self, error: Exception) -> None:
        logger.error(f"Error during validation: {error}")
        self.result["errors"].append({
            "type": "VALIDATION_ERROR",
            "message": f"Unexpected error during validation: {str(error)}",
            "remediation": "Check that every level is a valid simplicial mesh",
        })
        self.result["validation_status"] = "FAILED"
