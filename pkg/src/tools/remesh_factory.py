from typing import Iterable, Optional, Tuple, Type

from logger import setup_logger
from tools.contraction_remesher import ContractionRemesher
from tools.delaunay_remesher import DelaunayRemesher
from tools.mesh import SimplicialMesh
from tools.remesh_base import BaseRemesher, RemeshConfig, RemeshReport

logger = setup_logger(__name__)


class RemesherFactory:
    """
    Creates the vertex-removal strategy for a mesh dimension.

    2D meshes get Delaunay deletion with contraction fallback; 3D meshes get
    quality-conserving edge contraction.
    """

    _remesher_classes = {
        2: DelaunayRemesher,
        3: ContractionRemesher,
    }

    @classmethod
    def create_remesher(cls, dim: int, config: Optional[RemeshConfig] = None) -> BaseRemesher:
        """
        Raises:
            ValueError: If no remesher exists for the dimension
        """
        if dim not in cls._remesher_classes:
            raise ValueError(
                f"Unsupported mesh dimension: {dim}. Supported dimensions: {cls.get_supported_dimensions()}"
            )
        remesher_class = cls._remesher_classes[dim]
        logger.debug(f"Creating {remesher_class.__name__} for {dim}D mesh")
        return remesher_class(config)

    @classmethod
    def get_supported_dimensions(cls) -> list[int]:
        return list(cls._remesher_classes.keys())

    @classmethod
    def register_remesher(cls, dim: int, remesher_class: Type[BaseRemesher]) -> None:
        if not issubclass(remesher_class, BaseRemesher):
            raise ValueError("Remesher class must inherit from BaseRemesher")
        cls._remesher_classes[dim] = remesher_class
        logger.info(f"Registered {remesher_class.__name__} for {dim}D meshes")


def remesh_with_report(
    mesh: SimplicialMesh, keep: Iterable[int], config: Optional[RemeshConfig] = None
) -> Tuple[SimplicialMesh, RemeshReport]:
    return RemesherFactory.create_remesher(mesh.dim, config).remesh(mesh, keep)


def remesh(mesh: SimplicialMesh, keep: Iterable[int], config: Optional[RemeshConfig] = None) -> SimplicialMesh:
    """
    Remove every vertex outside ``keep``; the report is stored in ``metadata["remesh_report"]``.
    """
    coarse, report = remesh_with_report(mesh, keep, config)
    coarse.metadata["remesh_report"] = report
    return coarse
