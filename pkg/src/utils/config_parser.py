import os
from typing import Any, Dict, Iterable

import yaml

from logger import setup_logger

logger = setup_logger(__name__)


class ExperimentConfigLoader:
    """Reads experiment parameters from a YAML file."""

    def __init__(self, known_keys: Iterable[str]):
        self.known_keys = set(known_keys)

    def load(self, path: str) -> Dict[str, Any]:
        """
        Load ``path`` and keep only recognised keys.

        Dashes in keys are accepted as underscores (``min-coarse`` == ``min_coarse``).

        Raises:
            FileNotFoundError: If the file does not exist
            ValueError: If the file is not a YAML mapping
        """
        if not os.path.exists(path):
            raise FileNotFoundError(f"Experiment config not found at {path}")

        with open(path, "r") as file:
            raw = yaml.safe_load(file)

        if raw is None:
            return {}
        if not isinstance(raw, dict):
            raise ValueError(f"Experiment config {path} must be a mapping, got {type(raw).__name__}")

        values = {}
        for key, value in raw.items():
            name = str(key).replace("-", "_")
            if name not in self.known_keys:
                logger.warning(f"Ignoring unknown key '{key}' in {path}")
                continue
            values[name] = value
        logger.debug(f"Loaded {len(values)} experiment settings from {path}")
        return values
