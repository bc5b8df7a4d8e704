"""
Environment utilities for runtime configuration that is not part of an experiment.
"""

import os
from dotenv import load_dotenv


def thread_count() -> int:
    """
    Number of worker threads allowed by GRADEDMG_THREADS.

    Returns:
        int: at least 1; invalid values fall back to 1
    """
    env_file = os.path.join(os.getcwd(), ".env")
    if os.path.exists(env_file):
        load_dotenv(env_file)

    raw = os.getenv("GRADEDMG_THREADS", "1").strip()
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def slow_tests_enabled() -> bool:
    """Whether acceptance-scale tests were requested through GRADEDMG_RUN_SLOW."""
    return os.getenv("GRADEDMG_RUN_SLOW", "false").lower() in ["true", "1", "yes", "on"]
