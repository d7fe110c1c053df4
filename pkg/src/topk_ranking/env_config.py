"""
Environment configuration for topk-ranking.

Loads environment variables from:
1. The file named by TOPK_RANKING_ENV_FILE (default ~/.topk_ranking.env), if it exists
2. System environment variables (which override .env values)
"""

import os
from pathlib import Path
from typing import Optional

ENV_FILE = Path(os.environ.get("TOPK_RANKING_ENV_FILE", Path.home() / ".topk_ranking.env"))


def load_env_file(path: Path = ENV_FILE):
    """Load environment variables from a KEY=VALUE file if it exists."""
    if not path.exists():
        return

    with open(path) as f:
        for line in f:
            line = line.strip()

            if not line or line.startswith("#"):
                continue

            if "=" in line:
                key, value = line.split("=", 1)
                key = key.strip()
                value = value.strip()

                # Only set if not already in environment
                if key not in os.environ:
                    os.environ[key] = value


load_env_file()


def get_env(key: str, default: Optional[str] = None) -> Optional[str]:
    """Get environment variable with optional default."""
    return os.getenv(key, default)


def get_int_env(key: str, default: int) -> int:
    """Get an integer environment variable, falling back to default on bad input."""
    raw = os.getenv(key)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        return default
