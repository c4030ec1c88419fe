"""Utility functions for the project."""

import hashlib
import os
from functools import lru_cache

from biopars.config import DEFAULT_MAX_THREADS, THREADS_ENV_VAR
from biopars.errors import ConfigurationError


def resolve_thread_count() -> int:
    """Number of scoring threads, capped by the BIOPARS_THREADS environment variable."""
    default = min(DEFAULT_MAX_THREADS, os.cpu_count() or 1)
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}")
    if value < 1:
        raise ConfigurationError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}")
    return value


@lru_cache(maxsize=4096)
def text_seed(text: str, salt: int = 0) -> int:
    """Stable 64-bit seed derived from a string (independent of PYTHONHASHSEED)."""
    digest = hashlib.blake2b(f"{salt}:{text}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")
