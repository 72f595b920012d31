"""Process-level switches read from ``DMPC_*`` variables."""

import logging
import os

from dreammpc.config.constants import MAX_WORKERS_LIMIT

logger = logging.getLogger(__name__)


def get_max_workers(default: int = 4) -> int:
    """Thread count for study grids, from ``DMPC_THREADS``.

    Clamped to ``[1, min(MAX_WORKERS_LIMIT, 2 * cpu_count)]``; an unparsable value
    falls back to ``default``.
    """
    raw = os.environ.get("DMPC_THREADS")
    if raw is None:
        requested = default
    else:
        try:
            requested = int(raw)
        except ValueError:
            logger.warning("Ignoring DMPC_THREADS=%r, using %d workers", raw, default)
            return default
    cpus = os.cpu_count()
    ceiling = min(MAX_WORKERS_LIMIT, 2 * cpus) if cpus else MAX_WORKERS_LIMIT
    return max(1, min(requested, ceiling))


def debug_log_path() -> str | None:
    """Debug log file when DMPC_DEBUG is set, else None."""
    if not os.getenv("DMPC_DEBUG"):
        return None
    default = os.path.join(os.environ.get("TMPDIR", "/tmp"), "dreammpc-debug.log")
    return os.getenv("DMPC_LOG_FILE", default)
