"""Logging setup, command timing and streamed CSV output."""

import logging
import sys
import time
from collections.abc import Callable
from enum import Enum
from functools import wraps

import pandas as pd
from pydantic import BaseModel

from dreammpc.utils.environment import debug_log_path

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"
_LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(verbose: bool = False) -> None:
    """Attach handlers for the CLI process; library code never calls this."""
    root = logging.getLogger("dreammpc")
    path = debug_log_path()
    if path:
        handler = logging.FileHandler(path)
        handler.setFormatter(logging.Formatter(_LOG_FORMAT))
        handler.setLevel(logging.DEBUG)
        root.addHandler(handler)
        root.setLevel(logging.DEBUG)
    if verbose:
        stream = logging.StreamHandler(sys.stderr)
        stream.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        stream.setLevel(logging.INFO)
        root.addHandler(stream)
        if root.level == logging.NOTSET or root.level > logging.INFO:
            root.setLevel(logging.INFO)


def log_command_execution(command_name: str):
    """Decorator to log start, duration and status of a CLI command"""

    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            logger.info("Command %s started", command_name)
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                execution_time = (time.perf_counter() - start_time) * 1000
                logger.info(
                    "Command %s finished in %.1f ms with status error (%s)",
                    command_name,
                    execution_time,
                    type(e).__name__,
                )
                raise
            execution_time = (time.perf_counter() - start_time) * 1000
            logger.info(
                "Command %s finished in %.1f ms with status success", command_name, execution_time
            )
            return result

        return wrapper

    return decorator


class CsvStreamWriter:
    """Append-only CSV with a fixed header, written through pandas in chunks.

    The header is emitted exactly once, even when no row is ever written.
    """

    def __init__(self, path: str, columns: list[str], flush_every: int = 256):
        self.path = path
        self.columns = list(columns)
        self.flush_every = flush_every
        self._pending: list[dict] = []
        self._header_written = False
        self.rows_written = 0

    def write(self, row: dict | BaseModel) -> None:
        if isinstance(row, BaseModel):
            row = {k: (v.value if isinstance(v, Enum) else v) for k, v in row.model_dump().items()}
        missing = set(self.columns) - set(row)
        if missing:
            raise KeyError(f"row is missing columns: {sorted(missing)}")
        self._pending.append({c: row[c] for c in self.columns})
        if len(self._pending) >= self.flush_every:
            self.flush()

    def flush(self) -> None:
        if not self._pending and self._header_written:
            return
        frame = pd.DataFrame(self._pending, columns=self.columns)
        frame.to_csv(
            self.path,
            mode="a" if self._header_written else "w",
            header=not self._header_written,
            index=False,
            float_format=CSV_FLOAT_FORMAT,
            lineterminator="\n",
            na_rep="nan",
        )
        self.rows_written += len(self._pending)
        self._header_written = True
        self._pending = []

    def close(self) -> None:
        self.flush()

    def __enter__(self) -> "CsvStreamWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_csv(path: str, rows: list[dict], columns: list[str]) -> None:
    """One-shot variant of :class:`CsvStreamWriter`."""
    with CsvStreamWriter(path, columns) as writer:
        for row in rows:
            writer.write(row)
