"""Atomic file writes for checkpoints, manifests and config snapshots."""

import contextlib
import os
import tempfile


def write_bytes_atomically(path: str, data: bytes) -> None:
    """Write ``data`` to ``path`` so readers see either the old file or the new one.

    The bytes go to a temporary file next to ``path``, are fsynced and then
    renamed over the destination.

    Raises:
        OSError: If the directory is missing or the write fails
    """
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(suffix=".tmp", prefix=".dmpc_", dir=directory)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_path, path)
    except OSError as e:
        with contextlib.suppress(OSError):
            os.remove(tmp_path)
        raise OSError(f"atomic write of {path} failed: {e}") from e


def write_text_atomically(path: str, content: str) -> None:
    """UTF-8 variant of :func:`write_bytes_atomically`; ``content`` is written as-is."""
    write_bytes_atomically(path, content.encode("utf-8"))
