"""
Shared validation utilities for dreammpc commands.

Every validator returns ``(is_valid, sanitized_value, error_message)`` so the CLI can
report problems without raising from deep inside argument handling.
"""

import os

from dreammpc.config.constants import (
    CHECKPOINT_SUFFIX,
    MANIFEST_FILENAME,
    MAX_CONFIG_FILE_SIZE,
    MAX_PATH_LENGTH,
)


def _resolve(path: str) -> tuple[bool, str, str]:
    if not path or not isinstance(path, str):
        return False, "", "Error: Path must be a non-empty string"
    if "\0" in path:
        return False, "", "Error: Invalid path"
    try:
        real_path = os.path.realpath(os.path.abspath(path))
    except (OSError, ValueError):
        return False, "", f"Error: Invalid path: {path}"
    if len(real_path) > MAX_PATH_LENGTH:
        return False, "", "Error: Path too long"
    return True, real_path, ""


def validate_config_path(config_path: str) -> tuple[bool, str, str]:
    """Validate a run configuration file.

    Args:
        config_path: Input file path to validate

    Returns:
        Tuple of (is_valid, sanitized_path, error_message)
    """
    ok, real_path, error = _resolve(config_path)
    if not ok:
        return False, "", error
    if not os.path.exists(real_path):
        return False, "", f"Error: Config file not found: {config_path}"
    if not os.path.isfile(real_path):
        return False, "", f"Error: Not a regular file: {config_path}"
    try:
        if os.path.getsize(real_path) > MAX_CONFIG_FILE_SIZE:
            return False, "", f"Error: Config file too large: {config_path}"
    except OSError:
        return False, "", f"Error: Cannot access file: {config_path}"
    if not os.access(real_path, os.R_OK):
        return False, "", f"Error: Permission denied: {config_path}"
    return True, real_path, ""


def validate_checkpoint_path(checkpoint_path: str) -> tuple[bool, str, str]:
    """Validate a checkpoint file (must exist and carry the checkpoint suffix)."""
    ok, real_path, error = _resolve(checkpoint_path)
    if not ok:
        return False, "", error
    if not os.path.isfile(real_path):
        return False, "", f"Error: Checkpoint not found: {checkpoint_path}"
    if not real_path.endswith(CHECKPOINT_SUFFIX):
        return False, "", f"Error: Not a checkpoint file ({CHECKPOINT_SUFFIX}): {checkpoint_path}"
    return True, real_path, ""


def validate_horizons(spec: str) -> tuple[bool, list[int], str]:
    """Parse a comma-separated list of positive horizons such as ``"1,5,10,20,30"``."""
    if not spec or not spec.strip():
        return False, [], "Error: Horizon list is empty"
    horizons = []
    for part in spec.split(","):
        part = part.strip()
        try:
            value = int(part)
        except ValueError:
            return False, [], f"Error: Invalid horizon: {part!r}"
        if value < 1:
            return False, [], f"Error: Horizon must be at least 1, got {value}"
        horizons.append(value)
    return True, horizons, ""


def validate_run_directory(run_dir: str) -> tuple[bool, str, str]:
    """Check that ``run_dir`` can receive a new run.

    A directory holding a completed manifest is refused; a missing or empty
    directory, or one left behind by an aborted or interrupted run, is accepted.
    """
    ok, real_path, error = _resolve(run_dir)
    if not ok:
        return False, "", error
    if os.path.exists(real_path) and not os.path.isdir(real_path):
        return False, "", f"Error: Run path exists and is not a directory: {run_dir}"
    manifest = os.path.join(real_path, MANIFEST_FILENAME)
    if os.path.isfile(manifest):
        try:
            with open(manifest, encoding="utf-8") as f:
                if '"status": "completed"' in f.read():
                    return False, "", f"Error: Run directory already holds a completed run: {run_dir}"
        except OSError:
            return False, "", f"Error: Cannot read manifest in {run_dir}"
    return True, real_path, ""
