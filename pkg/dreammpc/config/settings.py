"""
Run configuration: defaults, config file, environment and command-line overrides.

Sources are applied in priority order (later wins):

1. Built-in defaults (``dreammpc.config.constants``)
2. A named ablation preset (``--preset``)
3. A ``key = value`` file with ``[section]`` headers
4. Environment variables ``DMPC_<SECTION>_<KEY>``
5. ``--set section.key=value`` overrides
"""

import configparser
import logging
import math
import os
from collections.abc import Iterable, Mapping
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from dreammpc.errors import ConfigError
from dreammpc.model.models import (
    EnvConfig,
    EvalConfig,
    ModelConfig,
    MPPIConfig,
    PlannerConfig,
    RunSection,
    TrainConfig,
)

logger = logging.getLogger(__name__)

SECTION_ORDER = ("run", "env", "model", "planner", "mppi", "train", "eval")

SECTION_MODELS: dict[str, type[BaseModel]] = {
    "run": RunSection,
    "env": EnvConfig,
    "model": ModelConfig,
    "planner": PlannerConfig,
    "mppi": MPPIConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
}

PRESETS: dict[str, dict[str, dict[str, str]]] = {
    "no_gradient_ascent": {"planner": {"iterations": "0"}},
    "no_policy_prior": {
        "planner": {"proposal": "gaussian", "num_candidates": "512", "iterations": "5"}
    },
    "no_uncertainty_reg": {"planner": {"uncertainty_coef": "0"}},
    "no_action_reuse": {"planner": {"reuse_coef": "0"}},
}

_NONE_STRINGS = {"", "none", "null"}


class RunConfig(BaseModel):
    """Everything that determines a run."""

    model_config = ConfigDict(extra="forbid")

    run: RunSection = Field(default_factory=RunSection)
    env: EnvConfig = Field(default_factory=EnvConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    planner: PlannerConfig = Field(default_factory=PlannerConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    def section(self, name: str) -> BaseModel:
        if name == "mppi":
            return self.planner.mppi
        return getattr(self, name)

    def render(self) -> str:
        """Byte-stable snapshot that :func:`parse_config_text` reloads to an equal config."""
        blocks = []
        for name in SECTION_ORDER:
            section = self.section(name)
            lines = [f"[{name}]"]
            for key in SECTION_MODELS[name].model_fields:
                if name == "planner" and key == "mppi":
                    continue
                lines.append(f"{key} = {_render_value(getattr(section, key))}")
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks) + "\n"


def _render_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def _empty_layers() -> dict[str, dict[str, str]]:
    return {name: {} for name in SECTION_ORDER}


def _merge(base: dict[str, dict[str, str]], layer: Mapping[str, Mapping[str, str]], source: str):
    for section, values in layer.items():
        if section not in SECTION_MODELS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        fields = SECTION_MODELS[section].model_fields
        for key, value in values.items():
            if key not in fields or (section == "planner" and key == "mppi"):
                raise ConfigError(f"{source}: unknown key '{key}' in [{section}]")
            base[section][key] = value


def _read_ini(text: str, source: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), default_section="__defaults__"
    )
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e}") from e
    return {section: dict(parser.items(section)) for section in parser.sections()}


def _env_layer(environ: Mapping[str, str]) -> dict[str, dict[str, str]]:
    layer = _empty_layers()
    for section, model in SECTION_MODELS.items():
        for key in model.model_fields:
            if section == "planner" and key == "mppi":
                continue
            var = f"DMPC_{section.upper()}_{key.upper()}"
            if var in environ:
                layer[section][key] = environ[var]
    return layer


def parse_override(override: str) -> tuple[str, str, str]:
    """Split ``section.key=value``."""
    if "=" not in override:
        raise ConfigError(f"override '{override}' is not of the form section.key=value")
    target, value = override.split("=", 1)
    if "." not in target:
        raise ConfigError(f"override '{override}' is missing a section")
    section, key = target.strip().split(".", 1)
    return section, key.strip(), value.strip()


def _build(layers: dict[str, dict[str, str]]) -> RunConfig:
    def clean(values: dict[str, str]) -> dict:
        return {k: (None if v.strip().lower() in _NONE_STRINGS else v.strip()) for k, v in values.items()}

    try:
        planner = dict(clean(layers["planner"]))
        planner["mppi"] = MPPIConfig(**clean(layers["mppi"]))
        return RunConfig(
            run=RunSection(**clean(layers["run"])),
            env=EnvConfig(**clean(layers["env"])),
            model=ModelConfig(**clean(layers["model"])),
            planner=PlannerConfig(**planner),
            train=TrainConfig(**clean(layers["train"])),
            eval=EvalConfig(**clean(layers["eval"])),
        )
    except ValidationError as e:
        errors = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"invalid configuration: {errors}") from e


def load_run_config(
    path: str | None = None,
    overrides: Iterable[str] = (),
    *,
    preset: str | None = None,
    environ: Mapping[str, str] | None = None,
) -> RunConfig:
    """Resolve a RunConfig from all sources. Raises ConfigError on any problem."""
    layers = _empty_layers()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}' (choose from {', '.join(sorted(PRESETS))})")
        _merge(layers, PRESETS[preset], f"preset {preset}")
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        _merge(layers, _read_ini(text, path), path)
    _merge(layers, _env_layer(os.environ if environ is None else environ), "environment")
    cli: dict[str, dict[str, str]] = _empty_layers()
    for override in overrides:
        section, key, value = parse_override(override)
        cli.setdefault(section, {})[key] = value
    _merge(layers, cli, "--set")
    config = _build(layers)
    logger.debug("Resolved configuration for run '%s'", config.run.name)
    return config


def parse_config_text(text: str) -> RunConfig:
    """Load a rendered snapshot (no environment or preset layers)."""
    layers = _empty_layers()
    _merge(layers, _read_ini(text, "<snapshot>"), "<snapshot>")
    return _build(layers)
