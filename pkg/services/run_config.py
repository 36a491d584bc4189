"""
Run configuration files.
JSON or YAML documents describing a source, channel, policy and optional budget.
"""

import copy
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import ValidationError

from agents.engine import SimConfig
from agents.optimize import Budget
from services.errors import ConfigurationError

logger = logging.getLogger(__name__)

# Bare sweep axis names and the config section each one lives in.
AXIS_SECTIONS = {
    "p": "source",
    "q": "source",
    "n": "source",
    "p_s": "channel",
    "gamma_db": "channel",
    "gamma": "channel",
    "sigma2_mw": "channel",
    "p_tx_mw": "channel",
    "r_m": "channel",
    "beta": "channel",
    "p_alpha": "policy",
    "d": "policy",
    "delta_max": "budget",
}


class RunConfig(SimConfig):
    """SimConfig plus the optional sampling budget used by the optimizer."""

    budget: Optional[Budget] = None


def load_raw(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a run configuration document.

    Args:
        path: .json, .yaml or .yml file

    Returns:
        Parsed mapping
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            raw = yaml.safe_load(text)
        else:
            raw = json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return raw


def build_run_config(raw: Dict[str, Any], **overrides) -> RunConfig:
    """
    Validate a raw mapping, applying non-None top-level overrides first.

    Raises:
        pydantic.ValidationError with field paths on schema violations
    """
    data = dict(raw)
    data.update({key: value for key, value in overrides.items() if value is not None})
    return RunConfig.model_validate(data)


def load_run_config(path: Union[str, Path], **overrides) -> RunConfig:
    """Load and validate a run configuration file."""
    cfg = build_run_config(load_raw(path), **overrides)
    logger.debug("loaded %s: %s N=%d policy=%s", path, cfg.source.model, cfg.source.n, cfg.policy.kind)
    return cfg


def describe_validation_error(exc: ValidationError) -> str:
    """One line per error: dotted field path and message."""
    lines: List[str] = []
    for error in exc.errors():
        location = ".".join(str(part) for part in error.get("loc", ())) or "<root>"
        lines.append(f"{location}: {error.get('msg', 'invalid value')}")
    return "\n".join(lines)


def resolve_axis(raw: Dict[str, Any], axis: str) -> List[str]:
    """
    Turn a sweep axis name into a key path.

    Accepts dotted paths ("channel.p_s") or bare names ("p_s").
    """
    parts = axis.split(".")
    if len(parts) == 1:
        section = AXIS_SECTIONS.get(axis)
        if section is None and axis in SimConfig.model_fields:
            return [axis]
        if section is None:
            raise ConfigurationError(f"unknown sweep parameter: {axis}")
        parts = [section, axis]

    if len(parts) != 2 or AXIS_SECTIONS.get(parts[1]) != parts[0]:
        raise ConfigurationError(f"unknown sweep parameter: {axis}")
    return parts


def with_value(raw: Dict[str, Any], path: List[str], value: Any) -> Dict[str, Any]:
    """Copy of raw with the value at path replaced."""
    data = copy.deepcopy(raw)
    if len(path) == 1:
        data[path[0]] = value
        return data
    section = data.setdefault(path[0], {})
    if not isinstance(section, dict):
        raise ConfigurationError(f"{path[0]} is not a mapping")
    section[path[1]] = value
    if path[0] == "channel" and path[1] in ("gamma_db", "gamma"):
        # Only one threshold form may be present.
        section.pop("gamma" if path[1] == "gamma_db" else "gamma_db", None)
    return data
