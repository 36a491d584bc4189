"""
Toolkit settings.
Loads configs/defaults.yaml once and exposes typed sections.
"""

import os
from pathlib import Path
from typing import Any, Dict, List

import yaml
from pydantic import BaseModel, Field

TOOL_VERSION = "1.0.0"

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULTS_PATH = REPO_ROOT / "configs" / "defaults.yaml"


class SimulationDefaults(BaseModel):
    horizon: int = Field(1_000_000, ge=1)
    seed: int = 2024
    kappa: float = Field(2.0, gt=0)
    mem_n: int = Field(10, ge=1)
    delta: float = Field(1.0, gt=0)
    warmup: int = Field(0, ge=0)


class ReproductionDefaults(BaseModel):
    slots: int = Field(1_000_000, ge=1)
    seed: int = 7
    tolerance_floor: float = 0.01
    sigma_multiplier: float = 4.0
    uniform_period: int = Field(5, ge=1)


def _fig5_sources() -> List[Dict[str, Any]]:
    return [
        {"model": "dtmc", "n": 3, "p": 0.1},
        {"model": "dtmc", "n": 3, "p": 0.3},
        {"model": "bdmp", "n": 3, "p": 0.1, "q": 0.2},
        {"model": "bdmp", "n": 3, "p": 0.2, "q": 0.7},
    ]


def _fig6_sources() -> List[Dict[str, Any]]:
    return [
        {"model": "dtmc", "n": 2, "p": 0.4},
        {"model": "dtmc", "n": 2, "p": 0.8},
        {"model": "bdmp", "n": 2, "p": 0.2, "q": 0.5},
        {"model": "bdmp", "n": 2, "p": 0.6, "q": 0.5},
    ]


class Fig5Defaults(BaseModel):
    """Memory cost against the SNR threshold."""

    sources: List[Dict[str, Any]] = Field(default_factory=_fig5_sources)
    p_alpha: float = 0.7
    uniform_period: int = 5
    kappa: float = 2.0
    mem_n: int = 10
    gamma_db: List[float] = Field(default_factory=lambda: [0.0, 2.0, 4.0, 6.0, 8.0, 10.0])
    p_s_at_0db: float = 0.922
    p_tx_mw: float = 1.0
    r_m: float = 30.0
    beta: float = 4.0


class Fig6Defaults(BaseModel):
    """Budgeted RS optimum against the success probability."""

    sources: List[Dict[str, Any]] = Field(default_factory=_fig6_sources)
    p_s: List[float] = Field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
    eta: List[float] = Field(default_factory=lambda: [0.1, 0.3, 0.5, 0.7, 0.9])


class SolverDefaults(BaseModel):
    tolerance: float = 1e-13
    max_iterations: int = 1_000_000
    check_tolerance: float = 1e-10


class Settings(BaseModel):
    """Typed view of the defaults file."""

    simulation: SimulationDefaults = Field(default_factory=SimulationDefaults)
    reproduction: ReproductionDefaults = Field(default_factory=ReproductionDefaults)
    fig5: Fig5Defaults = Field(default_factory=Fig5Defaults)
    fig6: Fig6Defaults = Field(default_factory=Fig6Defaults)
    solver: SolverDefaults = Field(default_factory=SolverDefaults)


def load_settings(path: Path = None) -> Settings:
    """
    Load settings from YAML.

    Args:
        path: Defaults file; TRACKSIM_DEFAULTS or configs/defaults.yaml when omitted

    Returns:
        Parsed settings (built-in defaults if the file is missing)
    """
    path = Path(path or os.getenv("TRACKSIM_DEFAULTS", str(DEFAULTS_PATH)))
    if not path.exists():
        return Settings()
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    return Settings.model_validate(raw)


# Global settings instance
settings = load_settings()
