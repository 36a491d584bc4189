"""
Result storage.
Writes CSV tables through pandas and a JSON run manifest next to each one.
"""

import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd
from pydantic import BaseModel, Field

from services.config import TOOL_VERSION

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"


class RunManifest(BaseModel):
    """Everything needed to re-derive a CSV bit-exactly."""

    command: str
    config: Dict[str, Any] = Field(default_factory=dict, description="Resolved configuration, defaults expanded")
    tool_version: str = TOOL_VERSION
    seeds: List[int] = Field(default_factory=list)
    output: str
    duration_s: float
    created_at: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())


def manifest_path(out: Union[str, Path]) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def write_csv(frame: pd.DataFrame, out: Optional[Union[str, Path]] = None) -> Optional[Path]:
    """
    Write a table with ten significant digits and a '.' decimal separator.

    Args:
        frame: Table to write
        out: Destination path; stdout when None

    Returns:
        The written path, or None for stdout
    """
    if out is None:
        frame.to_csv(sys.stdout, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return None
    path = Path(out)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("wrote %d rows to %s", len(frame), path)
    return path


def write_manifest(manifest: RunManifest) -> Path:
    """Write the manifest as <output>.manifest.json."""
    path = manifest_path(manifest.output)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.model_dump(mode="json"), fh, indent=2, sort_keys=True)
    return path


def joint_chain_frame(matrix, n: int) -> pd.DataFrame:
    """Label an N^2 x N^2 joint-chain matrix with its (x, x_hat) pairs."""
    labels = [f"({i},{j})" for i in range(n) for j in range(n)]
    frame = pd.DataFrame(matrix, index=labels, columns=labels)
    frame.index.name = "from"
    return frame.reset_index()
