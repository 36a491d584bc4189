"""
Parameter sweeps over a run configuration.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from agents.analytic import analyzer
from agents.engine import SCALAR_METRICS, MetricsReport, simulator
from services.run_config import RunConfig, build_run_config, resolve_axis, with_value

logger = logging.getLogger(__name__)


def _simulate_point(cfg: RunConfig) -> MetricsReport:
    return simulator.run(cfg)


class ParameterSweep:
    """Evaluates one configuration at every point of a parameter grid."""

    def configs(self, raw: Dict[str, Any], axis: str, grid: Sequence[float],
                horizon: Optional[int] = None, seed: Optional[int] = None) -> List[RunConfig]:
        """Validated configurations, one per grid point."""
        path = resolve_axis(raw, axis)
        return [build_run_config(with_value(raw, path, value), horizon=horizon, seed=seed) for value in grid]

    def run(self, raw: Dict[str, Any], axis: str, grid: Sequence[float], analytic: bool = False,
            workers: Optional[int] = None, horizon: Optional[int] = None,
            seed: Optional[int] = None) -> pd.DataFrame:
        """
        Sweep one parameter.

        Args:
            raw: Parsed run configuration
            axis: Parameter name, bare ("p_s") or dotted ("channel.p_s")
            grid: Values to evaluate
            analytic: Evaluate with the analytic layer instead of simulating
            workers: Process count for simulated points
            horizon: Override of the simulated horizon
            seed: Override of the base seed

        Returns:
            Long-form DataFrame: parameter, point, method, metric, value
        """
        configs = self.configs(raw, axis, grid, horizon, seed)
        logger.info("sweeping %s over %d points (%s)", axis, len(configs), "analytic" if analytic else "simulated")

        if analytic:
            reports = [analyzer.evaluate(cfg) for cfg in configs]
        elif workers and workers > 1 and len(configs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                reports = list(pool.map(_simulate_point, configs))
        else:
            reports = [simulator.run(cfg) for cfg in configs]

        rows = []
        for point, report in zip(grid, reports):
            for metric in SCALAR_METRICS:
                rows.append({
                    "parameter": axis,
                    "point": point,
                    "method": report.method,
                    "metric": metric,
                    "value": getattr(report, metric),
                })
        return pd.DataFrame(rows, columns=["parameter", "point", "method", "metric", "value"])


# Global sweep instance
sweeper = ParameterSweep()
