"""
Time-slotted Monte-Carlo tracking simulator.
Source step, policy decision, channel resolution, then metric accumulation, once per slot.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from agents.channel import ChannelSpec, PhysicalChannel, success_probability
from agents.policies import PolicySpec, make_decider
from agents.sources import SourceModel, cumulative_rows, step_from_cumulative
from services.config import settings
from services.errors import ChannelModeError

logger = logging.getLogger(__name__)

# Slots of random draws generated per refill.
DRAW_CHUNK = 65_536

SCALAR_METRICS = (
    "p_e",
    "variance",
    "actuation_cost",
    "consecutive_error",
    "memory_cost",
    "sampling_rate",
    "sampling_cost",
)


class SimConfig(BaseModel):
    """One simulation run: source, channel, policy, horizon and cost parameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    source: SourceModel
    channel: ChannelSpec
    policy: PolicySpec
    horizon: int = Field(default_factory=lambda: settings.simulation.horizon, ge=1, description="Measured slots T")
    seed: int = Field(default_factory=lambda: settings.simulation.seed, ge=0, lt=2 ** 64)
    x0: int = Field(0, ge=0, description="Initial source state")
    xhat0: int = Field(0, ge=0, description="Initial reconstructed state")
    cost_matrix: Optional[List[List[float]]] = Field(None, description="N x N actuation cost, zero diagonal")
    kappa: float = Field(default_factory=lambda: settings.simulation.kappa, gt=0, description="Memory-error base")
    mem_n: int = Field(default_factory=lambda: settings.simulation.mem_n, ge=1, description="Memory horizon")
    delta: float = Field(default_factory=lambda: settings.simulation.delta, gt=0, description="Cost per sample")
    warmup: int = Field(default_factory=lambda: settings.simulation.warmup, ge=0, description="Discarded prefix")
    replica: int = Field(0, ge=0, description="Replica index used to derive the RNG streams")
    channel_mode: Literal["probability", "fading"] = Field(
        "probability", description="Realize the channel from p_s or from exponential fading draws"
    )

    @model_validator(mode="after")
    def _check_consistency(self):
        n = self.source.n
        if self.x0 >= n or self.xhat0 >= n:
            raise ValueError(f"x0={self.x0} and xhat0={self.xhat0} must be below N={n}")
        if self.cost_matrix is not None:
            if len(self.cost_matrix) != n or any(len(row) != n for row in self.cost_matrix):
                raise ValueError(f"cost_matrix must be {n} x {n}")
            if any(self.cost_matrix[i][i] != 0 for i in range(n)):
                raise ValueError("cost_matrix diagonal must be zero")
        if self.channel_mode == "fading" and not isinstance(self.channel, PhysicalChannel):
            raise ValueError("channel_mode 'fading' needs a physical channel")
        return self


class MetricsReport(BaseModel):
    """Time-averaged metrics of a simulated or analytically evaluated run."""

    p_e: float = Field(..., ge=0.0, le=1.0, description="Time-averaged reconstruction error")
    variance: float
    actuation_cost: float
    consecutive_error: float
    memory_cost: float
    sampling_cost: float
    sampling_rate: float
    joint_occupancy: List[List[float]] = Field(..., description="Frequency of (x, x_hat) pairs")
    error_transitions: Optional[List[List[int]]] = Field(None, description="Counts of error-level transitions")
    sampled_slots: int = 0
    slots: int
    warmup: int = 0
    seed: int
    replica: int = 0
    method: Literal["simulated", "closed_form", "oracle"] = "simulated"

    def row(self) -> Dict[str, Union[float, int]]:
        """Flat CSV row."""
        data = {name: getattr(self, name) for name in SCALAR_METRICS}
        data.update({"slots": self.slots, "seed": self.seed, "replica": self.replica})
        return data


class ReplicationResult(BaseModel):
    reports: List[MetricsReport]
    mean: Dict[str, float]
    stderr: Dict[str, float]


class TrackingSimulator:
    """Runs the slot loop and pools replicas."""

    def __init__(self, chunk: int = DRAW_CHUNK):
        self.chunk = chunk

    @staticmethod
    def streams(cfg: SimConfig) -> Tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
        """Independent source, policy and channel generators for (seed, replica)."""
        root = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(cfg.replica,))
        source_ss, policy_ss, channel_ss = root.spawn(3)
        return (
            np.random.default_rng(source_ss),
            np.random.default_rng(policy_ss),
            np.random.default_rng(channel_ss),
        )

    def run(self, cfg: SimConfig, record: bool = False):
        """
        Simulate warmup + horizon slots.

        Args:
            cfg: Simulation configuration
            record: Also return the measured trajectory

        Returns:
            MetricsReport, or (MetricsReport, DataFrame of x, x_hat, streak, sampled) when record is set
        """
        n = cfg.source.n
        cum = cumulative_rows(cfg.source)
        decide = make_decider(cfg.policy)
        p_s = success_probability(cfg.channel)
        fading = cfg.channel_mode == "fading"
        if fading and not isinstance(cfg.channel, PhysicalChannel):
            raise ChannelModeError("fading realization needs a physical channel")
        threshold = cfg.channel.threshold if fading else 0.0

        if cfg.cost_matrix is None:
            cost = [[abs(i - j) for j in range(n)] for i in range(n)]
        else:
            cost = cfg.cost_matrix
        memory_weights = [0.0] + [cfg.kappa ** x for x in range(1, cfg.mem_n + 1)]
        mem_n = cfg.mem_n

        source_rng, policy_rng, channel_rng = self.streams(cfg)

        x, x_hat = cfg.x0, cfg.xhat0
        streak = 0 if x == x_hat else 1
        level = abs(x - x_hat)

        occupancy = [[0] * n for _ in range(n)]
        transitions = [[0] * n for _ in range(n)]
        errors = 0
        actuation = 0.0
        streak_sum = 0
        memory = 0.0
        sampled_slots = 0
        trace: Dict[str, list] = {"x": [], "x_hat": [], "streak": [], "sampled": []}

        total = cfg.warmup + cfg.horizon
        t = 0
        while t < total:
            size = min(self.chunk, total - t)
            u_source = source_rng.random(size).tolist()
            u_policy = policy_rng.random(size).tolist()
            if fading:
                u_channel = channel_rng.exponential(1.0, size).tolist()
            else:
                u_channel = channel_rng.random(size).tolist()

            for b in range(size):
                t += 1
                x_prev = x
                x = step_from_cumulative(cum[x], u_source[b])
                sampled = decide(t, x, x_prev, x_hat, streak, u_policy[b])
                if sampled:
                    delivered = u_channel[b] > threshold if fading else u_channel[b] < p_s
                    if delivered:
                        x_hat = x

                previous_level = level
                level = abs(x - x_hat)
                streak = 0 if level == 0 else streak + 1

                if t <= cfg.warmup:
                    continue
                occupancy[x][x_hat] += 1
                transitions[previous_level][level] += 1
                if level:
                    errors += 1
                    actuation += cost[x][x_hat]
                    streak_sum += streak
                    if streak <= mem_n:
                        memory += memory_weights[streak]
                if sampled:
                    sampled_slots += 1
                if record:
                    trace["x"].append(x)
                    trace["x_hat"].append(x_hat)
                    trace["streak"].append(streak)
                    trace["sampled"].append(sampled)

        slots = cfg.horizon
        p_e = errors / slots
        rate = sampled_slots / slots
        report = MetricsReport(
            p_e=p_e,
            variance=p_e - p_e * p_e,
            actuation_cost=actuation / slots,
            consecutive_error=streak_sum / slots,
            memory_cost=memory / slots,
            sampling_cost=cfg.delta * rate,
            sampling_rate=rate,
            joint_occupancy=(np.asarray(occupancy, dtype=float) / slots).tolist(),
            error_transitions=transitions,
            sampled_slots=sampled_slots,
            slots=slots,
            warmup=cfg.warmup,
            seed=cfg.seed,
            replica=cfg.replica,
        )
        logger.debug("run seed=%d replica=%d T=%d: p_e=%.6g rate=%.6g",
                     cfg.seed, cfg.replica, slots, p_e, rate)
        if record:
            return report, pd.DataFrame(trace)
        return report

    @staticmethod
    def consecutive_error_empirical(streaks) -> float:
        """
        Time average of the consecutive-error counter.

        Args:
            streaks: Per-slot streak values from a recorded run

        Returns:
            Mean streak; 0 for an empty trajectory
        """
        values = np.asarray(streaks, dtype=float)
        if values.size == 0:
            return 0.0
        return float(values.mean())

    def replicate(self, cfg: SimConfig, replicas: int, workers: Optional[int] = None) -> ReplicationResult:
        """
        Run independent replicas and pool their scalar metrics.

        Replica r uses replica index cfg.replica + r, so replicas=1 reproduces run(cfg).

        Args:
            cfg: Base configuration
            replicas: Number of replicas (>= 1)
            workers: Process count; sequential when None or 1

        Returns:
            ReplicationResult with per-replica reports, pooled mean and standard error
        """
        if replicas < 1:
            raise ValueError("replicas must be at least 1")
        configs = [cfg.model_copy(update={"replica": cfg.replica + r}) for r in range(replicas)]

        if workers and workers > 1 and replicas > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                reports = list(pool.map(_run_one, configs))
        else:
            reports = [self.run(c) for c in configs]

        frame = pd.DataFrame([{name: getattr(r, name) for name in SCALAR_METRICS} for r in reports])
        mean = frame.mean().to_dict()
        if replicas > 1:
            stderr = frame.sem(ddof=1).to_dict()
        else:
            stderr = {name: 0.0 for name in SCALAR_METRICS}
        logger.info("pooled %d replicas: p_e=%.6g +/- %.2g", replicas, mean["p_e"], stderr["p_e"])
        return ReplicationResult(reports=reports, mean=mean, stderr=stderr)


def binomial_stderr(p: float, slots: int) -> float:
    """Standard error of a frequency estimate over independent slots."""
    return math.sqrt(max(p * (1.0 - p), 0.0) / slots)


def _run_one(cfg: SimConfig) -> MetricsReport:
    return simulator.run(cfg)


# Global simulator instance
simulator = TrackingSimulator()
