"""
Sampling and transmission policies.
Every policy reduces to one decision per slot: sample-and-transmit or idle.
"""

from dataclasses import dataclass
from typing import Annotated, Callable, Literal, Union

from pydantic import BaseModel, ConfigDict, Field

from agents.sources import BdmpSource, DtmcSource
from services.errors import UnsupportedCaseError


class UniformPolicy(BaseModel):
    """Sample every d-th slot, first at t = d."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["uniform"] = "uniform"
    d: int = Field(..., ge=1, description="Sampling period in slots")


class ChangeAwarePolicy(BaseModel):
    """Sample whenever the source changed since the previous slot."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["change_aware"] = "change_aware"


class SemanticsAwarePolicy(BaseModel):
    """Sample whenever the source differs from the receiver's reconstruction."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["semantics_aware"] = "semantics_aware"


class RandomizedStationaryPolicy(BaseModel):
    """Sample independently with probability p_alpha in every slot."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["rs"] = "rs"
    p_alpha: float = Field(..., ge=0.0, le=1.0, description="Per-slot sampling probability")


class WaitThenGeneratePolicy(BaseModel):
    """Idle until the error streak reaches n, then sample every slot."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["wtg"] = "wtg"
    n: int = Field(..., ge=0, description="Error-streak threshold")


PolicySpec = Annotated[
    Union[UniformPolicy, ChangeAwarePolicy, SemanticsAwarePolicy, RandomizedStationaryPolicy, WaitThenGeneratePolicy],
    Field(discriminator="kind"),
]

# Policies whose joint (X, X_hat) chain is Markov and therefore analyzable.
ANALYTIC_KINDS = ("rs", "change_aware", "semantics_aware")


@dataclass(frozen=True)
class DecisionContext:
    """What the transmitter knows at slot t, after the source moved."""

    t: int
    x_new: int
    x_prev: int
    x_hat: int
    streak: int
    rand: float


Decider = Callable[[int, int, int, int, int, float], bool]


def make_decider(policy) -> Decider:
    """
    Compile a policy into a plain function of (t, x_new, x_prev, x_hat, streak, rand).

    Args:
        policy: Any PolicySpec variant

    Returns:
        Decision function used by the simulation loop
    """
    if isinstance(policy, UniformPolicy):
        period = policy.d
        return lambda t, x_new, x_prev, x_hat, streak, rand: t % period == 0
    if isinstance(policy, ChangeAwarePolicy):
        return lambda t, x_new, x_prev, x_hat, streak, rand: x_new != x_prev
    if isinstance(policy, SemanticsAwarePolicy):
        return lambda t, x_new, x_prev, x_hat, streak, rand: x_new != x_hat
    if isinstance(policy, RandomizedStationaryPolicy):
        p_alpha = policy.p_alpha
        return lambda t, x_new, x_prev, x_hat, streak, rand: rand < p_alpha
    if isinstance(policy, WaitThenGeneratePolicy):
        threshold = policy.n
        return lambda t, x_new, x_prev, x_hat, streak, rand: streak >= threshold
    raise UnsupportedCaseError(f"unknown policy: {policy!r}")


def decide(policy, ctx: DecisionContext) -> bool:
    """
    Decide whether to sample and transmit in the current slot.

    Args:
        policy: Policy model
        ctx: Decision context for slot t

    Returns:
        True to sample and transmit
    """
    return make_decider(policy)(ctx.t, ctx.x_new, ctx.x_prev, ctx.x_hat, ctx.streak, ctx.rand)


def sampling_rate_closed_form(policy, source: Union[DtmcSource, BdmpSource], p_s: float) -> float:
    """
    Expected per-slot sampling probability for two-state sources.

    Args:
        policy: ChangeAwarePolicy or SemanticsAwarePolicy
        source: Two-state DTMC or BDMP source
        p_s: Channel success probability

    Returns:
        Long-run fraction of slots with a sample
    """
    if source.n != 2:
        raise UnsupportedCaseError("closed-form sampling rate exists only for N=2; simulate instead")
    if not isinstance(policy, (ChangeAwarePolicy, SemanticsAwarePolicy)):
        raise UnsupportedCaseError(f"no closed-form sampling rate for policy {policy.kind}")

    p = source.p
    if isinstance(source, DtmcSource):
        if isinstance(policy, ChangeAwarePolicy):
            return p
        denominator = 4 * p + 2 * p_s - 4 * p * p_s
        return 2 * p / denominator if denominator > 0 else 0.0

    q = source.q
    if p + q <= 0:
        return 0.0
    if isinstance(policy, ChangeAwarePolicy):
        return 2 * p * q / (p + q)
    return 2 * p * q / ((p + q) * (p * (1 - p_s) + q + p_s * (1 - q)))
