"""
Erasure channel with Rayleigh block fading.
A sample is decoded when the received SNR exceeds the threshold gamma.
"""

import math
from typing import Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from services.errors import ChannelModeError


def db_to_linear(value_db: float) -> float:
    """Convert a dB value to linear scale."""
    return 10.0 ** (value_db / 10.0)


class DirectChannel(BaseModel):
    """Channel given directly by its per-slot success probability."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    p_s: float = Field(..., ge=0.0, le=1.0, description="Probability a transmitted sample is decoded")


class PhysicalChannel(BaseModel):
    """Channel given by link-budget parameters; success means h*g*P_tx*r^-beta / sigma2 > gamma."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    p_tx_mw: float = Field(..., gt=0.0, description="Transmit power in mW")
    r_m: float = Field(..., gt=0.0, description="Transmitter-receiver distance in meters")
    beta: float = Field(..., gt=2.0, description="Pathloss exponent")
    sigma2_mw: float = Field(..., gt=0.0, description="Noise power in mW")
    gamma_db: Optional[float] = Field(None, description="SNR threshold in dB")
    gamma: Optional[float] = Field(None, ge=0.0, description="SNR threshold, linear scale")

    @model_validator(mode="after")
    def _check_threshold(self):
        if (self.gamma_db is None) == (self.gamma is None):
            raise ValueError("give exactly one of gamma_db or gamma")
        return self

    @property
    def gamma_linear(self) -> float:
        if self.gamma is not None:
            return self.gamma
        return db_to_linear(self.gamma_db)

    @property
    def threshold(self) -> float:
        """Fading threshold gamma * sigma2 / (P_tx * r^-beta)."""
        return self.gamma_linear * self.sigma2_mw * self.r_m ** self.beta / self.p_tx_mw


ChannelSpec = Union[DirectChannel, PhysicalChannel]


def success_probability(spec: ChannelSpec) -> float:
    """
    Per-slot decoding probability.

    Args:
        spec: Direct or physical channel

    Returns:
        p_s; exp(-threshold) for the physical description
    """
    if isinstance(spec, DirectChannel):
        return spec.p_s
    return math.exp(-spec.threshold)


def realize(p_s: float, u: float) -> bool:
    """Channel outcome for uniform draw u: success iff u < p_s."""
    return u < p_s


def realize_fading(spec: ChannelSpec, g: float) -> bool:
    """
    Channel outcome for a unit-mean exponential fading draw.

    Args:
        spec: Physical channel
        g: Fading power gain

    Returns:
        True iff g strictly exceeds the threshold
    """
    if not isinstance(spec, PhysicalChannel):
        raise ChannelModeError("realize_fading needs a physical channel description")
    return g > spec.threshold


def calibrated_noise_power(p_s_at_0db: float, p_tx_mw: float, r_m: float, beta: float) -> float:
    """Noise power that makes p_s equal p_s_at_0db when gamma is 0 dB."""
    return -math.log(p_s_at_0db) * p_tx_mw / r_m ** beta
