"""
Tests for the erasure channel.
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from agents.channel import (
    DirectChannel,
    PhysicalChannel,
    calibrated_noise_power,
    db_to_linear,
    realize,
    realize_fading,
    success_probability,
)
from services.errors import ChannelModeError

# sigma2 / (P_tx r^-beta) = 0.0812 at P_tx = 1 mW, r = 30 m, beta = 4
CALIBRATED_SIGMA2 = 0.0812 / 30.0 ** 4


class TestSuccessProbability:
    """Success probability from link-budget parameters."""

    @pytest.fixture
    def physical(self):
        """Factory for a physical channel with the calibrated noise power."""
        def build(**overrides):
            params = {"p_tx_mw": 1.0, "r_m": 30.0, "beta": 4.0, "sigma2_mw": CALIBRATED_SIGMA2, "gamma": 1.0}
            params.update(overrides)
            return PhysicalChannel(**params)
        return build

    def test_zero_threshold_always_succeeds(self, physical):
        assert success_probability(physical(gamma=0.0)) == 1.0

    def test_calibrated_value(self, physical):
        assert success_probability(physical()) == pytest.approx(0.9220, abs=1e-4)

    def test_power_law_in_gamma(self, physical):
        """p_s(gamma) = p_s(1)^gamma."""
        base = success_probability(physical())
        assert success_probability(physical(gamma=10.0)) == pytest.approx(base ** 10)
        assert success_probability(physical(gamma=10.0)) == pytest.approx(0.4440, abs=1e-4)

    def test_gamma_in_db(self, physical):
        assert success_probability(physical(gamma=None, gamma_db=10.0)) == pytest.approx(
            success_probability(physical(gamma=10.0))
        )

    def test_direct_mode_passthrough(self):
        assert success_probability(DirectChannel(p_s=0.445)) == 0.445

    def test_monotonicity(self, physical):
        assert success_probability(physical(gamma=2.0)) < success_probability(physical(gamma=1.0))
        assert success_probability(physical(sigma2_mw=2 * CALIBRATED_SIGMA2)) < success_probability(physical())
        assert success_probability(physical(p_tx_mw=2.0)) > success_probability(physical())

    def test_exactly_one_threshold(self, physical):
        with pytest.raises(ValidationError):
            physical(gamma_db=0.0)
        with pytest.raises(ValidationError):
            physical(gamma=None)

    def test_pathloss_exponent_above_two(self, physical):
        with pytest.raises(ValidationError):
            physical(beta=2.0)

    def test_calibrated_noise_power(self):
        sigma2 = calibrated_noise_power(0.922, 1.0, 30.0, 4.0)
        channel = PhysicalChannel(p_tx_mw=1.0, r_m=30.0, beta=4.0, sigma2_mw=sigma2, gamma_db=0.0)
        assert success_probability(channel) == pytest.approx(0.922, abs=1e-12)

    def test_db_conversion(self):
        assert db_to_linear(0.0) == 1.0
        assert db_to_linear(10.0) == pytest.approx(10.0)


class TestRealization:
    """Per-slot channel outcomes."""

    @pytest.fixture
    def channel(self):
        return PhysicalChannel(p_tx_mw=1.0, r_m=30.0, beta=4.0, sigma2_mw=CALIBRATED_SIGMA2, gamma=1.0)

    def test_certain_outcomes(self):
        assert realize(1.0, 0.999999)
        assert not realize(0.0, 0.0)

    def test_empirical_success_rate(self):
        draws = 200_000
        rng = np.random.default_rng(5)
        rate = sum(realize(0.445, u) for u in rng.random(draws)) / draws
        assert abs(rate - 0.445) <= 4 * math.sqrt(0.445 * 0.555 / draws)

    def test_fading_needs_physical_spec(self):
        with pytest.raises(ChannelModeError):
            realize_fading(DirectChannel(p_s=0.5), 1.0)

    def test_fading_boundary_fails(self, channel):
        assert not realize_fading(channel, channel.threshold)
        assert realize_fading(channel, 1e9)

    def test_modes_agree(self, channel):
        """Exponential fading draws succeed with probability exp(-threshold)."""
        draws = 200_000
        rng = np.random.default_rng(9)
        rate = sum(realize_fading(channel, g) for g in rng.exponential(1.0, draws)) / draws
        p_s = success_probability(channel)
        assert abs(rate - p_s) <= 4 * math.sqrt(p_s * (1 - p_s) / draws)


if __name__ == "__main__":
    pytest.main([__file__])
