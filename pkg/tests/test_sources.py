"""
Tests for the DTMC and birth-death source models.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from agents.sources import (
    BdmpSource,
    DtmcSource,
    bdmp_marginal_stationary,
    no_sampling_error,
    stationary_distribution,
    step,
    transition_matrix,
)
from services.errors import DegenerateSourceError, ParameterDomainError


class TestTransitionMatrix:
    """Kernel construction and parameter validation."""

    def test_dtmc_three_states(self):
        """Diagonal q = 1 - 2p, off-diagonal p."""
        matrix = transition_matrix(DtmcSource(n=3, p=0.1))
        assert np.allclose(np.diag(matrix), 0.8)
        assert np.allclose(matrix[~np.eye(3, dtype=bool)], 0.1)

    def test_dtmc_frozen_source_is_identity(self):
        assert np.array_equal(transition_matrix(DtmcSource(n=2, p=0.0)), np.eye(2))

    def test_bdmp_rows(self):
        matrix = transition_matrix(BdmpSource(n=3, p=0.2, q=0.5))
        expected = np.array([[0.8, 0.2, 0.0], [0.5, 0.3, 0.2], [0.0, 0.5, 0.5]])
        assert np.allclose(matrix, expected, atol=1e-15)

    @pytest.mark.parametrize("source", [
        DtmcSource(n=2, p=1.0),
        DtmcSource(n=5, p=0.25),
        BdmpSource(n=2, p=0.9, q=0.95),
        BdmpSource(n=6, p=0.3, q=0.7),
    ])
    def test_rows_are_stochastic(self, source):
        matrix = transition_matrix(source)
        assert np.all(matrix >= 0)
        assert np.max(np.abs(matrix.sum(axis=1) - 1.0)) <= 1e-12

    def test_dtmc_jump_probability_bounded(self):
        with pytest.raises(ValidationError):
            DtmcSource(n=3, p=0.6)

    def test_bdmp_interior_states_need_room(self):
        with pytest.raises(ValidationError):
            BdmpSource(n=3, p=0.6, q=0.5)

    def test_two_state_bdmp_allows_large_p_plus_q(self):
        """Two-state chains have no interior state, so p + q may exceed 1."""
        matrix = transition_matrix(BdmpSource(n=2, p=0.6, q=0.5))
        assert np.allclose(matrix, [[0.4, 0.6], [0.5, 0.5]])

    def test_kernel_is_read_only(self):
        matrix = transition_matrix(DtmcSource(n=2, p=0.3))
        with pytest.raises(ValueError):
            matrix[0, 0] = 1.0


class TestStep:
    """Inverse-CDF stepping."""

    def test_dtmc_jump(self):
        assert step(DtmcSource(n=2, p=0.3), 0, 0.95) == 1

    def test_dtmc_stay(self):
        assert step(DtmcSource(n=2, p=0.3), 0, 0.69) == 0

    def test_bdmp_death_segment_first(self):
        assert step(BdmpSource(n=3, p=0.2, q=0.5), 1, 0.0) == 0

    def test_state_out_of_range(self):
        with pytest.raises(ParameterDomainError):
            step(DtmcSource(n=2, p=0.3), 2, 0.5)

    def test_draw_out_of_range(self):
        with pytest.raises(ParameterDomainError):
            step(DtmcSource(n=2, p=0.3), 0, 1.0)

    def test_empirical_frequencies_match_kernel(self):
        """Next-state histogram within 5 standard errors of the kernel row."""
        source = BdmpSource(n=3, p=0.2, q=0.5)
        draws = 100_000
        rng = np.random.default_rng(11)
        counts = np.bincount([step(source, 1, u) for u in rng.random(draws)], minlength=3)
        row = transition_matrix(source)[1]
        stderr = np.sqrt(row * (1 - row) / draws)
        assert np.all(np.abs(counts / draws - row) <= 5 * stderr + 1e-12)


class TestStationary:
    """Stationary laws of the sources."""

    def test_bdmp_marginal(self):
        low, high = bdmp_marginal_stationary(BdmpSource(n=2, p=0.1, q=0.2))
        assert low == pytest.approx(2 / 3)
        assert high == pytest.approx(1 / 3, abs=1e-4)

    def test_bdmp_marginal_symmetric(self):
        assert bdmp_marginal_stationary(BdmpSource(n=2, p=0.35, q=0.35)) == pytest.approx((0.5, 0.5))

    def test_bdmp_marginal_birth_heavy(self):
        assert bdmp_marginal_stationary(BdmpSource(n=2, p=0.3, q=0.2)) == pytest.approx((0.4, 0.6))

    def test_bdmp_marginal_degenerate(self):
        with pytest.raises(DegenerateSourceError):
            bdmp_marginal_stationary(BdmpSource(n=2, p=0.0, q=0.0))

    def test_dtmc_uniform_is_stationary(self):
        source = DtmcSource(n=4, p=0.2)
        mu = stationary_distribution(source)
        assert np.max(np.abs(mu @ transition_matrix(source) - mu)) <= 1e-12

    @pytest.mark.parametrize("n,p,q", [(3, 0.2, 0.5), (5, 0.4, 0.1), (4, 0.3, 0.3)])
    def test_bdmp_stationary_balances(self, n, p, q):
        source = BdmpSource(n=n, p=p, q=q)
        mu = stationary_distribution(source)
        assert mu.sum() == pytest.approx(1.0)
        assert np.max(np.abs(mu @ transition_matrix(source) - mu)) <= 1e-12

    def test_no_sampling_error(self):
        source = BdmpSource(n=2, p=0.2, q=0.5)
        assert no_sampling_error(source, 0) == pytest.approx(0.2857, abs=1e-4)
        assert no_sampling_error(source, 1) == pytest.approx(5 / 7)
        assert no_sampling_error(DtmcSource(n=3, p=0.1), 0) == pytest.approx(2 / 3)


if __name__ == "__main__":
    pytest.main([__file__])
