"""
Tests for the budgeted sampling optimizers.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from agents.analytic import analyzer
from agents.optimize import Budget, optimizer
from agents.policies import RandomizedStationaryPolicy
from agents.sources import BdmpSource, DtmcSource
from services.errors import DivergenceError, UnsupportedCaseError


class TestBudget:
    """Budget validation."""

    def test_eta(self):
        assert Budget(delta=2.0, delta_max=0.5).eta == 0.25
        assert Budget.from_eta(0.3).eta == 0.3

    def test_budget_above_cost_rejected(self):
        with pytest.raises(ValidationError):
            Budget(delta=1.0, delta_max=1.5)

    def test_cost_must_be_positive(self):
        with pytest.raises(ValidationError):
            Budget(delta=0.0, delta_max=0.0)


class TestProblem1:
    """Least reconstruction error under the budget."""

    @pytest.mark.parametrize("p,eta,expected", [
        (0.4, 0.1, 0.4510), (0.4, 0.3, 0.3585), (0.4, 0.5, 0.2727), (0.4, 0.7, 0.1930), (0.4, 0.9, 0.1186),
        (0.8, 0.1, 0.4742), (0.8, 0.3, 0.4176), (0.8, 0.5, 0.3529), (0.8, 0.7, 0.2785), (0.8, 0.9, 0.1918),
    ])
    def test_dtmc_tables(self, p, eta, expected):
        solution = optimizer.solve_problem1_dtmc(p, 0.8, Budget.from_eta(eta))
        assert solution.decision == "sample"
        assert solution.p_alpha_star == eta
        assert solution.p_e_ns == 0.5
        assert solution.p_e_star == pytest.approx(expected, abs=5e-5)

    @pytest.mark.parametrize("eta,decision,expected", [
        (0.1, "never_sample", 0.2857),
        (0.3, "never_sample", 0.2857),
        (0.5, "sample", 0.2765),
        (0.7, "sample", 0.2307),
        (0.9, "sample", 0.1882),
    ])
    def test_bdmp_receiver_in_likely_state(self, eta, decision, expected):
        solution = optimizer.solve_problem1_bdmp(0.2, 0.5, 0.5, Budget.from_eta(eta))
        assert solution.decision == decision
        assert solution.p_e_star == pytest.approx(expected, abs=5e-5)
        assert solution.p_e_ns == pytest.approx(0.2857, abs=5e-5)

    @pytest.mark.parametrize("eta,expected", [(0.1, 0.4732), (0.3, 0.4273), (0.5, 0.3805), (0.7, 0.3329), (0.9, 0.2844)])
    def test_bdmp_receiver_in_unlikely_state(self, eta, expected):
        solution = optimizer.solve_problem1_bdmp(0.6, 0.5, 0.5, Budget.from_eta(eta))
        assert solution.decision == "sample"
        assert solution.p_alpha_star == eta
        assert solution.p_e_ns == pytest.approx(0.5455, abs=5e-5)
        assert solution.p_e_star == pytest.approx(expected, abs=5e-5)

    def test_zero_budget_never_samples(self):
        solution = optimizer.solve_problem1_dtmc(0.4, 0.8, Budget.from_eta(0.0))
        assert solution.decision == "never_sample"
        assert solution.p_e_star == 0.5

    def test_symmetric_bdmp_samples_full_budget(self):
        solution = optimizer.solve_problem1_bdmp(0.3, 0.3, 0.5, Budget.from_eta(0.2))
        assert solution.decision == "sample"
        assert solution.p_alpha_star == 0.2

    def test_optimum_dominates_feasible_policies(self):
        source = DtmcSource(n=2, p=0.4)
        solution = optimizer.solve_problem1(source, 0.8, Budget.from_eta(0.6))
        for p_alpha in np.linspace(0.0, 0.6, 13):
            p_e = analyzer.p_e(source, RandomizedStationaryPolicy(p_alpha=p_alpha), 0.8)
            assert p_e >= solution.p_e_star - 1e-12

    def test_numeric_search_matches_closed_form(self):
        source = DtmcSource(n=2, p=0.4)
        budget = Budget.from_eta(0.5)
        numeric = optimizer.solve_problem1_numeric(source, 0.8, budget)
        assert numeric.method == "numeric"
        assert numeric.p_alpha_star == pytest.approx(0.5, abs=1e-6)
        assert numeric.p_e_star == pytest.approx(optimizer.solve_problem1_dtmc(0.4, 0.8, budget).p_e_star, abs=1e-8)

    def test_numeric_search_respects_never_sample(self):
        numeric = optimizer.solve_problem1_numeric(BdmpSource(n=2, p=0.2, q=0.5), 0.5, Budget.from_eta(0.1))
        assert numeric.decision == "never_sample"
        assert numeric.p_e_star == pytest.approx(0.2857, abs=5e-5)

    def test_larger_sources_use_the_numeric_search(self):
        solution = optimizer.solve_problem1(DtmcSource(n=3, p=0.1), 0.922, Budget.from_eta(0.4))
        assert solution.method == "numeric"
        assert solution.decision == "sample"
        assert solution.p_alpha_star == pytest.approx(0.4, abs=1e-6)


class TestStreakChain:
    """Wait-then-generate streak chain."""

    def test_error_probabilities(self):
        source = BdmpSource(n=2, p=0.1, q=0.2)
        assert optimizer.p_ns(source) == pytest.approx(1 / 3)
        assert optimizer.p_as(source, 0.5) == pytest.approx(0.1026, abs=1e-4)
        assert optimizer.p_as(BdmpSource(n=2, p=0.3, q=0.2), 0.5) == pytest.approx(0.16, abs=1e-4)
        assert optimizer.p_as(source, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_three_states_unsupported(self):
        with pytest.raises(UnsupportedCaseError):
            optimizer.p_ns(DtmcSource(n=3, p=0.1))

    def test_always_sampling(self):
        chain = optimizer.wtg_chain(0, 0.6, 0.16)
        assert chain.sampling_fraction == pytest.approx(1.0)
        assert chain.pi0 == pytest.approx(0.84)
        assert chain.c_bar == pytest.approx(0.16 / 0.84)

    def test_long_wait_tends_to_never_sampling(self):
        chain = optimizer.wtg_chain(200, 0.6, 0.16)
        assert chain.sampling_fraction == pytest.approx(0.0, abs=1e-12)
        assert chain.c_bar == pytest.approx(0.6 / 0.4)

    def test_stationary_law_sums_to_one(self):
        chain = optimizer.wtg_chain(3, 0.6, 0.16)
        assert sum(chain.pi(k) for k in range(400)) == pytest.approx(1.0)
        assert sum(k * chain.pi(k) for k in range(400)) == pytest.approx(chain.c_bar)

    def test_table_value(self):
        chain = optimizer.wtg_chain(2, 1 / 3, 0.02 / 0.195)
        assert chain.pi0 == pytest.approx(0.6863, abs=1e-4)
        assert chain.c_bar == pytest.approx(0.4084, abs=1e-4)

    def test_consecutive_error_increases_with_threshold(self):
        values = [optimizer.wtg_chain(n, 0.7, 0.2).c_bar for n in range(30)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_diverges_without_resynchronization(self):
        with pytest.raises(DivergenceError):
            optimizer.wtg_chain(2, 1.0, 0.2)


class TestProblem2:
    """Least consecutive error under the budget."""

    @pytest.mark.parametrize("eta,p,n_star,c_bar", [
        (0.2, 0.1, 2, 0.4084), (0.2, 0.3, 3, 0.9654), (0.2, 0.5, 3, 1.1783),
        (0.2, 0.7, 3, 1.2853), (0.2, 0.9, 4, 1.6885),
        (0.6, 0.1, 1, 0.3018), (0.6, 0.3, 1, 0.4960), (0.6, 0.9, 1, 0.5831),
    ])
    def test_tables(self, eta, p, n_star, c_bar):
        solution = optimizer.solve_problem2_for_source(BdmpSource(n=2, p=p, q=0.2), 0.5, Budget.from_eta(eta))
        assert solution.decision == "wait_then_generate"
        assert solution.n_star == n_star
        assert solution.c_bar == pytest.approx(c_bar, abs=1e-3)
        assert solution.sampling_fraction <= eta + 1e-12

    def test_full_budget_samples_every_slot(self):
        solution = optimizer.solve_problem2(0.6, 0.16, Budget.from_eta(1.0))
        assert solution.n_star == 0
        assert solution.c_bar == pytest.approx(0.16 / 0.84)

    def test_useless_sampling_is_never_sample(self):
        solution = optimizer.solve_problem2(0.3, 0.4, Budget.from_eta(0.5))
        assert solution.decision == "never_sample"
        assert solution.n_star is None
        assert solution.c_bar == pytest.approx(0.3 / 0.7)

    def test_zero_budget_is_never_sample(self):
        assert optimizer.solve_problem2(0.6, 0.16, Budget.from_eta(0.0)).decision == "never_sample"

    def test_matches_exhaustive_search(self):
        rng = np.random.default_rng(21)
        checked = 0
        while checked < 200:
            a = rng.uniform(0.06, 0.9)
            b = rng.uniform(0.0, a - 0.05)
            eta = rng.uniform(0.01, 1.0)
            solution = optimizer.solve_problem2(a, b, Budget.from_eta(eta))
            assert solution.n_star == optimizer.brute_force_n(a, b, eta), (a, b, eta)
            checked += 1


if __name__ == "__main__":
    pytest.main([__file__])
