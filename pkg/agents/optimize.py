"""
Sampling-budget optimizers.
Problem 1: least reconstruction error with RS under a sampling budget.
Problem 2: least consecutive error with wait-then-generate under the same budget.
"""

import logging
import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import minimize_scalar

from agents.analytic import analyzer
from agents.policies import RandomizedStationaryPolicy
from agents.sources import BdmpSource, DtmcSource, no_sampling_error
from services.errors import DivergenceError, ParameterDomainError, UnsupportedCaseError

logger = logging.getLogger(__name__)

FEASIBILITY_SLACK = 1e-12


class Budget(BaseModel):
    """Per-sample cost and the long-run budget it must fit in."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    delta: float = Field(..., gt=0.0, description="Cost of one sample")
    delta_max: float = Field(..., ge=0.0, description="Allowed time-averaged sampling cost")

    @model_validator(mode="after")
    def _check_ratio(self):
        if self.delta_max > self.delta * (1.0 + FEASIBILITY_SLACK):
            raise ValueError(f"delta_max={self.delta_max} exceeds delta={self.delta}; eta must be at most 1")
        return self

    @property
    def eta(self) -> float:
        return min(1.0, self.delta_max / self.delta)

    @classmethod
    def from_eta(cls, eta: float) -> "Budget":
        return cls(delta=1.0, delta_max=eta)


class Problem1Solution(BaseModel):
    decision: Literal["sample", "never_sample"]
    p_alpha_star: float = Field(..., description="Optimal RS sampling probability")
    p_e_star: float = Field(..., description="Minimum time-averaged reconstruction error")
    p_e_ns: float = Field(..., description="Error when never sampling")
    method: Literal["closed_form", "numeric"] = "closed_form"


class WtgChain(BaseModel):
    """Stationary summary of the wait-then-generate streak chain."""

    n: int
    p_ns: float
    p_as: float
    pi0: float
    c_bar: float
    sampling_fraction: float

    def pi(self, k: int) -> float:
        """Stationary probability of streak state k."""
        if k < 0:
            raise ParameterDomainError("streak state must be nonnegative")
        if k < self.n:
            return self.p_ns ** k * self.pi0
        return self.p_as ** (k - self.n) * self.p_ns ** self.n * self.pi0


class Problem2Solution(BaseModel):
    decision: Literal["wait_then_generate", "never_sample"]
    n_star: Optional[int] = Field(None, ge=0, description="Optimal streak threshold; None when never sampling")
    n_unclamped: Optional[float] = Field(None, description="Threshold before rounding and clamping")
    c_bar: float = Field(..., description="Average consecutive error at n_star")
    pi0: float
    sampling_fraction: float
    p_ns: float
    p_as: float


class SamplingOptimizer:
    """Closed-form and numeric solvers for the budgeted sampling problems."""

    def __init__(self):
        self.search_config = {
            "xatol": 1e-10,
            "max_brute_force_n": 200,
        }

    # ------------------------------------------------------------------
    # Problem 1
    # ------------------------------------------------------------------

    def solve_problem1_dtmc(self, p: float, p_s: float, budget: Budget) -> Problem1Solution:
        """
        Budgeted RS optimum for a two-state DTMC.

        The error is decreasing in p_alpha and never above 1/2, so the budget
        is always spent in full.

        Args:
            p: Flip probability
            p_s: Channel success probability
            budget: Sampling budget

        Returns:
            Problem1Solution
        """
        DtmcSource(n=2, p=p)
        eta = budget.eta
        p_e_ns = 0.5
        if eta == 0.0:
            return Problem1Solution(decision="never_sample", p_alpha_star=0.0, p_e_star=p_e_ns, p_e_ns=p_e_ns)

        h = p_s * eta
        denominator = 4 * p + 2 * h - 4 * p * h
        if denominator <= 0.0:
            return Problem1Solution(decision="never_sample", p_alpha_star=0.0, p_e_star=p_e_ns, p_e_ns=p_e_ns)
        p_e_star = 2 * (p - p * h) / denominator
        return Problem1Solution(decision="sample", p_alpha_star=eta, p_e_star=p_e_star, p_e_ns=p_e_ns)

    def solve_problem1_bdmp(self, p: float, q: float, p_s: float, budget: Budget, xhat0: int = 0) -> Problem1Solution:
        """
        Budgeted RS optimum for a two-state birth-death source.

        When the receiver starts in the likelier state, sampling only pays
        off if the channel and the budget are both good enough.

        Args:
            p: Birth probability
            q: Death probability
            p_s: Channel success probability
            budget: Sampling budget
            xhat0: Initial reconstructed state (0 or 1)

        Returns:
            Problem1Solution
        """
        source = BdmpSource(n=2, p=p, q=q)
        if xhat0 not in (0, 1):
            raise ParameterDomainError(f"xhat0={xhat0} must be 0 or 1")
        p_e_ns = no_sampling_error(source, xhat0)
        eta = budget.eta
        never = Problem1Solution(decision="never_sample", p_alpha_star=0.0, p_e_star=p_e_ns, p_e_ns=p_e_ns)
        if eta == 0.0:
            return never

        # Mirror p and q when the receiver starts in state 1.
        stay, leave = (q, p) if xhat0 == 0 else (p, q)
        if stay > leave:
            gap = stay - leave
            if not (p_s > gap / (1 + gap) and eta > gap / (p_s * (1 + gap))):
                logger.debug("bdmp p=%.4g q=%.4g p_s=%.4g eta=%.4g: never sample", p, q, p_s, eta)
                return never

        h = p_s * eta
        p_e_star = 2 * p * q * (1 - h) / ((p + q) * (p * (1 - h) + (1 - q) * h + q))
        return Problem1Solution(decision="sample", p_alpha_star=eta, p_e_star=p_e_star, p_e_ns=p_e_ns)

    def solve_problem1_numeric(self, source, p_s: float, budget: Budget, xhat0: int = 0) -> Problem1Solution:
        """
        Bounded scalar search of the RS error over p_alpha in [0, eta], any source.

        Args:
            source: Source model
            p_s: Channel success probability
            budget: Sampling budget
            xhat0: Initial reconstructed state

        Returns:
            Problem1Solution labeled "numeric"
        """
        p_e_ns = no_sampling_error(source, xhat0)
        eta = budget.eta
        start = (xhat0, xhat0)

        def objective(p_alpha: float) -> float:
            return analyzer.p_e(source, RandomizedStationaryPolicy(p_alpha=min(max(p_alpha, 0.0), 1.0)), p_s, start)

        candidates = [(0.0, objective(0.0))]
        if eta > 0.0:
            candidates.append((eta, objective(eta)))
            result = minimize_scalar(objective, bounds=(0.0, eta), method="bounded",
                                     options={"xatol": self.search_config["xatol"]})
            candidates.append((float(result.x), float(result.fun)))

        p_alpha_star, p_e_star = min(candidates, key=lambda c: (c[1], c[0]))
        if p_alpha_star == 0.0 or p_e_star >= p_e_ns:
            return Problem1Solution(decision="never_sample", p_alpha_star=0.0, p_e_star=min(p_e_star, p_e_ns),
                                    p_e_ns=p_e_ns, method="numeric")
        return Problem1Solution(decision="sample", p_alpha_star=p_alpha_star, p_e_star=p_e_star,
                                p_e_ns=p_e_ns, method="numeric")

    def solve_problem1(self, source, p_s: float, budget: Budget, xhat0: int = 0) -> Problem1Solution:
        """Dispatch to the closed form for two-state sources, the numeric search otherwise."""
        if source.n == 2 and isinstance(source, DtmcSource):
            return self.solve_problem1_dtmc(source.p, p_s, budget)
        if source.n == 2 and isinstance(source, BdmpSource):
            return self.solve_problem1_bdmp(source.p, source.q, p_s, budget, xhat0)
        return self.solve_problem1_numeric(source, p_s, budget, xhat0)

    # ------------------------------------------------------------------
    # Problem 2
    # ------------------------------------------------------------------

    @staticmethod
    def p_ns(source, xhat0: int = 0) -> float:
        """Error when the sampler never samples."""
        if source.n != 2:
            raise UnsupportedCaseError("the wait-then-generate streak chain is defined for two-state sources")
        return no_sampling_error(source, xhat0)

    @staticmethod
    def p_as(source, p_s: float) -> float:
        """Error when the sampler samples in every slot."""
        if source.n != 2:
            raise UnsupportedCaseError("the wait-then-generate streak chain is defined for two-state sources")
        return analyzer.p_e(source, RandomizedStationaryPolicy(p_alpha=1.0), p_s)

    @staticmethod
    def wtg_chain(n: int, p_ns: float, p_as: float) -> WtgChain:
        """
        Stationary law of the streak chain that idles below n and samples from n on.

        Args:
            n: Streak threshold (0 samples every slot)
            p_ns: Per-slot error continuation while idle
            p_as: Per-slot error continuation while sampling

        Returns:
            WtgChain with pi0, average consecutive error and sampling fraction
        """
        if n < 0:
            raise ParameterDomainError("n must be nonnegative")
        if not (0.0 <= p_ns <= 1.0 and 0.0 <= p_as <= 1.0):
            raise ParameterDomainError(f"p_ns={p_ns}, p_as={p_as} must lie in [0, 1]")
        if p_ns >= 1.0:
            raise DivergenceError("p_ns = 1: the idle phase never resynchronizes")
        a, b = p_ns, p_as
        an = a ** n
        if b >= 1.0 and an > 0.0:
            raise DivergenceError("p_as = 1: the sampling phase never resynchronizes")

        tail = an / (1 - b) if an > 0.0 else 0.0
        pi0 = 1.0 / (1 + (a - an) / (1 - a) + tail)
        idle_part = (a - a ** (n + 1) - n * an + n * a ** (n + 1)) / (1 - a) ** 2
        sampling_part = an * (n + b - n * b) / (1 - b) ** 2 if an > 0.0 else 0.0
        return WtgChain(
            n=n,
            p_ns=p_ns,
            p_as=p_as,
            pi0=pi0,
            c_bar=(idle_part + sampling_part) * pi0,
            sampling_fraction=tail * pi0,
        )

    def solve_problem2(self, p_ns: float, p_as: float, budget: Budget) -> Problem2Solution:
        """
        Optimal wait-then-generate threshold under the sampling budget.

        The average consecutive error grows with n while the sampling
        fraction shrinks, so the optimum is the least feasible n.

        Args:
            p_ns: Error when never sampling
            p_as: Error when always sampling
            budget: Sampling budget

        Returns:
            Problem2Solution; never-sample with n_star None when sampling cannot help
        """
        if not (0.0 <= p_ns < 1.0 and 0.0 <= p_as < 1.0):
            raise ParameterDomainError(f"need p_ns in [0, 1) and p_as in [0, 1); got {p_ns}, {p_as}")
        eta = budget.eta
        a, b = p_ns, p_as

        if b >= a or eta == 0.0:
            logger.info("p_as=%.4g p_ns=%.4g eta=%.4g: never sample", b, a, eta)
            return Problem2Solution(
                decision="never_sample",
                c_bar=a / (1 - a),
                pi0=1 - a,
                sampling_fraction=0.0,
                p_ns=a,
                p_as=b,
            )

        argument = eta * (1 - b) / (1 - (1 - eta) * a - eta * b)
        n_unclamped = math.log(argument) / math.log(a) if argument > 0 else math.inf
        n = max(0, math.ceil(n_unclamped))

        # Guard ceil() against rounding on either side of an exact tie.
        if n > 0 and self.wtg_chain(n - 1, a, b).sampling_fraction <= eta + FEASIBILITY_SLACK:
            n -= 1
        while self.wtg_chain(n, a, b).sampling_fraction > eta + FEASIBILITY_SLACK:
            n += 1

        chain = self.wtg_chain(n, a, b)
        return Problem2Solution(
            decision="wait_then_generate",
            n_star=n,
            n_unclamped=n_unclamped,
            c_bar=chain.c_bar,
            pi0=chain.pi0,
            sampling_fraction=chain.sampling_fraction,
            p_ns=a,
            p_as=b,
        )

    def solve_problem2_for_source(self, source, p_s: float, budget: Budget, xhat0: int = 0) -> Problem2Solution:
        """Problem 2 with P_NS and P_AS derived from a two-state source."""
        return self.solve_problem2(self.p_ns(source, xhat0), self.p_as(source, p_s), budget)

    def brute_force_n(self, p_ns: float, p_as: float, eta: float, max_n: Optional[int] = None) -> Optional[int]:
        """
        Exhaustive minimization of c_bar over n subject to the budget.

        Returns:
            Smallest minimizing n, or None when no n up to max_n is feasible
        """
        limit = max_n if max_n is not None else self.search_config["max_brute_force_n"]
        feasible: List[WtgChain] = []
        for n in range(limit + 1):
            chain = self.wtg_chain(n, p_ns, p_as)
            if chain.sampling_fraction <= eta + FEASIBILITY_SLACK:
                feasible.append(chain)
        if not feasible:
            return None
        return min(feasible, key=lambda c: (c.c_bar, c.n)).n


# Global optimizer instance
optimizer = SamplingOptimizer()
