"""
Analytic evaluation of tracking metrics.
Closed forms where they exist, the (X, X_hat) joint chain otherwise.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

from agents import closed_forms
from agents.channel import success_probability
from agents.policies import ANALYTIC_KINDS, RandomizedStationaryPolicy
from agents.sources import BdmpSource, DtmcSource, stationary_distribution, transition_matrix
from services.config import settings
from services.errors import (
    ConvergenceError,
    DegenerateSourceError,
    DivergenceError,
    ParameterDomainError,
    UnsupportedCaseError,
)

logger = logging.getLogger(__name__)

Source = Union[DtmcSource, BdmpSource]


@dataclass(frozen=True)
class SamplingChannelFactors:
    """Per-slot outcome probabilities of RS sampling over the erasure channel."""

    h0: float
    h1: float
    idle: float

    @classmethod
    def from_policy(cls, p_alpha: float, p_s: float) -> "SamplingChannelFactors":
        if not (0.0 <= p_alpha <= 1.0 and 0.0 <= p_s <= 1.0):
            raise ParameterDomainError(f"p_alpha={p_alpha}, p_s={p_s} must lie in [0, 1]")
        return cls(h0=p_alpha * (1.0 - p_s), h1=p_alpha * p_s, idle=1.0 - p_alpha)


@dataclass(frozen=True)
class JointChain:
    """Markov chain over pairs (x, x_hat), row-major index x * n + x_hat."""

    n: int
    matrix: np.ndarray
    kind: str

    def index(self, x: int, x_hat: int) -> int:
        return x * self.n + x_hat


@dataclass(frozen=True)
class ErrorChain:
    """Markov chain over error levels 0..N-1."""

    matrix: np.ndarray
    model: str


@dataclass(frozen=True)
class CrossoverThresholds:
    """Sampling probabilities where RS changes rank against CA or SA (three-state DTMC)."""

    p_e_vs_ca: float
    variance_vs_sa: float
    variance_vs_ca_published: float
    variance_vs_ca_interval: Tuple[float, float]
    rs_above_sa: bool


def policy_parameters(policy) -> Tuple[str, float]:
    """Map a policy spec to (kind, p_alpha); non-RS policies report p_alpha = 1."""
    kind = getattr(policy, "kind", None)
    if kind not in ANALYTIC_KINDS:
        raise UnsupportedCaseError(f"policy {kind!r} has no Markov joint chain; simulate it instead")
    return kind, float(getattr(policy, "p_alpha", 1.0))


def default_cost_matrix(n: int) -> np.ndarray:
    """Actuation cost |i - j|."""
    states = np.arange(n)
    return np.abs(np.subtract.outer(states, states)).astype(float)


class TrackingAnalyzer:
    """Closed-form and joint-chain evaluation of RS, change-aware and semantics-aware tracking."""

    def __init__(self):
        solver = settings.solver
        self.solver_config = {
            "tolerance": solver.tolerance,
            "max_iterations": solver.max_iterations,
            "check_tolerance": solver.check_tolerance,
            "row_sum_tolerance": 1e-10,
        }

    # ------------------------------------------------------------------
    # Chains and the stationary solver
    # ------------------------------------------------------------------

    def build_joint_chain(self, source: Source, policy, p_s: float) -> JointChain:
        """
        Build the N^2-state chain of (x, x_hat).

        From (i, j) the source moves to k; the policy fires (RS: with
        probability p_alpha, CA: iff k != i, SA: iff k != j); on success the
        pair becomes (k, k), otherwise (k, j).

        Args:
            source: Source model
            policy: RS, change-aware or semantics-aware spec
            p_s: Channel success probability

        Returns:
            JointChain with a row-stochastic matrix
        """
        if not 0.0 <= p_s <= 1.0:
            raise ParameterDomainError(f"p_s={p_s} outside [0, 1]")
        kind, p_alpha = policy_parameters(policy)
        kernel = transition_matrix(source)
        n = source.n

        matrix = np.zeros((n * n, n * n))
        for i in range(n):
            for j in range(n):
                row = i * n + j
                for k in range(n):
                    move = kernel[i, k]
                    if move == 0.0:
                        continue
                    if kind == "rs":
                        fire = p_alpha
                    elif kind == "change_aware":
                        fire = float(k != i)
                    else:
                        fire = float(k != j)
                    success = fire * p_s
                    matrix[row, k * n + k] += move * success
                    matrix[row, k * n + j] += move * (1.0 - success)

        logger.debug("joint chain %s N=%d kind=%s p_s=%.6g", source.model, n, kind, p_s)
        return JointChain(n=n, matrix=matrix, kind=kind)

    def stationary(self, matrix: np.ndarray, start: Optional[int] = None) -> np.ndarray:
        """
        Stationary vector of a row-stochastic matrix.

        With a start index, only states reachable from it are solved for,
        which picks the class a reducible chain actually settles in. A dense
        solve with the normalization row is tried first, then power iteration.

        Args:
            matrix: Square row-stochastic matrix
            start: Optional start state index

        Returns:
            Probability vector over all states
        """
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ParameterDomainError(f"expected a square matrix, got shape {matrix.shape}")
        size = matrix.shape[0]
        if np.any(matrix < 0) or np.max(np.abs(matrix.sum(axis=1) - 1.0)) > self.solver_config["row_sum_tolerance"]:
            raise ParameterDomainError("matrix is not row-stochastic")

        if start is None:
            states = np.arange(size)
        else:
            if not 0 <= start < size:
                raise ParameterDomainError(f"start index {start} outside 0..{size - 1}")
            states = np.sort(breadth_first_order(csr_matrix((matrix > 0).astype(float)), start, directed=True,
                                                 return_predecessors=False))
        sub = matrix[np.ix_(states, states)]

        local = self._solve_dense(sub)
        if local is None:
            logger.warning("dense stationary solve failed on %d states; using power iteration", len(states))
            initial = None if start is None else int(np.searchsorted(states, start))
            local = self._power_iteration(sub, initial)

        pi = np.zeros(size)
        pi[states] = local
        return pi

    def _solve_dense(self, matrix: np.ndarray) -> Optional[np.ndarray]:
        size = matrix.shape[0]
        system = matrix.T - np.eye(size)
        system[-1, :] = 1.0
        if np.linalg.matrix_rank(system) < size:
            return None
        rhs = np.zeros(size)
        rhs[-1] = 1.0
        pi = np.linalg.solve(system, rhs)
        if not np.all(np.isfinite(pi)) or np.min(pi) < -self.solver_config["check_tolerance"]:
            return None
        pi = np.clip(pi, 0.0, None)
        pi /= pi.sum()
        if np.max(np.abs(pi @ matrix - pi)) > self.solver_config["check_tolerance"]:
            return None
        return pi

    def _power_iteration(self, matrix: np.ndarray, start: Optional[int]) -> np.ndarray:
        size = matrix.shape[0]
        if start is None:
            pi = np.full(size, 1.0 / size)
        else:
            pi = np.zeros(size)
            pi[start] = 1.0

        residual = math.inf
        for _ in range(int(self.solver_config["max_iterations"])):
            nxt = pi @ matrix
            residual = float(np.max(np.abs(nxt - pi)))
            pi = nxt
            if residual <= self.solver_config["tolerance"]:
                return pi / pi.sum()
        raise ConvergenceError("power iteration did not converge", residual=residual)

    # ------------------------------------------------------------------
    # Joint stationary distribution
    # ------------------------------------------------------------------

    def _is_reducible(self, source: Source, kind: str, p_alpha: float, p_s: float) -> bool:
        if isinstance(source, DtmcSource):
            frozen = source.p == 0.0
        else:
            frozen = source.p == 0.0 or source.q == 0.0
        effective = p_alpha * p_s if kind == "rs" else p_s
        return frozen or effective == 0.0

    def oracle_stationary(self, source: Source, policy, p_s: float, start: Tuple[int, int] = (0, 0)) -> np.ndarray:
        """Joint stationary from the numeric chain, reachable from the start pair."""
        chain = self.build_joint_chain(source, policy, p_s)
        x0, xhat0 = start
        if not (0 <= x0 < source.n and 0 <= xhat0 < source.n):
            raise ParameterDomainError(f"start pair {start} outside the state space")
        pi = self.stationary(chain.matrix, start=chain.index(x0, xhat0))
        return pi.reshape(source.n, source.n)

    def joint_stationary_closed_form(self, source: Source, policy, p_s: float) -> np.ndarray:
        """
        Closed-form joint stationary distribution for N in {2, 3}.

        Entries without a usable published formula are filled from the
        numeric joint chain.

        Args:
            source: Two- or three-state source
            policy: RS, change-aware or semantics-aware spec
            p_s: Channel success probability

        Returns:
            N x N matrix pi[x, x_hat]
        """
        kind, p_alpha = policy_parameters(policy)
        pi = closed_forms.joint_stationary_closed_form(source, kind, p_alpha, p_s)
        missing = np.isnan(pi)
        if missing.any():
            logger.warning("closed form for %s N=%d %s is incomplete; filling %d entries from the joint chain",
                           source.model, source.n, kind, int(missing.sum()))
            oracle = self.oracle_stationary(source, policy, p_s)
            pi = np.where(missing, oracle, pi)
        return pi

    def joint_stationary(self, source: Source, policy, p_s: float,
                         start: Tuple[int, int] = (0, 0)) -> Tuple[np.ndarray, str]:
        """
        Best available joint stationary distribution.

        Returns:
            (pi, method) where method is "closed_form" or "oracle"
        """
        kind, p_alpha = policy_parameters(policy)
        if closed_forms.has_closed_form(source, kind) and not self._is_reducible(source, kind, p_alpha, p_s):
            try:
                return self.joint_stationary_closed_form(source, policy, p_s), "closed_form"
            except DegenerateSourceError as exc:
                logger.info("%s; using the joint chain", exc)
        return self.oracle_stationary(source, policy, p_s, start), "oracle"

    def rs_resolvent_stationary(self, source: Source, h: float) -> np.ndarray:
        """
        Joint stationary of RS with per-slot success probability h, any N.

        The reconstruction equals the source value a geometric number of
        slots ago: pi[i, j] = h * mu[j] * [(I - (1-h) P)^-1][j, i].
        """
        if not 0.0 < h <= 1.0:
            raise DegenerateSourceError(f"h={h}: the reconstruction never updates")
        kernel = transition_matrix(source)
        mu = stationary_distribution(source)
        resolvent = np.linalg.solve(np.eye(source.n) - (1.0 - h) * kernel, np.eye(source.n))
        return (h * mu[:, None] * resolvent).T

    # ------------------------------------------------------------------
    # Error chain
    # ------------------------------------------------------------------

    def error_chain(self, source: Source, p_alpha: float, p_s: float) -> ErrorChain:
        """
        Error-level chain under RS.

        DTMC sources use the closed-form catalog; BDMP sources lump the
        joint chain by |x - x_hat| weighted by its stationary law.

        Args:
            source: Source model
            p_alpha: RS sampling probability
            p_s: Channel success probability

        Returns:
            ErrorChain over levels 0..N-1
        """
        factors = SamplingChannelFactors.from_policy(p_alpha, p_s)
        if isinstance(source, DtmcSource):
            matrix = self._dtmc_error_chain(source.n, source.p, source.q, factors.h1)
        else:
            policy = RandomizedStationaryPolicy(p_alpha=p_alpha)
            chain = self.build_joint_chain(source, policy, p_s)
            pi, _ = self.joint_stationary(source, policy, p_s)
            matrix = self.lump_by_level(chain, pi)
        return ErrorChain(matrix=matrix, model=source.model)

    @staticmethod
    def _dtmc_error_chain(n: int, p: float, q: float, h: float) -> np.ndarray:
        pg = p * (1.0 - h)
        stay = q * (1.0 - h)
        matrix = np.zeros((n, n))
        matrix[0, 0] = q + (n - 1) * p * h
        for j in range(1, n):
            matrix[0, j] = 2.0 * (1.0 - j / n) * pg
        for i in range(1, n):
            matrix[i, 0] = p + q * h + (n - 2) * p * h
            for j in range(1, n):
                if i == j:
                    value = (n - 2 * i) / (n - i) * pg + stay if 2 * i <= n - 1 else stay
                elif i == 1:
                    value = (2 * n - 2 * j - 1) / (n - 1) * pg
                elif j == 1:
                    value = (2 * n - 2 * i - 1) / (n - i) * pg
                elif j > i:
                    value = (2 * n - i - 2 * j) / (n - i) * pg if n >= i + j else (n - j) / (n - i) * pg
                else:
                    value = (2 * n - j - 2 * i) / (n - i) * pg if n >= i + j else pg
                matrix[i, j] = value
        return matrix

    @staticmethod
    def lump_by_level(chain: JointChain, pi: np.ndarray) -> np.ndarray:
        """
        Aggregate a joint chain onto error levels |x - x_hat|.

        Levels with zero stationary mass get an identity row.
        """
        n = chain.n
        levels = default_cost_matrix(n).astype(int).ravel()
        membership = np.eye(n)[levels]
        weights = np.asarray(pi, dtype=float).ravel()
        flow = membership.T @ (weights[:, None] * chain.matrix) @ membership
        mass = membership.T @ weights
        lumped = np.eye(n)
        occupied = mass > 0
        lumped[occupied] = flow[occupied] / mass[occupied, None]
        return lumped

    def p_e_three_state(self, chain: ErrorChain) -> float:
        """Closed-form P(E != 0) of a three-level error chain."""
        m = chain.matrix
        if m.shape != (3, 3):
            raise UnsupportedCaseError("the three-level expression needs a 3 x 3 error chain")
        phi = (1 + m[2, 1] - m[1, 1] - m[0, 0] - m[0, 0] * m[2, 1] + m[0, 0] * m[1, 1]
               + m[0, 1] * m[2, 0] - m[0, 1] * m[1, 0])
        denominator = phi + m[2, 0] - m[2, 0] * m[1, 1] + m[1, 0] * m[2, 1]
        if abs(denominator) < 1e-14:
            raise DegenerateSourceError("error chain has no unique stationary law")
        return float(phi / denominator)

    # ------------------------------------------------------------------
    # Metrics
    # ------------------------------------------------------------------

    def p_e(self, source: Source, policy, p_s: float, start: Tuple[int, int] = (0, 0)) -> float:
        """Time-averaged reconstruction error: total off-diagonal stationary mass."""
        pi, _ = self.joint_stationary(source, policy, p_s, start)
        return float(min(1.0, max(0.0, 1.0 - np.trace(pi))))

    @staticmethod
    def variance(p_e: float) -> float:
        if not 0.0 <= p_e <= 1.0:
            raise ParameterDomainError(f"p_e={p_e} outside [0, 1]")
        return p_e - p_e * p_e

    @staticmethod
    def actuation_cost(pi: np.ndarray, cost: Optional[np.ndarray] = None) -> float:
        """
        Expected actuation cost sum_{i != j} C[i, j] pi[i, j].

        Args:
            pi: N x N joint stationary distribution
            cost: N x N cost matrix; |i - j| when omitted

        Returns:
            Average actuation cost
        """
        pi = np.asarray(pi, dtype=float)
        cost = default_cost_matrix(pi.shape[0]) if cost is None else np.asarray(cost, dtype=float)
        if cost.shape != pi.shape:
            raise ParameterDomainError(f"cost matrix shape {cost.shape} does not match {pi.shape}")
        off = ~np.eye(pi.shape[0], dtype=bool)
        return float(np.sum(cost[off] * pi[off]))

    @staticmethod
    def consecutive_error(p_e: float) -> float:
        if p_e >= 1.0:
            raise DivergenceError("consecutive error diverges at P_E = 1")
        return p_e / (1.0 - p_e)

    @staticmethod
    def memory_cost(p_e: float, kappa: float, n: int) -> float:
        """
        Cost of memory error: sum over streaks x = 1..n of kappa^x (1 - P_E) P_E^x.

        Args:
            p_e: Time-averaged reconstruction error
            kappa: Exponential cost base
            n: Longest penalized streak

        Returns:
            Expected memory cost per slot
        """
        if p_e >= 1.0:
            raise DivergenceError("memory cost diverges at P_E = 1")
        if kappa <= 0 or n < 1:
            raise ParameterDomainError(f"kappa={kappa} and n={n} must be positive")
        ratio = kappa * p_e
        if abs(1.0 - ratio) < 1e-12:
            return n * (1.0 - p_e) * ratio
        return (1.0 - p_e) * ratio * (1.0 - ratio ** n) / (1.0 - ratio)

    @staticmethod
    def streak_distribution(p_e: float, k: int) -> float:
        """Stationary probability that the error streak equals k."""
        if k < 0:
            raise ParameterDomainError("streak length must be nonnegative")
        return (1.0 - p_e) * p_e ** k

    def sampling_rate(self, source: Source, policy, p_s: float, start: Tuple[int, int] = (0, 0)) -> float:
        """
        Long-run fraction of slots in which the policy samples, any N.

        Args:
            source: Source model
            policy: RS, change-aware or semantics-aware spec
            p_s: Channel success probability

        Returns:
            sum_{i,j} pi[i, j] sum_k P[i, k] fire(i, j, k)
        """
        kind, p_alpha = policy_parameters(policy)
        if kind == "rs":
            return p_alpha
        pi, _ = self.joint_stationary(source, policy, p_s, start)
        kernel = transition_matrix(source)
        n = source.n
        rate = 0.0
        for i in range(n):
            for j in range(n):
                if kind == "change_aware":
                    fire = 1.0 - kernel[i, i]
                else:
                    fire = 1.0 - kernel[i, j]
                rate += pi[i, j] * fire
        return float(rate)

    @staticmethod
    def crossover_thresholds(p: float, p_s: float) -> CrossoverThresholds:
        """
        Crossover points of RS against CA and SA for a three-state DTMC.

        Args:
            p: DTMC jump probability
            p_s: Channel success probability

        Returns:
            CrossoverThresholds; variance_vs_ca_interval is the exact pair
            (lower, upper) with V_RS < V_CA iff p_alpha < lower or p_alpha > upper
        """
        if not (0.0 < p <= 0.5 and 0.0 < p_s <= 1.0):
            raise ParameterDomainError(f"p={p}, p_s={p_s} outside the three-state DTMC range")

        def ratio(num: float, den: float) -> float:
            return num / den if den != 0 else math.inf

        p_e_vs_ca = ratio(2 * p, 1 - p_s * (1 - 2 * p))
        variance_vs_sa = ratio(p * p_s - 3 * p * p * (1 - p_s),
                               (2 * p + 3 * p * p - 1) * p_s * p_s - (p + 3 * p * p) * p_s)
        variance_vs_ca_published = ratio(p * (3 + p_s), p * p_s * (3 + p_s) - 2 * p_s)
        lower = ratio(p * (3 - 5 * p_s), p_s * (1 + 3 * p + p_s - 5 * p * p_s))
        return CrossoverThresholds(
            p_e_vs_ca=p_e_vs_ca,
            variance_vs_sa=variance_vs_sa,
            variance_vs_ca_published=variance_vs_ca_published,
            variance_vs_ca_interval=(lower, p_e_vs_ca),
            rs_above_sa=p > 0 and p_s > 0,
        )

    # ------------------------------------------------------------------
    # Full report
    # ------------------------------------------------------------------

    def evaluate(self, cfg):
        """
        Analytic counterpart of a simulation run.

        Args:
            cfg: SimConfig with an RS, change-aware or semantics-aware policy

        Returns:
            MetricsReport with method set to the evaluation path used
        """
        from agents.engine import MetricsReport

        p_s = success_probability(cfg.channel)
        start = (cfg.x0, cfg.xhat0)
        pi, method = self.joint_stationary(cfg.source, cfg.policy, p_s, start)
        p_e = float(min(1.0, max(0.0, 1.0 - np.trace(pi))))
        rate = self.sampling_rate(cfg.source, cfg.policy, p_s, start)
        cost = None if cfg.cost_matrix is None else np.asarray(cfg.cost_matrix, dtype=float)

        report = MetricsReport(
            p_e=p_e,
            variance=self.variance(p_e),
            actuation_cost=self.actuation_cost(pi, cost),
            consecutive_error=self.consecutive_error(p_e) if p_e < 1.0 else math.inf,
            memory_cost=self.memory_cost(p_e, cfg.kappa, cfg.mem_n) if p_e < 1.0 else math.inf,
            sampling_cost=cfg.delta * rate,
            sampling_rate=rate,
            joint_occupancy=pi.tolist(),
            slots=0,
            seed=cfg.seed,
            replica=cfg.replica,
            method=method,
        )
        logger.info("analytic %s N=%d %s: p_e=%.6g (%s)", cfg.source.model, cfg.source.n,
                    cfg.policy.kind, p_e, method)
        return report


# Global analyzer instance
analyzer = TrackingAnalyzer()
