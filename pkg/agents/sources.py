"""
Information source models.
N-state DTMC with uniform jumps and N-state birth-death process.
"""

import bisect
from functools import lru_cache
from typing import Annotated, List, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from services.errors import DegenerateSourceError, ParameterDomainError

ROW_SUM_TOLERANCE = 1e-12


class DtmcSource(BaseModel):
    """N-state chain: stay with q = 1-(N-1)p, jump to each other state with p."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    model: Literal["dtmc"] = "dtmc"
    n: int = Field(..., ge=2, description="Number of source states N")
    p: float = Field(..., ge=0.0, le=1.0, description="Probability of jumping to one specific other state")

    @model_validator(mode="after")
    def _check_jump_probability(self):
        if self.p * (self.n - 1) > 1.0 + ROW_SUM_TOLERANCE:
            raise ValueError(f"p={self.p} exceeds 1/(N-1)={1.0 / (self.n - 1):.6g}")
        return self

    @property
    def q(self) -> float:
        return max(0.0, 1.0 - (self.n - 1) * self.p)


class BdmpSource(BaseModel):
    """N-state birth-death chain with birth probability p and death probability q."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    model: Literal["bdmp"] = "bdmp"
    n: int = Field(..., ge=2, description="Number of source states N")
    p: float = Field(..., ge=0.0, le=1.0, description="Birth probability")
    q: float = Field(..., ge=0.0, le=1.0, description="Death probability")

    @model_validator(mode="after")
    def _check_interior_states(self):
        # Only interior states (N >= 3) need 1 - p - q >= 0.
        if self.n >= 3 and self.p + self.q > 1.0 + ROW_SUM_TOLERANCE:
            raise ValueError(f"p+q={self.p + self.q:.6g} exceeds 1 for an interior state")
        return self


SourceModel = Annotated[Union[DtmcSource, BdmpSource], Field(discriminator="model")]


@lru_cache(maxsize=256)
def _kernel(source: Union[DtmcSource, BdmpSource]) -> np.ndarray:
    n = source.n
    if isinstance(source, DtmcSource):
        matrix = np.full((n, n), source.p)
        np.fill_diagonal(matrix, source.q)
    else:
        p, q = source.p, source.q
        matrix = np.zeros((n, n))
        matrix[0, 0], matrix[0, 1] = 1.0 - p, p
        matrix[n - 1, n - 2], matrix[n - 1, n - 1] = q, 1.0 - q
        for i in range(1, n - 1):
            matrix[i, i - 1] = q
            matrix[i, i] = 1.0 - p - q
            matrix[i, i + 1] = p
    matrix.setflags(write=False)
    return matrix


def transition_matrix(source: Union[DtmcSource, BdmpSource]) -> np.ndarray:
    """
    Build the N x N row-stochastic kernel of the source.

    Args:
        source: Source model

    Returns:
        Read-only transition matrix
    """
    matrix = _kernel(source)
    rows = matrix.sum(axis=1)
    if np.any(matrix < 0) or np.max(np.abs(rows - 1.0)) > ROW_SUM_TOLERANCE:
        raise ParameterDomainError(f"source parameters do not define a stochastic kernel: {source}")
    return matrix


def cumulative_rows(source: Union[DtmcSource, BdmpSource]) -> List[List[float]]:
    """Cumulative sums of each kernel row, used for inverse-CDF stepping."""
    return np.cumsum(transition_matrix(source), axis=1).tolist()


def step_from_cumulative(cum_row: List[float], u: float) -> int:
    """Inverse-CDF draw on half-open segments [lo, hi), scanned in ascending order."""
    return min(bisect.bisect_right(cum_row, u), len(cum_row) - 1)


def step(source: Union[DtmcSource, BdmpSource], state: int, u: float) -> int:
    """
    Advance the source one slot.

    Args:
        source: Source model
        state: Current state in 0..N-1
        u: Uniform draw in [0, 1)

    Returns:
        Next state, deterministic given u
    """
    if not 0 <= state < source.n:
        raise ParameterDomainError(f"state {state} outside 0..{source.n - 1}")
    if not 0.0 <= u < 1.0:
        raise ParameterDomainError(f"uniform draw {u} outside [0, 1)")
    return step_from_cumulative(cumulative_rows(source)[state], u)


def bdmp_marginal_stationary(source: BdmpSource) -> Tuple[float, float]:
    """
    Stationary law of a two-state birth-death source.

    Returns:
        (q/(p+q), p/(p+q))
    """
    if not isinstance(source, BdmpSource) or source.n != 2:
        raise ParameterDomainError("bdmp_marginal_stationary needs a two-state BDMP source")
    total = source.p + source.q
    if total <= 0.0:
        raise DegenerateSourceError("p = q = 0: the source never moves")
    return source.q / total, source.p / total


def stationary_distribution(source: Union[DtmcSource, BdmpSource]) -> np.ndarray:
    """
    Stationary law of the source for any N.

    DTMC sources are doubly stochastic, so the law is uniform. Birth-death
    sources satisfy detailed balance, giving weights (p/q)^k.
    """
    n = source.n
    if isinstance(source, DtmcSource):
        return np.full(n, 1.0 / n)

    p, q = source.p, source.q
    if p <= 0.0 and q <= 0.0:
        raise DegenerateSourceError("p = q = 0: the source never moves")
    if q <= 0.0:
        weights = np.zeros(n)
        weights[-1] = 1.0
        return weights
    # Weights q^(N-1-k) p^k avoid dividing by q.
    weights = np.array([q ** (n - 1 - k) * p ** k for k in range(n)])
    return weights / weights.sum()


def no_sampling_error(source: Union[DtmcSource, BdmpSource], xhat0: int = 0) -> float:
    """
    Long-run error probability when the receiver is frozen at xhat0.

    Args:
        source: Source model
        xhat0: Reconstructed state held forever

    Returns:
        1 - mu(xhat0)
    """
    if not 0 <= xhat0 < source.n:
        raise ParameterDomainError(f"xhat0 {xhat0} outside 0..{source.n - 1}")
    if isinstance(source, BdmpSource) and source.n == 2:
        low, high = bdmp_marginal_stationary(source)
        return high if xhat0 == 0 else low
    return float(1.0 - stationary_distribution(source)[xhat0])
