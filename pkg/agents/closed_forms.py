"""
Closed-form joint stationary distributions pi[x, x_hat].
Two- and three-state DTMC and BDMP sources under RS, change-aware and semantics-aware policies.
"""

import logging
from typing import Callable, Dict, Tuple

import numpy as np

from agents.sources import BdmpSource, DtmcSource
from services.errors import DegenerateSourceError, UnsupportedCaseError

logger = logging.getLogger(__name__)

DENOMINATOR_FLOOR = 1e-14


def _checked(denominator: float, label: str) -> float:
    if abs(denominator) < DENOMINATOR_FLOOR:
        raise DegenerateSourceError(f"{label}: closed form is singular at these parameters")
    return denominator


def dtmc2_rs(p: float, h: float) -> np.ndarray:
    """Two-state DTMC under RS with h = p_alpha * p_s (semantics-aware: h = p_s)."""
    d = _checked(4 * p + 2 * h - 4 * p * h, "dtmc2_rs")
    same = (p + (1 - p) * h) / d
    other = p * (1 - h) / d
    return np.array([[same, other], [other, same]])


def dtmc2_ca(p_s: float) -> np.ndarray:
    d = _checked(4 - 2 * p_s, "dtmc2_ca")
    same, other = 1.0 / d, (1 - p_s) / d
    return np.array([[same, other], [other, same]])


def dtmc3_rs(p: float, h: float) -> np.ndarray:
    d = _checked(9 * p + 3 * h - 9 * p * h, "dtmc3_rs")
    pi = np.full((3, 3), (p - p * h) / d)
    np.fill_diagonal(pi, (p + h - p * h) / d)
    return pi


def dtmc3_ca(p_s: float) -> np.ndarray:
    """
    Off-diagonal entries only; the diagonal is left as NaN.

    The published diagonal does not normalize, so callers fill it from the
    numeric joint-chain solution.
    """
    d = _checked(9 - 3 * p_s, "dtmc3_ca")
    pi = np.full((3, 3), (1 - p_s) / d)
    np.fill_diagonal(pi, np.nan)
    return pi


def bdmp2_rs(p: float, q: float, h: float) -> np.ndarray:
    d = _checked((p + q) * (p * (1 - h) + q + (1 - q) * h), "bdmp2_rs")
    cross = p * q * (1 - h) / d
    return np.array([
        [q * (q + (1 - q) * h) / d, cross],
        [cross, p * (p + (1 - p) * h) / d],
    ])


def bdmp2_ca(p: float, q: float, p_s: float) -> np.ndarray:
    d = _checked((p + q) * (2 - p_s), "bdmp2_ca")
    return np.array([
        [q / d, q * (1 - p_s) / d],
        [p * (1 - p_s) / d, p / d],
    ])


def bdmp3_rs(p: float, q: float, h: float) -> np.ndarray:
    g = 1 - h
    a0 = h + g * p
    a2 = q + (1 - q) * h
    s = p * p + p * q + q * q
    norm = _checked(s * (p * g * (q + (2 - q) * h) + a2 * a2 + p * p * g * g), "bdmp3_rs")

    pi = np.empty((3, 3))
    pi[0, 0] = q * q * (p * h * g + a2 * a2)
    pi[0, 1] = pi[1, 0] = p * q * q * g * a2
    pi[1, 1] = p * q * a0 * a2
    pi[0, 2] = pi[2, 0] = p * p * q * q * g * g
    pi[1, 2] = pi[2, 1] = p * p * q * g * a0
    pi[2, 2] = p * p * (2 * p * h * g + p * p * g * g + h * a2)
    return pi / norm


def bdmp3_ca(p: float, q: float, p_s: float) -> np.ndarray:
    f = 1 - p_s
    k = _checked((p + q) * (2 - p_s) * (p * p + p * q + q * q), "bdmp3_ca")
    return np.array([
        [q * q * (q + p * p_s * (2 - p_s)), q * q * f * (p + q), p * q * q * f * f],
        [p * q * q * f, p * q * (p + q), p * p * q * f],
        [p * p * q * f * f, p * p * f * (p + q), p * p * (p + q * p_s * (2 - p_s))],
    ]) / k


# (model, n, kind) -> builder(source, p_alpha, p_s)
_Builder = Callable[[object, float, float], np.ndarray]

CLOSED_FORMS: Dict[Tuple[str, int, str], _Builder] = {
    ("dtmc", 2, "rs"): lambda s, a, ps: dtmc2_rs(s.p, a * ps),
    ("dtmc", 2, "semantics_aware"): lambda s, a, ps: dtmc2_rs(s.p, ps),
    ("dtmc", 2, "change_aware"): lambda s, a, ps: dtmc2_ca(ps),
    ("dtmc", 3, "rs"): lambda s, a, ps: dtmc3_rs(s.p, a * ps),
    ("dtmc", 3, "semantics_aware"): lambda s, a, ps: dtmc3_rs(s.p, ps),
    ("dtmc", 3, "change_aware"): lambda s, a, ps: dtmc3_ca(ps),
    ("bdmp", 2, "rs"): lambda s, a, ps: bdmp2_rs(s.p, s.q, a * ps),
    ("bdmp", 2, "semantics_aware"): lambda s, a, ps: bdmp2_rs(s.p, s.q, ps),
    ("bdmp", 2, "change_aware"): lambda s, a, ps: bdmp2_ca(s.p, s.q, ps),
    ("bdmp", 3, "rs"): lambda s, a, ps: bdmp3_rs(s.p, s.q, a * ps),
    ("bdmp", 3, "semantics_aware"): lambda s, a, ps: bdmp3_rs(s.p, s.q, ps),
    ("bdmp", 3, "change_aware"): lambda s, a, ps: bdmp3_ca(s.p, s.q, ps),
}


def has_closed_form(source, kind: str) -> bool:
    return (source.model, source.n, kind) in CLOSED_FORMS


def joint_stationary_closed_form(source, kind: str, p_alpha: float, p_s: float) -> np.ndarray:
    """
    Closed-form joint stationary distribution.

    Args:
        source: DtmcSource or BdmpSource with N in {2, 3}
        kind: Policy kind: "rs", "change_aware" or "semantics_aware"
        p_alpha: RS sampling probability (ignored by the other policies)
        p_s: Channel success probability

    Returns:
        N x N matrix indexed [x, x_hat]; NaN marks entries with no usable formula
    """
    if not isinstance(source, (DtmcSource, BdmpSource)):
        raise UnsupportedCaseError(f"unknown source model: {source!r}")
    builder = CLOSED_FORMS.get((source.model, source.n, kind))
    if builder is None:
        raise UnsupportedCaseError(
            f"no closed form for {source.model} N={source.n} policy={kind}; "
            "use build_joint_chain + stationary"
        )
    pi = builder(source, p_alpha, p_s)
    logger.debug("closed form %s N=%d %s", source.model, source.n, kind)
    return pi
