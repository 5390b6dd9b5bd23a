"""
Generalization bounds for invariant and equivariant networks.

Everything is computed with natural logs and reported in log10, so group
orders like 100! never pass through a float.
"""

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid
from scipy.special import logsumexp

from common.constants import (
    LN10,
    curve_points,
    curves_columns,
    dudley_alpha_floor,
    dudley_alpha_points,
    dudley_quadrature_nodes,
)
from common.exceptions import InvalidParameterError, VacuousBoundError
from logger.logger import logger
from permgroup.permgroup import PermGroup, orbit_layout
from util.util import ln_count


class ConfidenceKind(StrEnum):
    """
    Argument of the log in the confidence term sqrt(2 log(.) / m).
    """

    HALF_EPS = "half_eps"
    TWO_OVER_EPS = "two_over_eps"


class BoundKind(StrEnum):
    """
    Which bound a report evaluates.
    """

    INVARIANT = "invariant"
    EQUIVARIANT = "equivariant"
    NONTRANSITIVE = "nontransitive"


@dataclass(frozen=True)
class BoundReport:
    """
    Term-by-term breakdown of a bound that holds with probability at least
    ``probability``.
    """

    kind: BoundKind
    main_term_log10: float
    confidence_term_log10: float
    total_log10: float
    n: int
    m: float
    epsilon: float
    C: float
    group_order: int | None = None
    stab_orders: tuple[int, ...] = field(default=())
    confidence: ConfidenceKind = ConfidenceKind.HALF_EPS

    @property
    def probability(self) -> float:
        """1 - 2 epsilon."""
        return 1.0 - 2.0 * self.epsilon

    @property
    def main_term(self) -> float | None:
        """Linear main term, or None when it is not representable."""
        return to_linear(self.main_term_log10)

    @property
    def confidence_term(self) -> float | None:
        """Linear confidence term."""
        return to_linear(self.confidence_term_log10)

    @property
    def total(self) -> float | None:
        """Linear total."""
        return to_linear(self.total_log10)

    def to_dict(self) -> dict:
        """JSON mirror."""
        return {
            "kind": str(self.kind),
            "n": self.n,
            "m": self.m,
            "epsilon": self.epsilon,
            "C": self.C,
            "group_order": self.group_order,
            "stab_orders": list(self.stab_orders),
            "confidence": str(self.confidence),
            "probability": self.probability,
            "main_term_log10": self.main_term_log10,
            "confidence_term_log10": self.confidence_term_log10,
            "total_log10": self.total_log10,
            "main_term": self.main_term,
            "confidence_term": self.confidence_term,
            "total": self.total,
        }


def to_linear(value_log10: float) -> float | None:
    """
    10^value when |value| < 300, otherwise None.
    """
    if not math.isfinite(value_log10) or abs(value_log10) >= 300:
        return None
    return 10.0**value_log10


def _check_common(n: int, m: float, epsilon: float, constant: float):
    if n < 1:
        raise InvalidParameterError(f"Need n >= 1, got {n}.")
    if m < 1:
        raise InvalidParameterError(f"Need m >= 1, got {m}.")
    if constant <= 0:
        raise InvalidParameterError(f"Constants must be positive, got {constant}.")
    if not 0 < epsilon < 0.5:
        raise InvalidParameterError(
            f"Need 0 < epsilon < 1/2, got {epsilon}; log(1/2eps) must be positive."
        )


def ln_confidence_term(
    m: float, epsilon: float, confidence: ConfidenceKind | str = ConfidenceKind.HALF_EPS
) -> float:
    """
    ln sqrt(2 log(1/(2 eps)) / m), or with log(2/eps) for ``two_over_eps``.
    """
    match ConfidenceKind(confidence):
        case ConfidenceKind.HALF_EPS:
            inner = -math.log(2.0 * epsilon)
        case _:
            inner = math.log(2.0 / epsilon)
    return 0.5 * (math.log(2.0) + math.log(inner) - math.log(m))


def _report(
    kind: BoundKind,
    ln_main: float,
    n: int,
    m: float,
    epsilon: float,
    C: float,
    confidence: ConfidenceKind | str,
    group_order: int | None = None,
    stab_orders: tuple[int, ...] = (),
) -> BoundReport:
    ln_conf = ln_confidence_term(m, epsilon, confidence)
    ln_total = float(np.logaddexp(ln_main, ln_conf))
    return BoundReport(
        kind=kind,
        main_term_log10=ln_main / LN10,
        confidence_term_log10=ln_conf / LN10,
        total_log10=ln_total / LN10,
        n=n,
        m=m,
        epsilon=epsilon,
        C=C,
        group_order=group_order,
        stab_orders=stab_orders,
        confidence=ConfidenceKind(confidence),
    )


def invariant_bound(
    n: int,
    group_order: int,
    m: float,
    epsilon: float,
    C: float = 1.0,
    confidence: ConfidenceKind | str = ConfidenceKind.HALF_EPS,
) -> BoundReport:
    """
    Bound for G-invariant networks:
    sqrt(C / (|G| m^{2/n})) + sqrt(2 log(1/2eps) / m).
    :param n: input dimension
    :param group_order: |G|, any positive int
    :param m: number of samples
    :param epsilon: confidence parameter in (0, 1/2)
    :param C: constant of the bound
    :param confidence: form of the confidence term
    :return: BoundReport
    """
    _check_common(n, m, epsilon, C)
    if group_order < 1:
        raise InvalidParameterError(f"Need |G| >= 1, got {group_order}.")
    ln_main = 0.5 * (math.log(C) - ln_count(group_order) - (2.0 / n) * math.log(m))
    return _report(
        BoundKind.INVARIANT,
        ln_main,
        n,
        m,
        epsilon,
        C,
        confidence,
        group_order=group_order,
    )


def nontransitive_equivariant_bound(
    n: int,
    stab_orders: Sequence[int],
    m: float,
    epsilon: float,
    c_tilde: float = 1.0,
    confidence: ConfidenceKind | str = ConfidenceKind.HALF_EPS,
) -> BoundReport:
    """
    Bound for G-equivariant networks without the transitivity assumption,
    main term sqrt(sum_j c / (|Stab_G(j)| m^{2/n})) over orbit representatives j.
    """
    if len(stab_orders) == 0:
        raise InvalidParameterError("Need at least one orbit.")
    _check_common(n, m, epsilon, c_tilde)
    if any(order < 1 for order in stab_orders):
        raise InvalidParameterError(
            f"Stabilizer orders must be >= 1, got {stab_orders}."
        )
    ln_inverse_stabs = [-ln_count(order) for order in stab_orders]
    ln_main = 0.5 * (
        math.log(c_tilde) + float(logsumexp(ln_inverse_stabs)) - (2.0 / n) * math.log(m)
    )
    kind = BoundKind.EQUIVARIANT if len(stab_orders) == 1 else BoundKind.NONTRANSITIVE
    return _report(
        kind,
        ln_main,
        n,
        m,
        epsilon,
        c_tilde,
        confidence,
        stab_orders=tuple(int(order) for order in stab_orders),
    )


def equivariant_bound(
    n: int,
    stab_order: int,
    m: float,
    epsilon: float,
    C_tilde: float = 1.0,
    confidence: ConfidenceKind | str = ConfidenceKind.HALF_EPS,
) -> BoundReport:
    """
    Bound for equivariant networks under a transitive G:
    sqrt(C / (|St(G)| m^{2/n})) + confidence term. Transitivity is the
    caller's responsibility (see ``permgroup.is_transitive``).
    """
    return nontransitive_equivariant_bound(
        n, [stab_order], m, epsilon, c_tilde=C_tilde, confidence=confidence
    )


def symmetric_invariant_bound(
    n: int,
    m: float,
    epsilon: float,
    C: float = 1.0,
    confidence: ConfidenceKind | str = ConfidenceKind.HALF_EPS,
) -> BoundReport:
    """invariant_bound with |G| = n!."""
    return invariant_bound(n, math.factorial(n), m, epsilon, C=C, confidence=confidence)


def symmetric_equivariant_bound(
    n: int,
    m: float,
    epsilon: float,
    C_tilde: float = 1.0,
    confidence: ConfidenceKind | str = ConfidenceKind.HALF_EPS,
) -> BoundReport:
    """equivariant_bound with |St(S_n)| = (n-1)!."""
    return equivariant_bound(
        n, math.factorial(n - 1), m, epsilon, C_tilde=C_tilde, confidence=confidence
    )


def group_bound(
    G: PermGroup,
    m: float,
    epsilon: float,
    C: float = 1.0,
    equivariant: bool = False,
    confidence: ConfidenceKind | str = ConfidenceKind.HALF_EPS,
) -> BoundReport:
    """
    Evaluates the matching bound for an enumerated group: invariant, or
    equivariant with one stabilizer per orbit.
    """
    if not equivariant:
        return invariant_bound(
            G.degree, G.order, m, epsilon, C=C, confidence=confidence
        )
    stab_orders = [block.stabilizer.order for block in orbit_layout(G)]
    return nontransitive_equivariant_bound(
        G.degree, stab_orders, m, epsilon, c_tilde=C, confidence=confidence
    )


def ordinary_bound(m: float) -> float:
    """
    1 / sqrt(m), the rate without invariance.
    """
    if m < 1:
        raise InvalidParameterError(f"Need m >= 1, got {m}.")
    return 1.0 / math.sqrt(m)


def _evaluate_covering(
    log_covering: Callable[[np.ndarray], np.ndarray], deltas: np.ndarray
) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        values = np.asarray(log_covering(deltas), dtype=np.float64)
    values = np.broadcast_to(values, deltas.shape)
    if np.any(np.isnan(values)) or np.any(values == -np.inf):
        raise VacuousBoundError("log_covering is not finite on the integration range.")
    return values


def dudley_bound(
    log_covering: Callable[[np.ndarray], np.ndarray],
    m: float,
    epsilon: float,
    alpha_grid: int = dudley_alpha_points,
    nodes: int = dudley_quadrature_nodes,
    offset: bool = True,
    upper: float | None = None,
    confidence: ConfidenceKind | str = ConfidenceKind.HALF_EPS,
) -> float:
    """
    inf over alpha of 4 alpha + 12 / sqrt(m) * int_alpha^upper
    sqrt(2 (log 2 + log N_delta)) d delta, plus the confidence term.

    alpha runs over 0 (when log_covering is finite there) and ``alpha_grid``
    log-spaced points up to ``upper``; every integral uses a composite
    trapezoid rule with ``nodes`` nodes. Candidates whose range reaches a
    delta with infinite log covering are skipped.
    :param log_covering: vectorized delta -> natural-log covering number
    :param m: number of samples
    :param epsilon: confidence parameter in (0, 1/2)
    :param alpha_grid: number of positive alpha candidates
    :param nodes: quadrature nodes per integral
    :param offset: integrate with the log 2 offset; without it the integrand
        is sqrt(2 log N_delta)
    :param upper: upper integration limit, sqrt(m) by default
    :param confidence: form of the confidence term
    :return: float
    """
    _check_common(1, m, epsilon, 1.0)
    if alpha_grid < 1 or nodes < 2:
        raise InvalidParameterError("Need at least one alpha and two quadrature nodes.")
    upper = math.sqrt(m) if upper is None else float(upper)
    if upper <= 0:
        raise InvalidParameterError(f"Upper limit must be positive, got {upper}.")

    shift = math.log(2.0) if offset else 0.0

    def integrand(grid: np.ndarray) -> np.ndarray:
        values = _evaluate_covering(log_covering, grid)
        return np.sqrt(2.0 * np.maximum(shift + values, 0.0))

    alphas = np.geomspace(upper * dudley_alpha_floor, upper, alpha_grid)
    ratios = np.geomspace(1.0, upper / alphas, nodes, axis=1)
    grid = alphas[:, None] * ratios
    grid[:, -1] = upper
    heights = integrand(grid)
    integrals = trapezoid(heights, grid, axis=1)
    candidates = 4.0 * alphas + 12.0 / math.sqrt(m) * integrals

    zero_grid = np.linspace(0.0, upper, nodes)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        at_zero = np.asarray(log_covering(zero_grid[:1]), dtype=np.float64)
    if np.all(np.isfinite(at_zero)):
        zero_integral = trapezoid(integrand(zero_grid), zero_grid)
        candidates = np.append(candidates, 12.0 / math.sqrt(m) * zero_integral)
        alphas = np.append(alphas, 0.0)

    finite = np.isfinite(candidates)
    if not finite.any():
        raise VacuousBoundError(
            "log_covering is infinite on every integration range of the alpha grid."
        )
    best = int(np.argmin(np.where(finite, candidates, np.inf)))
    logger.debug(
        "Dudley integral minimized at alpha=%s over %s candidates.",
        alphas[best],
        int(finite.sum()),
    )
    confidence_term = math.exp(ln_confidence_term(m, epsilon, confidence))
    return float(candidates[best]) + confidence_term


def _m_grid(m_range: tuple[float, float], points: int) -> np.ndarray:
    m_min, m_max = m_range
    if m_min < 1 or m_max < m_min:
        raise InvalidParameterError(f"Invalid m range {m_range}.")
    return np.unique(np.round(np.geomspace(m_min, m_max, points)).astype(np.int64))


def theory_curves(
    n_list: Sequence[int],
    m_range: tuple[float, float],
    group_orders: Sequence[int] | None = None,
    C: float = 1.0,
    epsilon: float = 0.05,
    points: int = curve_points,
    equivariant: bool = False,
    confidence: ConfidenceKind | str = ConfidenceKind.HALF_EPS,
) -> pd.DataFrame:
    """
    Rows ``n,m,group_order,stab_order,main_log10,conf_log10,total_log10,
    ordinary_log10`` on a log-spaced integer m grid, ordered by (n, m).
    Group orders default to n!; equivariant curves use (n-1)! stabilizers.
    """
    if group_orders is None:
        group_orders = [math.factorial(n) for n in n_list]
    if len(group_orders) != len(n_list):
        raise InvalidParameterError("Need one group order per n.")

    rows = []
    for n, order in zip(n_list, group_orders):
        stab = math.factorial(n - 1) if equivariant else None
        for m in _m_grid(m_range, points):
            m = int(m)
            if equivariant:
                report = equivariant_bound(
                    n, stab, m, epsilon, C, confidence=confidence
                )
            else:
                report = invariant_bound(n, order, m, epsilon, C, confidence=confidence)
            rows.append(
                [
                    n,
                    m,
                    order,
                    stab,
                    report.main_term_log10,
                    report.confidence_term_log10,
                    report.total_log10,
                    -0.5 * math.log10(m),
                ]
            )
    return pd.DataFrame(rows, columns=curves_columns).astype(
        {"group_order": object, "stab_order": object}
    )


def volume_table(groups: Sequence[PermGroup]) -> pd.DataFrame:
    """
    Per group: order, stabilizer orders per orbit, log10 of the fundamental
    domain volume 1/|G| and of the stabilizer domain volumes 1/|Stab_G(j)|.
    Per-orbit values are joined with ';'.
    """
    rows = []
    for G in groups:
        blocks = orbit_layout(G)
        stabs = [block.stabilizer.order for block in blocks]
        rows.append(
            {
                "name": G.name or f"G_{G.degree}",
                "degree": G.degree,
                "group_order": G.order,
                "transitive": len(blocks) == 1,
                "stab_orders": ";".join(str(s) for s in stabs),
                "log10_volume": -math.log10(G.order),
                "log10_stab_volumes": ";".join(
                    f"{-math.log10(s):.6f}" for s in stabs
                ),
            }
        )
    return pd.DataFrame(rows)
