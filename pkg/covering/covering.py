"""
Volume and covering-number machinery for quotient feature spaces.

Lattice counts use closed cubes of side 1/q; a cube with 0-based index
vector (j_1..j_n) is the box prod [j_i/q, (j_i+1)/q].
"""

import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from enum import StrEnum

import numpy as np

from common.constants import (
    LN10,
    cube_chunk_size,
    cube_test_budget,
    monte_carlo_block_size,
)
from common.exceptions import (
    BudgetExceededError,
    InvalidCosetSystemError,
    InvalidParameterError,
    VacuousBoundError,
)
from logger.logger import logger
from permgroup.permgroup import CosetSystem, PermGroup
from util.util import lex_greater_equal, ln_count


class CoveringMethod(StrEnum):
    """
    How a covering estimate was obtained.
    """

    LATTICE = "lattice"
    MONTE_CARLO = "monte_carlo"
    ANALYTIC = "analytic"


class CubeDomain(StrEnum):
    """
    Domains whose grid cubes can be counted.
    """

    DELTA_SN = "delta_sn"
    TILDE_DELTA_G = "tilde_delta_G"


@dataclass(frozen=True)
class CoveringEstimate:
    """
    A count, volume fraction or analytic value with its resolution parameter
    (q for lattice counts, the sample size for Monte Carlo, epsilon for
    analytic values).
    """

    value: float | int
    method: CoveringMethod
    parameter: float | int
    std_error: float = 0.0

    def to_dict(self) -> dict:
        """JSON mirror."""
        data = asdict(self)
        data["method"] = str(self.method)
        return data


@dataclass(frozen=True)
class BoundaryCount:
    """
    Split of the q^n grid into cubes touching some hyperplane x_a = x_b and
    cubes far from all of them. ``bound = free / n! + boundary`` dominates
    the cube count of the sorted cone.
    """

    n: int
    q: int
    total: int
    boundary: int
    free: int
    bound: int

    def to_dict(self) -> dict:
        """JSON mirror."""
        return asdict(self)


def _check_grid(n: int, q: int):
    if n < 1 or q < 1:
        raise InvalidParameterError(f"Need n >= 1 and q >= 1, got n={n}, q={q}.")


def _sorted_cone_count(n: int, q: int) -> int:
    """
    Dynamic program over the running minimum of the index vector: cube j
    meets the sorted cone iff j_i <= min(j_1..j_{i-1}) + 1 for every i.
    """
    counts = [1] * q
    for _ in range(n - 1):
        suffix = 0
        updated = [0] * q
        for u in range(q - 1, -1, -1):
            stay = 2 if u + 1 <= q - 1 else 1
            updated[u] = counts[u] * stay + suffix
            suffix += counts[u]
        counts = updated
    return sum(counts)


def _meets_sorted_cone(indices: np.ndarray) -> np.ndarray:
    running_min = np.minimum.accumulate(indices, axis=1)
    return np.all(indices[:, 1:] <= running_min[:, :-1] + 1, axis=1)


def _count_chunk(
    n: int, q: int, start: int, stop: int, gathers: Sequence[np.ndarray]
) -> int:
    flat = np.arange(start, stop, dtype=np.int64)
    indices = np.stack(np.unravel_index(flat, (q,) * n), axis=1)
    hit = np.zeros(flat.shape[0], dtype=bool)
    for gather in gathers:
        # g^{-1} . cube has index vector y_i = j_{g(i)}.
        hit |= _meets_sorted_cone(indices[:, gather])
    return int(hit.sum())


def cube_count(
    domain: CubeDomain | str,
    n: int,
    q: int,
    cosets: CosetSystem | None = None,
    budget: int = cube_test_budget,
    threads: int = 1,
) -> CoveringEstimate:
    """
    Counts closed grid cubes of side 1/q meeting Delta_{S_n} or the union of
    its translates g_k . Delta_{S_n}.
    :param domain: delta_sn or tilde_delta_G
    :param n: dimension
    :param q: grid divisor
    :param cosets: representatives of G in S_n, required for tilde_delta_G
    :param budget: maximal number of (cube, coset) tests
    :param threads: worker threads for the chunked enumeration
    :return: CoveringEstimate
    """
    _check_grid(n, q)
    domain = CubeDomain(domain)

    if domain == CubeDomain.DELTA_SN:
        if n * q > budget:
            raise BudgetExceededError(
                f"Counting needs {n * q} steps, budget is {budget}; use monte_carlo."
            )
        count = _sorted_cone_count(n, q)
        logger.debug(
            "Sorted cone meets %s of %s cubes (n=%s, q=%s).", count, q**n, n, q
        )
        return CoveringEstimate(value=count, method=CoveringMethod.LATTICE, parameter=q)

    if cosets is None:
        raise InvalidCosetSystemError("tilde_delta_G needs a coset system.")
    if cosets.subgroup.degree != n or cosets.group_order != math.factorial(n):
        raise InvalidCosetSystemError(
            f"Cosets must be taken in S_{n}, got a system in a group of order "
            f"{cosets.group_order}."
        )

    cells = q**n
    tests = cells * cosets.size
    if tests > budget:
        raise BudgetExceededError(
            f"Counting needs {tests} cube tests, budget is {budget}; use monte_carlo."
        )

    gathers = [np.array(g.images, dtype=np.intp) for g in cosets.representatives]
    starts = range(0, cells, cube_chunk_size)

    def count_from(start: int) -> int:
        return _count_chunk(n, q, start, min(start + cube_chunk_size, cells), gathers)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        count = sum(executor.map(count_from, starts))

    logger.debug(
        "Union of %s translated cones meets %s of %s cubes (n=%s, q=%s).",
        cosets.size,
        count,
        cells,
        n,
        q,
    )
    return CoveringEstimate(value=count, method=CoveringMethod.LATTICE, parameter=q)


def _own_representatives(G: PermGroup, block: np.ndarray) -> int:
    if G.is_symmetric:
        return int(np.all(np.diff(block, axis=1) <= 0, axis=1).sum())
    keep = np.ones(block.shape[0], dtype=bool)
    for gather in G.gather_matrix:
        keep &= lex_greater_equal(block, block[:, gather])
    return int(keep.sum())


def mc_fundamental_volume(
    G: PermGroup, samples: int, seed: int, threads: int = 1
) -> CoveringEstimate:
    """
    Fraction of uniform draws from [0,1]^n that are the lexicographic maximum
    of their own orbit. Every block of draws owns a child stream of
    SeedSequence(seed), so the estimate does not depend on ``threads``.
    :param G: group
    :param samples: number of draws
    :param seed: integer seed
    :param threads: worker threads
    :return: CoveringEstimate with the binomial standard error
    """
    if samples < 1:
        raise InvalidParameterError(f"Need at least one sample, got {samples}.")

    sizes = [monte_carlo_block_size] * (samples // monte_carlo_block_size)
    if samples % monte_carlo_block_size:
        sizes.append(samples % monte_carlo_block_size)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def run_block(job: tuple[int, np.random.SeedSequence]) -> int:
        size, stream = job
        block = np.random.default_rng(stream).random((size, G.degree))
        return _own_representatives(G, block)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        hits = sum(executor.map(run_block, zip(sizes, streams)))

    fraction = hits / samples
    std_error = math.sqrt(fraction * (1.0 - fraction) / samples)
    logger.debug(
        "Monte-Carlo volume of group of order %s: %s +- %s.",
        G.order,
        fraction,
        std_error,
    )
    return CoveringEstimate(
        value=fraction,
        method=CoveringMethod.MONTE_CARLO,
        parameter=samples,
        std_error=std_error,
    )


def analytic_covering_bound(
    n: int,
    group_order: int,
    epsilon: float,
    C: float = 1.0,
    log10: bool = False,
) -> float:
    """
    C / (|G| eps^n), evaluated in log space. With ``log10`` the base-10
    logarithm is returned, which stays finite for orders like 100!.
    """
    if epsilon <= 0 or C <= 0 or group_order < 1 or n < 1:
        raise InvalidParameterError(
            "Need epsilon > 0, C > 0, group_order >= 1 and n >= 1."
        )
    ln_value = math.log(C) - ln_count(group_order) - n * math.log(epsilon)
    if log10:
        return ln_value / LN10
    if ln_value > 700:
        raise InvalidParameterError(
            f"Covering bound 10^{ln_value / LN10:.1f} overflows; request log10."
        )
    return math.exp(ln_value)


def function_class_log_covering(
    N_delta: float,
    C_lip: float,
    B: float,
    delta: float,
    c: float = 1.0,
) -> float:
    """
    N_delta * ln(8 c^2 B / delta): natural log of the sup-norm covering
    number at radius 2 C_lip delta of C_lip-Lipschitz functions bounded by B
    on a domain covered by N_delta cubes.
    """
    if N_delta < 0 or C_lip <= 0 or B <= 0 or delta <= 0 or c <= 0:
        raise InvalidParameterError(
            "Need N_delta >= 0 and positive C_lip, B, delta and c."
        )
    ratio = 8.0 * c * c * B / delta
    if ratio <= 1.0:
        raise VacuousBoundError(
            f"8 c^2 B / delta = {ratio} <= 1; the covering formula is vacuous."
        )
    if N_delta == 0:
        return 0.0
    return N_delta * math.log(ratio)


def boundary_cube_count(n: int, q: int) -> BoundaryCount:
    """
    Counts cubes with |j_a - j_b| <= 1 for some a != b. Index vectors with
    all pairwise gaps >= 2 have distinct sorted values, so exactly one in n!
    of them meets the sorted cone.
    """
    _check_grid(n, q)
    total = q**n
    sorted_free = math.comb(max(q - n + 1, 0), n)
    free = math.factorial(n) * sorted_free
    boundary = total - free
    return BoundaryCount(
        n=n,
        q=q,
        total=total,
        boundary=boundary,
        free=free,
        bound=sorted_free + boundary,
    )


def coset_union_bound(count_delta_sn: int, K: int) -> int:
    """
    N(tilde Delta_G) <= K * N(Delta_{S_n}) for K translated copies.
    """
    if count_delta_sn < 0 or K < 1:
        raise InvalidParameterError("Need a non-negative count and K >= 1.")
    return K * count_delta_sn


def equivariant_log_covering(per_orbit_log_coverings: Sequence) -> float | np.ndarray:
    """
    Log covering of an equivariant class assembled from one invariant class
    per orbit: the product of coverings becomes a sum of logs. Entries may be
    arrays over a common delta grid.
    """
    if len(per_orbit_log_coverings) == 0:
        raise InvalidParameterError("Need at least one orbit.")
    total = np.sum(np.asarray(per_orbit_log_coverings, dtype=np.float64), axis=0)
    return float(total) if np.ndim(total) == 0 else total


def invariant_class_log_covering(
    n: int,
    group_order: int,
    C: float = 1.0,
    c: float = 1.0,
    B: float = 1.0,
    C_lip: float = 1.0,
) -> Callable[[np.ndarray], np.ndarray]:
    """
    Returns r -> natural-log covering number at radius r of the class of
    G-invariant C_lip-Lipschitz functions bounded by B. The domain covering at
    delta = r / (2 C_lip) is C / (|G| delta^n); the result is clipped at 0
    where ln(8 c^2 B / delta) is negative.
    """
    if min(C, c, B, C_lip) <= 0 or n < 1 or group_order < 1:
        raise InvalidParameterError("All constants must be positive.")
    ln_group = ln_count(group_order)
    ln_scale = math.log(8.0 * c * c * B)

    def log_covering(r) -> np.ndarray:
        radius = np.asarray(r, dtype=np.float64)
        delta = radius / (2.0 * C_lip)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            ln_delta = np.log(delta)
            cubes = np.exp(math.log(C) - ln_group - n * ln_delta)
            return cubes * np.maximum(ln_scale - ln_delta, 0.0)

    return log_covering
