"""
Quotient feature space geometry: orbits, canonical representatives, the
quotient metric, fundamental domains and invariant/equivariant lifts.
"""

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from common.exceptions import InvalidCosetSystemError, InvalidParameterError
from logger.logger import logger
from permgroup.permgroup import (
    CosetSystem,
    GroupKind,
    Permutation,
    PermGroup,
    coset_representatives,
    named_group,
    orbit_layout,
    orbits,
    perm_apply,
)
from util.util import as_point


@dataclass(frozen=True)
class OrbitRep:
    """
    Canonical member of an orbit and the number of elements fixing the source.
    """

    canonical: np.ndarray
    stabilized_by: int


def _normalized(G: PermGroup, x) -> np.ndarray:
    # -0.0 + 0.0 == +0.0, so signed zeros cannot split an orbit.
    return as_point(x, G.degree) + 0.0


def orbit(G: PermGroup, x) -> np.ndarray:
    """
    Distinct images of x under G, one per row, in ascending lexicographic order.
    """
    return np.unique(G.act(_normalized(G, x)), axis=0)


def canonical_rep(G: PermGroup, x) -> OrbitRep:
    """
    Lexicographically greatest member of the orbit of x. For S_n this is the
    descending sort.
    """
    point = _normalized(G, x)

    if G.is_symmetric:
        canonical = np.sort(point, kind="stable")[::-1].copy()
        _, counts = np.unique(point, return_counts=True)
        stabilized_by = math.prod(math.factorial(int(c)) for c in counts)
        return OrbitRep(canonical=canonical, stabilized_by=stabilized_by)

    images = G.act(point)
    # lexsort treats its last key as primary.
    best = np.lexsort(images.T[::-1])[-1]
    stabilized_by = int(np.all(images == point, axis=1).sum())
    return OrbitRep(canonical=images[best].copy(), stabilized_by=stabilized_by)


def _pair_distances(G: PermGroup, x: np.ndarray, x_prime: np.ndarray) -> np.ndarray:
    squared = (x - G.act(x_prime)) ** 2
    # Summing the sorted terms makes d(x, x') and d(x', x) bit-identical.
    return np.sqrt(np.sort(squared, axis=1).sum(axis=1))


def quotient_distance(G: PermGroup, x, x_prime) -> float:
    """
    d_G(x, x') = min over g of ||x - g . x'||_2, by exhaustive search.

    The infimum over chains of representatives collapses to a single group
    element because the action preserves distances.
    """
    point = _normalized(G, x)
    other = _normalized(G, x_prime)
    return float(_pair_distances(G, point, other).min())


def sn_domain_cosets(G: PermGroup) -> CosetSystem:
    """
    Complete system of representatives of G in S_n, the input of
    ``in_fundamental_domain``.
    """
    return coset_representatives(G, named_group(GroupKind.SYMMETRIC, G.degree))


def in_fundamental_domain(G: PermGroup, cosets: CosetSystem, x) -> bool:
    """
    Membership in the union of translated sorted cones g_k . Delta_{S_n}.
    Inequalities are closed, so boundary points belong to several copies.
    :param G: the group whose domain is tested
    :param cosets: representatives of G in S_n
    :param x: point
    :return: bool
    """
    point = _normalized(G, x)
    if (
        cosets.group_order != math.factorial(G.degree)
        or cosets.subgroup.element_set != G.element_set
        or cosets.size * G.order != cosets.group_order
    ):
        raise InvalidCosetSystemError(
            "Cosets must be a complete system of representatives of G in S_n."
        )
    for representative in cosets.representatives:
        pulled_back = perm_apply(representative.inverse(), point)
        if np.all(np.diff(pulled_back) <= 0):
            return True
    return False


def lift_invariant(
    G: PermGroup, f: Callable[[np.ndarray], float]
) -> Callable[[np.ndarray], float]:
    """
    Returns x -> f(canonical_rep(G, x)). The lift is exactly G-invariant and
    keeps the Lipschitz constant of f with respect to d_G.
    """

    def lifted(x) -> float:
        return f(canonical_rep(G, x).canonical)

    return lifted


def equivariant_from_invariants(
    G: PermGroup,
    parts: Sequence[Callable[[np.ndarray], float]],
    taus: Sequence[Sequence[Permutation]] | None = None,
) -> Callable[[np.ndarray], np.ndarray]:
    """
    Assembles a G-equivariant map from one stabilizer-invariant function per
    orbit: the output at index i of orbit O_j is f_j(tau . x), where tau
    sends i to the orbit's smallest index j.
    :param G: group
    :param parts: f_j, one per orbit in ``orbits(G)`` order
    :param taus: per-orbit coset representatives of Stab_G(j); computed
        with ``orbit_layout`` when omitted
    :return: callable point -> point
    """
    orbit_list = orbits(G)
    if len(parts) != len(orbit_list):
        raise InvalidParameterError(
            f"Expected {len(orbit_list)} orbit functions, got {len(parts)}."
        )
    if taus is None:
        taus = [block.taus for block in orbit_layout(G)]
    if len(taus) != len(orbit_list):
        raise InvalidParameterError(
            f"Expected {len(orbit_list)} tau lists, got {len(taus)}."
        )

    placements: list[tuple[int, Callable, Permutation]] = []
    for orbit_indices, f, orbit_taus in zip(orbit_list, parts, taus):
        j = orbit_indices[0]
        targets = sorted(tau.inverse().image(j) for tau in orbit_taus)
        if len(orbit_taus) != len(orbit_indices) or tuple(targets) != orbit_indices:
            raise InvalidCosetSystemError(
                f"Taus of orbit {orbit_indices} do not reach every index exactly once."
            )
        for tau in orbit_taus:
            placements.append((tau.inverse().image(j) - 1, f, tau))

    logger.debug("Assembled equivariant map over %s orbits.", len(orbit_list))

    def assembled(x) -> np.ndarray:
        point = as_point(x, G.degree)
        result = np.empty(G.degree)
        for index, f, tau in placements:
            result[index] = f(perm_apply(tau, point))
        return result

    return assembled
