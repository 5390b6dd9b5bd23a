"""
Finite permutation groups acting on coordinates.

Permutations keep 0-based image tuples internally; everything that crosses
the public boundary (generators in JSON, stabilized indices, orbits) is
1-based, matching the one-line notation ``[2, 1, 3]``.

The action on points is the left action on positions,
``(g . x)_i = x_{g^{-1}(i)}``, so that ``(gh) . x = g . (h . x)``.
"""

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from common.constants import group_enumeration_cap
from common.exceptions import (
    DimensionMismatchError,
    GroupTooLargeError,
    InvalidParameterError,
    InvalidPermutationError,
    NotASubgroupError,
)
from logger.logger import logger
from util.util import as_point


@dataclass(frozen=True, order=True)
class Permutation:
    """
    A bijection of {0..n-1}; ``images[i]`` is the image of position i.
    Ordering is lexicographic on the image array.
    """

    images: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.images) != list(range(len(self.images))):
            raise InvalidPermutationError(
                f"{[i + 1 for i in self.images]} is not a permutation."
            )

    @property
    def degree(self) -> int:
        """Number of moved-or-fixed points."""
        return len(self.images)

    @classmethod
    def identity(cls, degree: int) -> "Permutation":
        """Identity of the given degree."""
        return cls(tuple(range(degree)))

    @classmethod
    def parse(cls, one_line: Sequence[int]) -> "Permutation":
        """
        Builds a permutation from its 1-based one-line notation.
        """
        try:
            return cls(tuple(int(i) - 1 for i in one_line))
        except (TypeError, ValueError) as e:
            raise InvalidPermutationError(f"Cannot parse {one_line!r}.") from e

    @classmethod
    def from_cycles(cls, degree: int, cycles: Iterable[Sequence[int]]) -> "Permutation":
        """
        Builds a permutation from disjoint 1-based cycles,
        e.g. ``from_cycles(3, [(1, 2, 3)])`` sends 1 to 2, 2 to 3 and 3 to 1.
        """
        images = list(range(degree))
        seen = set()
        for cycle in cycles:
            for position, point in enumerate(cycle):
                if not 1 <= point <= degree or point in seen:
                    raise InvalidPermutationError(
                        f"Invalid cycle {tuple(cycle)} for degree {degree}."
                    )
                seen.add(point)
                images[point - 1] = cycle[(position + 1) % len(cycle)] - 1
        return cls(tuple(images))

    @classmethod
    def transposition(cls, degree: int, a: int, b: int) -> "Permutation":
        """Swap of the 1-based positions a and b."""
        return cls.from_cycles(degree, [(a, b)])

    def to_list(self) -> list[int]:
        """1-based one-line notation."""
        return [i + 1 for i in self.images]

    def compose(self, other: "Permutation") -> "Permutation":
        """
        Returns self . other, i.e. i -> self(other(i)).
        """
        if other.degree != self.degree:
            raise DimensionMismatchError(
                "Cannot compose permutations of different degree."
            )
        return Permutation(tuple(self.images[j] for j in other.images))

    def inverse(self) -> "Permutation":
        """Inverse permutation."""
        inverse = [0] * self.degree
        for i, j in enumerate(self.images):
            inverse[j] = i
        return Permutation(tuple(inverse))

    def image(self, index: int) -> int:
        """Image of a 1-based index."""
        return self.images[index - 1] + 1

    def is_identity(self) -> bool:
        """True for the identity."""
        return all(i == j for i, j in enumerate(self.images))


def perm_apply(g: Permutation, x) -> np.ndarray:
    """
    Applies g to a point: ``y_i = x_{g^{-1}(i)}``.
    :param g: Permutation
    :param x: point of dimension g.degree
    :return: np.ndarray
    """
    point = as_point(x, g.degree)
    result = np.empty_like(point)
    result[list(g.images)] = point
    return result


@dataclass(frozen=True)
class PermGroup:
    """
    A fully enumerated permutation group. ``elements`` are sorted
    lexicographically, the identity first.
    """

    degree: int
    elements: tuple[Permutation, ...]
    generators: tuple[Permutation, ...] = field(default=())
    name: str = ""

    @property
    def order(self) -> int:
        """Number of elements."""
        return len(self.elements)

    @cached_property
    def element_set(self) -> frozenset[Permutation]:
        """Elements as a set, for membership tests."""
        return frozenset(self.elements)

    @cached_property
    def image_matrix(self) -> np.ndarray:
        """``image_matrix[k, i]`` is the 0-based image of i under element k."""
        return np.array([g.images for g in self.elements], dtype=np.intp).reshape(
            self.order, self.degree
        )

    @cached_property
    def gather_matrix(self) -> np.ndarray:
        """
        ``x[gather_matrix[k]]`` is element k applied to x
        (row k holds the inverse images).
        """
        return np.argsort(self.image_matrix, axis=1, kind="stable")

    @property
    def is_symmetric(self) -> bool:
        """True when the group is all of S_n."""
        return self.order == math.factorial(self.degree)

    def __contains__(self, g: Permutation) -> bool:
        return g in self.element_set

    def act(self, x) -> np.ndarray:
        """
        All images of x, one row per element (duplicates kept).
        """
        point = as_point(x, self.degree)
        return point[self.gather_matrix]

    def to_dict(self) -> dict:
        """Degree and generators in 1-based one-line notation."""
        return {
            "degree": self.degree,
            "generators": [g.to_list() for g in self.generators],
        }

    @classmethod
    def from_dict(cls, data: dict, cap: int = group_enumeration_cap) -> "PermGroup":
        """Inverse of ``to_dict``; the group is re-enumerated."""
        generators = [Permutation.parse(g) for g in data.get("generators", [])]
        return group_from_generators(int(data["degree"]), generators, cap=cap)


def _closure(
    degree: int, generators: Sequence[Permutation], cap: int
) -> list[Permutation]:
    identity = Permutation.identity(degree)
    found = {identity}
    queue = deque([identity])
    while queue:
        element = queue.popleft()
        for generator in generators:
            product = generator.compose(element)
            if product not in found:
                found.add(product)
                if len(found) > cap:
                    raise GroupTooLargeError(
                        f"group too large: closure exceeds the cap of {cap} elements."
                    )
                queue.append(product)
    return sorted(found)


def group_from_generators(
    degree: int,
    gens: Sequence[Permutation],
    cap: int = group_enumeration_cap,
    name: str = "",
) -> PermGroup:
    """
    Enumerates the group generated by gens.
    :param degree: n
    :param gens: generators, each of degree n
    :param cap: maximal order allowed
    :param name: optional label used in reports
    :return: PermGroup
    """
    if degree < 1:
        raise InvalidParameterError(f"Degree must be positive, got {degree}.")
    for generator in gens:
        if not isinstance(generator, Permutation):
            raise InvalidPermutationError(f"Invalid generator {generator!r}.")
        if generator.degree != degree:
            raise InvalidPermutationError(
                f"Generator {generator.to_list()} does not have degree {degree}."
            )

    generators = tuple(g for g in gens if not g.is_identity())
    elements = _closure(degree, generators, cap)
    logger.debug("Enumerated group of degree %s and order %s.", degree, len(elements))
    return PermGroup(
        degree=degree, elements=tuple(elements), generators=generators, name=name
    )


class GroupKind(StrEnum):
    """
    Groups that can be built by name.
    """

    SYMMETRIC = "symmetric"
    CYCLIC = "cyclic"
    TRIVIAL = "trivial"


def named_group(
    kind: GroupKind | str, n: int, cap: int = group_enumeration_cap
) -> PermGroup:
    """
    Builds S_n, C_n or the trivial group acting on n coordinates.
    :param kind: symmetric, cyclic or trivial
    :param n: degree
    :param cap: enumeration cap
    :return: PermGroup
    """
    if n < 1:
        raise InvalidParameterError(f"Degree must be positive, got {n}.")
    kind = GroupKind(kind)
    identity = Permutation.identity(n)
    rotation = (
        Permutation.from_cycles(n, [tuple(range(1, n + 1))]) if n > 1 else identity
    )

    match kind:
        case GroupKind.SYMMETRIC:
            if math.factorial(n) > cap:
                raise GroupTooLargeError(
                    f"group too large: S_{n} has {math.factorial(n)} elements, "
                    f"cap is {cap}."
                )
            generators = (rotation, Permutation.transposition(n, 1, 2)) if n > 1 else ()
            elements = tuple(
                sorted(Permutation(p) for p in itertools.permutations(range(n)))
            )
            return PermGroup(
                degree=n,
                elements=elements,
                generators=tuple(g for g in generators if not g.is_identity()),
                name=f"S_{n}",
            )
        case GroupKind.CYCLIC:
            return group_from_generators(n, [rotation], cap=cap, name=f"C_{n}")
        case _:
            return PermGroup(degree=n, elements=(identity,), name="trivial")


def subgroup_from_elements(
    group: PermGroup, elements: Iterable[Permutation], name: str = ""
) -> PermGroup:
    """
    Wraps a subset of group that is closed under composition as a PermGroup
    and picks a small generating set greedily.
    """
    members = sorted(set(elements))
    generators: list[Permutation] = []
    covered = {Permutation.identity(group.degree)}
    for element in members:
        if element not in covered:
            generators.append(element)
            covered = set(_closure(group.degree, generators, group.order))
    if len(covered) != len(members):
        raise NotASubgroupError("The given elements are not closed under composition.")
    return PermGroup(
        degree=group.degree,
        elements=tuple(members),
        generators=tuple(generators),
        name=name,
    )


def stabilizer(G: PermGroup, i: int) -> PermGroup:
    """
    Elements of G that fix the 1-based index i.
    """
    if not 1 <= i <= G.degree:
        raise InvalidParameterError(f"Index {i} outside 1..{G.degree}.")
    fixing = [g for g in G.elements if g.images[i - 1] == i - 1]
    label = f"Stab_{G.name}({i})" if G.name else f"Stab({i})"
    return subgroup_from_elements(G, fixing, name=label)


def orbits(G: PermGroup) -> list[tuple[int, ...]]:
    """
    Orbits of G on {1..n} as sorted 1-based tuples, ordered by smallest index.
    """
    images = G.image_matrix
    remaining = set(range(G.degree))
    result = []
    for i in range(G.degree):
        if i not in remaining:
            continue
        orbit = sorted(set(images[:, i].tolist()))
        remaining.difference_update(orbit)
        result.append(tuple(j + 1 for j in orbit))
    return result


def is_transitive(G: PermGroup) -> bool:
    """
    True iff G has a single orbit.
    """
    return len(orbits(G)) == 1


@dataclass(frozen=True)
class CosetSystem:
    """
    A complete system of representatives of the right cosets H g of H in G.
    """

    subgroup_order: int
    group_order: int
    representatives: tuple[Permutation, ...]
    subgroup: PermGroup

    @property
    def size(self) -> int:
        """K = |G| / |H|."""
        return len(self.representatives)


def coset_representatives(H: PermGroup, G: PermGroup) -> CosetSystem:
    """
    Picks the lexicographically smallest element of every right coset H g.
    :param H: subgroup of G
    :param G: group
    :return: CosetSystem
    """
    if H.degree != G.degree or any(h not in G for h in H.elements):
        raise NotASubgroupError("H is not a subgroup of G.")

    covered: set[Permutation] = set()
    representatives = []
    for g in G.elements:
        if g in covered:
            continue
        representatives.append(g)
        coset = {h.compose(g) for h in H.elements}
        if coset & covered:
            raise NotASubgroupError("Cosets overlap; H is not a subgroup of G.")
        covered.update(coset)

    if len(covered) != G.order or len(representatives) * H.order != G.order:
        raise NotASubgroupError("Cosets of H do not partition G.")

    logger.debug(
        "Found %s coset representatives of a subgroup of order %s.",
        len(representatives),
        H.order,
    )
    return CosetSystem(
        subgroup_order=H.order,
        group_order=G.order,
        representatives=tuple(representatives),
        subgroup=H,
    )


@dataclass(frozen=True)
class OrbitBlock:
    """
    One orbit O_j of the index set with its stabilizer and the taus
    placing the orbit's outputs: ``taus[k]`` sends ``indices[k]`` to
    ``representative``.
    """

    representative: int
    indices: tuple[int, ...]
    stabilizer: PermGroup
    taus: tuple[Permutation, ...]


def orbit_layout(G: PermGroup) -> list[OrbitBlock]:
    """
    Decomposes {1..n} into G-orbits and attaches, per orbit, the
    stabilizer of its smallest index and coset representatives of it,
    sorted so that the k-th tau maps the k-th orbit index to the
    representative.
    """
    blocks = []
    for orbit in orbits(G):
        j = orbit[0]
        stab = stabilizer(G, j)
        system = coset_representatives(stab, G)
        taus = sorted(system.representatives, key=lambda tau: tau.inverse().image(j))
        blocks.append(
            OrbitBlock(
                representative=j, indices=orbit, stabilizer=stab, taus=tuple(taus)
            )
        )
    return blocks
