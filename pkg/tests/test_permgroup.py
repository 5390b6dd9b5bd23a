"""Tests for permutation groups, stabilizers, orbits and cosets."""

import itertools

import numpy as np
import pytest

from common.exceptions import (
    GroupTooLargeError,
    InvalidParameterError,
    InvalidPermutationError,
    NotASubgroupError,
)
from permgroup.permgroup import (
    GroupKind,
    Permutation,
    PermGroup,
    coset_representatives,
    group_from_generators,
    is_transitive,
    named_group,
    orbit_layout,
    orbits,
    perm_apply,
    stabilizer,
)


def test_parse_and_one_line_notation():
    g = Permutation.parse([2, 1, 3])
    assert g.images == (1, 0, 2)
    assert g.to_list() == [2, 1, 3]
    assert g.image(1) == 2


@pytest.mark.parametrize("one_line", [[1, 1, 3], [0, 1, 2], [1, 2, 4]])
def test_parse_rejects_non_bijections(one_line):
    with pytest.raises(InvalidPermutationError):
        Permutation.parse(one_line)


def test_from_cycles():
    assert Permutation.from_cycles(3, [(1, 2, 3)]).to_list() == [2, 3, 1]
    assert Permutation.from_cycles(4, [(1, 2), (3, 4)]).to_list() == [2, 1, 4, 3]
    with pytest.raises(InvalidPermutationError):
        Permutation.from_cycles(3, [(1, 2), (2, 3)])


def test_compose_and_inverse():
    g = Permutation.from_cycles(4, [(1, 2, 3, 4)])
    h = Permutation.transposition(4, 1, 3)
    assert g.compose(g.inverse()).is_identity()
    # (g . h)(i) = g(h(i))
    for i in range(1, 5):
        assert g.compose(h).image(i) == g.image(h.image(i))


def test_action_moves_entries_to_images():
    g = Permutation.from_cycles(3, [(1, 2, 3)])
    np.testing.assert_array_equal(perm_apply(g, [10.0, 20.0, 30.0]), [30.0, 10.0, 20.0])


def test_action_is_a_left_action():
    S3 = named_group(GroupKind.SYMMETRIC, 3)
    x = np.array([0.3, -1.2, 2.5])
    for g, h in itertools.product(S3.elements, repeat=2):
        np.testing.assert_array_equal(
            perm_apply(g.compose(h), x), perm_apply(g, perm_apply(h, x))
        )


def test_act_matches_perm_apply():
    C5 = named_group(GroupKind.CYCLIC, 5)
    x = np.arange(5.0)
    images = C5.act(x)
    for row, g in zip(images, C5.elements):
        np.testing.assert_array_equal(row, perm_apply(g, x))


@pytest.mark.parametrize(
    "kind, n, order",
    [
        (GroupKind.SYMMETRIC, 1, 1),
        (GroupKind.SYMMETRIC, 4, 24),
        (GroupKind.SYMMETRIC, 6, 720),
        (GroupKind.CYCLIC, 5, 5),
        (GroupKind.CYCLIC, 1, 1),
        (GroupKind.TRIVIAL, 3, 1),
    ],
)
def test_named_group_orders(kind, n, order):
    G = named_group(kind, n)
    assert G.order == order
    assert G.elements[0].is_identity()
    assert list(G.elements) == sorted(G.elements)


def test_symmetric_group_matches_closure_of_its_generators():
    S4 = named_group(GroupKind.SYMMETRIC, 4)
    closed = group_from_generators(4, S4.generators)
    assert closed.element_set == S4.element_set


def test_group_cap():
    with pytest.raises(GroupTooLargeError):
        named_group(GroupKind.SYMMETRIC, 9)
    with pytest.raises(GroupTooLargeError, match="group too large"):
        group_from_generators(
            5,
            [
                Permutation.from_cycles(5, [(1, 2, 3, 4, 5)]),
                Permutation.transposition(5, 1, 2),
            ],
            cap=50,
        )


def test_generator_degree_mismatch():
    with pytest.raises(InvalidPermutationError):
        group_from_generators(4, [Permutation.parse([2, 1, 3])])
    with pytest.raises(InvalidParameterError):
        group_from_generators(0, [])


def test_stabilizer_of_symmetric_group():
    S4 = named_group(GroupKind.SYMMETRIC, 4)
    stab = stabilizer(S4, 1)
    assert stab.order == 6
    assert all(g.image(1) == 1 for g in stab.elements)


def test_orbits():
    assert orbits(named_group(GroupKind.CYCLIC, 4)) == [(1, 2, 3, 4)]
    assert orbits(named_group(GroupKind.TRIVIAL, 3)) == [(1,), (2,), (3,)]
    swap = group_from_generators(4, [Permutation.transposition(4, 1, 2)])
    assert orbits(swap) == [(1, 2), (3,), (4,)]
    assert not is_transitive(swap)
    assert is_transitive(named_group(GroupKind.CYCLIC, 6))


def test_coset_representatives_partition_the_group():
    S4 = named_group(GroupKind.SYMMETRIC, 4)
    H = stabilizer(S4, 2)
    system = coset_representatives(H, S4)
    assert system.size == 4
    assert system.subgroup_order * system.size == system.group_order

    covered = set()
    for representative in system.representatives:
        coset = {h.compose(representative) for h in H.elements}
        assert representative == min(coset)
        assert not coset & covered
        covered |= coset
    assert covered == set(S4.elements)


def test_coset_representatives_reject_foreign_subgroup():
    C4 = named_group(GroupKind.CYCLIC, 4)
    swap = group_from_generators(4, [Permutation.transposition(4, 1, 2)])
    with pytest.raises(NotASubgroupError):
        coset_representatives(C4, swap)


@pytest.mark.parametrize(
    "G",
    [
        named_group(GroupKind.CYCLIC, 5),
        named_group(GroupKind.SYMMETRIC, 4),
        group_from_generators(4, [Permutation.transposition(4, 2, 4)]),
    ],
)
def test_orbit_layout_taus_place_every_index(G):
    blocks = orbit_layout(G)
    assert [block.indices for block in blocks] == orbits(G)
    for block in blocks:
        assert block.stabilizer.order * len(block.indices) == G.order
        for index, tau in zip(block.indices, block.taus):
            assert tau in G
            assert tau.image(index) == block.representative


def test_group_json_round_trip():
    G = group_from_generators(
        5, [Permutation.from_cycles(5, [(1, 2, 3)]), Permutation.transposition(5, 4, 5)]
    )
    data = G.to_dict()
    assert data["degree"] == 5
    assert PermGroup.from_dict(data).element_set == G.element_set
