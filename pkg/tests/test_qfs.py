"""Tests for quotient geometry and invariant/equivariant lifts."""

import numpy as np
import pytest

from common.exceptions import (
    DimensionMismatchError,
    InvalidCosetSystemError,
    InvalidParameterError,
    NonFiniteInputError,
)
from permgroup.permgroup import (
    GroupKind,
    Permutation,
    group_from_generators,
    named_group,
    orbits,
    perm_apply,
)
from qfs.qfs import (
    canonical_rep,
    equivariant_from_invariants,
    in_fundamental_domain,
    lift_invariant,
    orbit,
    quotient_distance,
    sn_domain_cosets,
)

S3 = named_group(GroupKind.SYMMETRIC, 3)
C3 = named_group(GroupKind.CYCLIC, 3)


def test_canonical_rep_of_symmetric_group_sorts_descending():
    rep = canonical_rep(S3, [0.2, 0.9, 0.5])
    np.testing.assert_array_equal(rep.canonical, [0.9, 0.5, 0.2])
    assert rep.stabilized_by == 1
    assert canonical_rep(S3, [1.0, 1.0, 0.0]).stabilized_by == 2
    assert canonical_rep(S3, [4.0, 4.0, 4.0]).stabilized_by == 6


def test_canonical_rep_of_cyclic_group_is_lex_max_rotation():
    rep = canonical_rep(C3, [1.0, 3.0, 2.0])
    np.testing.assert_array_equal(rep.canonical, [3.0, 2.0, 1.0])
    assert rep.stabilized_by == 1
    assert canonical_rep(C3, [5.0, 5.0, 5.0]).stabilized_by == 3


@pytest.mark.parametrize(
    "G",
    [named_group(GroupKind.SYMMETRIC, 4), named_group(GroupKind.CYCLIC, 5)],
)
def test_canonical_rep_is_constant_on_orbits(G):
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = rng.integers(0, 3, size=G.degree).astype(float)
        expected = canonical_rep(G, x)
        for image in G.act(x):
            rep = canonical_rep(G, image)
            np.testing.assert_array_equal(rep.canonical, expected.canonical)
            assert rep.stabilized_by == expected.stabilized_by


def test_signed_zeros_share_a_representative():
    a = canonical_rep(S3, [0.0, -0.0, 1.0]).canonical
    b = canonical_rep(S3, [-0.0, 0.0, 1.0]).canonical
    assert a.tobytes() == b.tobytes()


def test_orbit_sizes():
    assert orbit(S3, [1.0, 2.0, 3.0]).shape == (6, 3)
    assert orbit(S3, [1.0, 1.0, 0.0]).shape == (3, 3)
    assert orbit(C3, [1.0, 2.0, 3.0]).shape == (3, 3)


def test_invalid_points():
    with pytest.raises(DimensionMismatchError):
        canonical_rep(S3, [1.0, 2.0])
    with pytest.raises(NonFiniteInputError):
        quotient_distance(S3, [1.0, np.nan, 0.0], [0.0, 0.0, 0.0])


def test_quotient_distance_examples():
    S2 = named_group(GroupKind.SYMMETRIC, 2)
    assert quotient_distance(S2, [0.0, 1.0], [1.0, 0.0]) == 0.0
    assert quotient_distance(S2, [0.0, 0.0], [3.0, 4.0]) == pytest.approx(5.0)
    assert quotient_distance(S3, [1.0, 2.0, 3.0], [3.0, 2.0, 1.5]) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "G",
    [named_group(GroupKind.SYMMETRIC, n) for n in range(2, 6)]
    + [named_group(GroupKind.CYCLIC, n) for n in range(3, 6)],
)
def test_quotient_metric_axioms(G):
    rng = np.random.default_rng(G.order + G.degree)
    for _ in range(10_000):
        x, y, z = rng.uniform(-1.0, 1.0, size=(3, G.degree))
        dxy = quotient_distance(G, x, y)
        assert dxy >= 0.0
        assert dxy == quotient_distance(G, y, x)
        assert quotient_distance(G, x, x) == 0.0
        assert quotient_distance(G, x, z) <= dxy + quotient_distance(G, y, z) + 1e-12
    x = rng.uniform(size=G.degree)
    for g in G.elements:
        assert quotient_distance(G, x, perm_apply(g, x)) == 0.0


def test_fundamental_domain_of_symmetric_group():
    cosets = sn_domain_cosets(S3)
    assert cosets.size == 1
    assert in_fundamental_domain(S3, cosets, [0.9, 0.5, 0.5])
    assert not in_fundamental_domain(S3, cosets, [0.1, 0.5, 0.2])


def test_every_orbit_meets_the_fundamental_domain():
    rng = np.random.default_rng(11)
    cosets = sn_domain_cosets(C3)
    assert cosets.size == 2
    inside = 0
    for _ in range(2000):
        x = rng.uniform(size=3)
        assert any(in_fundamental_domain(C3, cosets, image) for image in C3.act(x))
        inside += in_fundamental_domain(C3, cosets, x)
    assert inside / 2000 == pytest.approx(1 / 3, abs=0.04)


def test_fundamental_domain_rejects_foreign_cosets():
    with pytest.raises(InvalidCosetSystemError):
        in_fundamental_domain(C3, sn_domain_cosets(S3), [0.3, 0.2, 0.1])


@pytest.mark.parametrize(
    "G, points",
    [
        (named_group(GroupKind.SYMMETRIC, 3), 1000),
        (named_group(GroupKind.SYMMETRIC, 4), 1000),
        (named_group(GroupKind.CYCLIC, 6), 1000),
        (named_group(GroupKind.SYMMETRIC, 6), 20),
    ],
)
def test_lift_invariant_is_bit_identical_on_orbits(G, points):
    weights = np.arange(1.0, G.degree + 1.0) ** 1.5

    def f(z: np.ndarray) -> float:
        return float(np.sin(z) @ weights)

    lifted = lift_invariant(G, f)
    rng = np.random.default_rng(G.order)
    for _ in range(points):
        x = rng.normal(size=G.degree)
        value = lifted(x)
        for image in G.act(x):
            assert lifted(image) == value


def _stabilizer_invariant(j: int):
    def f(z: np.ndarray) -> float:
        rest = np.delete(z, j - 1)
        return float(z[j - 1] ** 3 + np.exp(rest).sum() + rest.max(initial=-1.0))

    return f


def _position_dependent(z: np.ndarray) -> float:
    return float(z[0] + 3.0 * z[1 % len(z)] - 0.5 * z[-1] ** 2)


@pytest.mark.parametrize(
    "G, parts",
    [
        (named_group(GroupKind.SYMMETRIC, n), [_stabilizer_invariant(1)])
        for n in range(2, 6)
    ]
    + [(named_group(GroupKind.CYCLIC, n), [_position_dependent]) for n in range(2, 9)]
    + [
        (
            named_group(GroupKind.TRIVIAL, 3),
            [_position_dependent, _stabilizer_invariant(2), _stabilizer_invariant(3)],
        ),
        (
            group_from_generators(4, [Permutation.transposition(4, 1, 3)]),
            [_position_dependent, _stabilizer_invariant(2), _stabilizer_invariant(4)],
        ),
    ],
)
def test_equivariant_assembly(G, parts):
    F = equivariant_from_invariants(G, parts)
    rng = np.random.default_rng(G.degree)
    for _ in range(10):
        x = rng.normal(size=G.degree)
        Fx = F(x)
        for g in G.elements:
            np.testing.assert_allclose(
                F(perm_apply(g, x)), perm_apply(g, Fx), atol=1e-12, rtol=0
            )


def test_equivariant_assembly_needs_one_function_per_orbit():
    G = named_group(GroupKind.TRIVIAL, 3)
    assert len(orbits(G)) == 3
    with pytest.raises(InvalidParameterError):
        equivariant_from_invariants(G, [_position_dependent])


def test_equivariant_assembly_rejects_bad_taus():
    C4 = named_group(GroupKind.CYCLIC, 4)
    identity = Permutation.identity(4)
    with pytest.raises(InvalidCosetSystemError):
        equivariant_from_invariants(C4, [_position_dependent], taus=[[identity] * 4])
