"""Tests for the explicit max/min, k-th largest and sort ReLU networks."""

import functools
import itertools
import json

import numpy as np
import pytest
from scipy import sparse

from common.exceptions import (
    DimensionMismatchError,
    InvalidParameterError,
    NonFiniteInputError,
)
from permgroup.permgroup import GroupKind, named_group
from qfs.qfs import canonical_rep
from relunet.relunet import (
    Activation,
    GadgetProgram,
    Layer,
    ReluNetwork,
    compose_invariant,
    evaluate,
    evaluate_affine,
    max2_gadget,
    max_k_network,
    min2_gadget,
    min_k_network,
    nonzero_parameters,
    predicted_kth_depth,
    predicted_sort_depth,
    sort_network,
)
from util.util import random_rows_with_ties


@functools.cache
def _sort(n: int) -> ReluNetwork:
    return sort_network(n)


def _descending(x: np.ndarray) -> np.ndarray:
    return -np.sort(-x, axis=-1)


def test_max2_gadget():
    net = max2_gadget()
    assert evaluate(net, [2.0, 5.0])[0] == 5.0
    assert evaluate(net, [5.0, 2.0])[0] == 5.0
    assert evaluate(net, [0.1, 0.7])[0] == 0.7
    for a in (-3.75, 0.0, 1e300, -1e-300, 0.3):
        assert evaluate(net, [a, a])[0] == a
    # The difference overflows but its sign still picks the operand.
    assert evaluate(net, [-1.5e308, 1.5e308])[0] == 1.5e308


def test_min2_gadget():
    net = min2_gadget()
    assert evaluate(net, [-3.0, 7.0])[0] == -3.0
    assert evaluate(net, [7.0, -3.0])[0] == -3.0
    assert evaluate(net, [0.7, 0.1])[0] == 0.1
    assert net.depth == 2


def test_max_k_examples():
    x = [4.0, 1.0, 3.0, 2.0]
    assert evaluate(max_k_network(4, 1), x)[0] == 4.0
    assert evaluate(max_k_network(4, 2), x)[0] == 3.0
    assert evaluate(max_k_network(4, 4), x)[0] == 1.0
    # Ties count with multiplicity.
    assert evaluate(max_k_network(4, 2), [5.0, 5.0, 1.0, 0.0])[0] == 5.0


@pytest.mark.parametrize("N, k", [(1, 1), (3, 2), (5, 3), (6, 1), (6, 6), (7, 4)])
def test_max_k_on_random_floats(N, k):
    x = random_rows_with_ties(N, 2000, seed=N * 10 + k)
    net = max_k_network(N, k)
    np.testing.assert_array_equal(evaluate(net, x)[:, 0], _descending(x)[:, k - 1])
    assert net.depth == predicted_kth_depth(N, k)


@pytest.mark.parametrize("N, k", [(4, 2), (5, 1), (5, 5)])
def test_min_k_on_random_floats(N, k):
    x = random_rows_with_ties(N, 2000, seed=k) - 0.5
    np.testing.assert_array_equal(
        evaluate(min_k_network(N, k), x)[:, 0], np.sort(x)[:, k - 1]
    )


def test_rank_range():
    with pytest.raises(InvalidParameterError):
        max_k_network(3, 0)
    with pytest.raises(InvalidParameterError):
        max_k_network(3, 4)
    with pytest.raises(InvalidParameterError):
        min_k_network(0, 1)
    with pytest.raises(InvalidParameterError):
        sort_network(0)


def test_sort_network_examples():
    net = _sort(3)
    np.testing.assert_array_equal(evaluate(net, [0.2, 0.9, 0.5]), [0.9, 0.5, 0.2])
    np.testing.assert_array_equal(evaluate(net, [9.0, 4.0, -2.0]), [9.0, 4.0, -2.0])
    np.testing.assert_array_equal(evaluate(_sort(1), [3.5]), [3.5])


def test_sort_network_on_every_permutation_of_six():
    inputs = np.array(list(itertools.permutations(range(1, 7))), dtype=float)
    outputs = evaluate(_sort(6), inputs)
    expected = np.tile(np.arange(6.0, 0.0, -1.0), (720, 1))
    np.testing.assert_array_equal(outputs, expected)


@pytest.mark.parametrize("n", range(1, 12))
def test_sort_network_on_floats_with_ties(n):
    x = random_rows_with_ties(n, 10_000, seed=n)
    np.testing.assert_array_equal(evaluate(_sort(n), x), _descending(x))


@pytest.mark.parametrize("n", range(1, 9))
def test_sort_network_on_integer_ties(n):
    rng = np.random.default_rng(n)
    x = rng.integers(0, 4, size=(10_000, n)).astype(float)
    np.testing.assert_array_equal(evaluate(_sort(n), x), _descending(x))


def test_sort_network_twelve():
    x = random_rows_with_ties(12, 1000, seed=12)
    np.testing.assert_array_equal(evaluate(_sort(12), x), _descending(x))


@pytest.mark.slow
def test_sort_network_twelve_full():
    net = _sort(12)
    assert net.depth == predicted_sort_depth(12)
    x = random_rows_with_ties(12, 10_000, seed=1212)
    np.testing.assert_array_equal(evaluate(net, x), _descending(x))


def test_sort_network_matches_canonical_representative():
    S5 = named_group(GroupKind.SYMMETRIC, 5)
    net = _sort(5)
    rng = np.random.default_rng(5)
    for x in rng.normal(size=(1000, 5)):
        np.testing.assert_array_equal(evaluate(net, x), canonical_rep(S5, x).canonical)


@pytest.mark.parametrize("n", range(1, 8))
def test_sort_depth_matches_prediction(n):
    assert _sort(n).depth == predicted_sort_depth(n)


def test_predicted_depths():
    assert [predicted_sort_depth(n) for n in range(1, 6)] == [1, 2, 4, 6, 9]
    assert predicted_kth_depth(4, 1) == 3
    assert predicted_kth_depth(4, 2) == 5


def test_compose_invariant():
    sort = _sort(3)
    total = ReluNetwork(3, [Layer(np.ones((1, 3)), [0.0], Activation.IDENTITY)])
    net = compose_invariant(total, sort)
    assert net.depth == sort.depth + 1
    assert net.nonzero_parameters == sort.nonzero_parameters + 3
    assert evaluate(net, [1.0, -2.0, 4.0])[0] == 3.0

    first = ReluNetwork(3, [Layer([[1.0, 0.0, 0.0]], [0.0], Activation.IDENTITY)])
    assert evaluate(compose_invariant(first, sort), [1.0, -2.0, 4.0])[0] == 4.0

    with pytest.raises(DimensionMismatchError):
        compose_invariant(ReluNetwork(2), sort)


def test_composed_network_is_exactly_invariant():
    n = 5
    rng = np.random.default_rng(17)
    f_net = ReluNetwork(
        n,
        [
            Layer(rng.normal(size=(8, n)), rng.normal(size=8)),
            Layer(rng.normal(size=(1, 8)), rng.normal(size=1), Activation.IDENTITY),
        ],
    )
    net = compose_invariant(f_net, _sort(n))
    for _ in range(1000):
        x = rng.normal(size=n)
        permuted = x[rng.permutation(n)]
        assert evaluate(net, permuted)[0] == evaluate(net, x)[0]


def test_gadget_nets_compose_after_affine_layers():
    scale = ReluNetwork(3, [Layer(2.0 * np.eye(3), np.zeros(3), Activation.IDENTITY)])
    net = compose_invariant(_sort(3), scale)
    assert [program.start for program in net.programs] == [1]
    np.testing.assert_array_equal(evaluate(net, [0.1, 0.3, 0.2]), [0.6, 0.4, 0.2])


def test_affine_forward_agrees_with_selection():
    net = _sort(5)
    rng = np.random.default_rng(3)
    integers = rng.integers(-50, 50, size=(500, 5)).astype(float)
    np.testing.assert_array_equal(
        evaluate_affine(net, integers), evaluate(net, integers)
    )
    floats = rng.random((500, 5))
    np.testing.assert_allclose(
        evaluate_affine(net, floats), evaluate(net, floats), rtol=0, atol=1e-12
    )


def test_evaluate_edge_cases():
    identity = ReluNetwork(3)
    np.testing.assert_array_equal(
        evaluate(identity, [1.0, -2.0, 3.0]), [1.0, -2.0, 3.0]
    )
    clamp = ReluNetwork(1, [Layer([[1.0]], [0.0])])
    assert evaluate(clamp, [-2.0])[0] == 0.0
    with pytest.raises(NonFiniteInputError):
        evaluate(clamp, [np.nan])
    with pytest.raises(NonFiniteInputError):
        evaluate(_sort(2), [np.inf, 1.0])
    with pytest.raises(DimensionMismatchError):
        evaluate(clamp, [1.0, 2.0])


def test_batch_size_does_not_change_results():
    net = _sort(4)
    rng = np.random.default_rng(4)
    x = rng.normal(size=(150, 4))
    batched = evaluate(net, x)
    for row, expected in zip(x, batched):
        np.testing.assert_array_equal(evaluate(net, row), expected)


def test_layer_chaining_is_checked():
    with pytest.raises(DimensionMismatchError):
        ReluNetwork(
            3,
            [Layer(np.ones((2, 3)), np.zeros(2)), Layer(np.ones((1, 3)), [0.0])],
        )
    with pytest.raises(DimensionMismatchError):
        Layer(np.ones((2, 3)), np.zeros(3))


def test_gadget_blocks_are_checked():
    sort = _sort(3)
    with pytest.raises(DimensionMismatchError):
        ReluNetwork(3, sort.layers, [sort.programs[0].shifted(1)])
    wrong_width = GadgetProgram(inputs=2, operations=(), outputs=(0, 1), stop=1)
    with pytest.raises(DimensionMismatchError):
        ReluNetwork(3, sort.layers[:1], [wrong_width])


def test_nonzero_parameters_match_a_dense_scan():
    net = _sort(4)
    dense = sum(
        int(np.count_nonzero(layer.weight.toarray()))
        + int(np.count_nonzero(layer.bias))
        for layer in net.layers
    )
    assert nonzero_parameters(net) == dense
    assert all(isinstance(layer.weight, sparse.csr_matrix) for layer in net.layers)


def test_json_round_trip():
    net = _sort(4)
    data = json.loads(json.dumps(net.to_dict()))
    assert data["widths"] == net.widths
    assert {item["act"] for item in data["layers"]} == {"relu", "id"}
    restored = ReluNetwork.from_dict(data)
    assert restored.programs == net.programs
    x = random_rows_with_ties(4, 200, seed=0)
    np.testing.assert_array_equal(evaluate(restored, x), evaluate(net, x))
    np.testing.assert_array_equal(evaluate(restored, x), _descending(x))


def test_dense_export_guard(monkeypatch):
    monkeypatch.setattr("relunet.relunet.dense_export_limit", 10)
    with pytest.raises(InvalidParameterError):
        sort_network(3).to_dict()
