"""
Explicit ReLU networks: the max/min gadgets, the k-th largest network, the
sort network and invariant composition f o Sort.

Gadgets use only subtraction, ReLU and addition:
max(a, b) = ReLU(a - b) + b and min(a, b) = a - ReLU(a - b).
Rebuilding the winner as ReLU(a - b) + b rounds on general floats, so a
gadget-built block also carries its ``GadgetProgram``: ``evaluate`` reads
the sign of ReLU(a - b) and returns the operand itself. The result matches
a comparison sort bit for bit. ``evaluate_affine`` runs the layer weights
as plain float arithmetic.

A signal that can be negative is carried through a hidden layer as the
pair (ReLU(z), ReLU(-z)) and recombined by the next layer, so every hidden
layer is a plain ReLU layer and only the output layer is affine.

The k-th largest value follows the leave-one-out recursion
max^(k)(Z) = min over l of max^(k-1)(Z without z_l), memoized by subset.
It is far larger than a bitonic network; it is kept because its depth has
a simple closed form.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from enum import StrEnum
from functools import cached_property

import numpy as np
from scipy import sparse

from common.constants import dense_export_limit, relu_eval_chunk
from common.exceptions import (
    DimensionMismatchError,
    InvalidParameterError,
    NonFiniteInputError,
)
from logger.logger import logger


class Activation(StrEnum):
    """
    Layer activations; ``id`` is the affine output layer.
    """

    RELU = "relu"
    IDENTITY = "id"


@dataclass
class Layer:
    """
    One affine map followed by an activation. ``weight`` is out x in.
    """

    weight: sparse.csr_matrix
    bias: np.ndarray
    activation: Activation = Activation.RELU

    def __post_init__(self):
        self.weight = sparse.csr_matrix(self.weight, dtype=np.float64)
        self.weight.sum_duplicates()
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        self.activation = Activation(self.activation)
        if self.bias.shape[0] != self.weight.shape[0]:
            raise DimensionMismatchError(
                f"Bias of length {self.bias.shape[0]} "
                f"for {self.weight.shape[0]} outputs."
            )

    @property
    def input_dim(self) -> int:
        """Columns of W."""
        return self.weight.shape[1]

    @property
    def output_dim(self) -> int:
        """Rows of W."""
        return self.weight.shape[0]


# (nodes, a, b, is_max) index arrays of one gadget depth.
GadgetLevel = tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]


@dataclass(frozen=True)
class GadgetProgram:
    """
    Selection form of the gadget-built layers ``start``..``stop - 1``.
    Nodes below ``inputs`` are the inputs (negated when ``negate``); node
    ``inputs + i`` applies ``operations[i]`` = (max|min, a, b) to two
    earlier nodes.
    """

    inputs: int
    operations: tuple[tuple[str, int, int], ...]
    outputs: tuple[int, ...]
    negate: bool = False
    start: int = 0
    stop: int = 0

    @cached_property
    def levels(self) -> list[GadgetLevel]:
        """Nodes grouped by gadget depth."""
        depth = [0] * self.inputs
        groups: dict[int, list[int]] = {}
        for offset, (_, a, b) in enumerate(self.operations):
            level = max(depth[a], depth[b]) + 1
            depth.append(level)
            groups.setdefault(level, []).append(self.inputs + offset)
        levels = []
        for level in sorted(groups):
            nodes = np.array(groups[level])
            ops = [self.operations[node - self.inputs] for node in groups[level]]
            levels.append(
                (
                    nodes,
                    np.array([a for _, a, _ in ops]),
                    np.array([b for _, _, b in ops]),
                    np.array([op == _GadgetGraph.MAX for op, _, _ in ops])[:, None],
                )
            )
        return levels

    def run(self, hidden: np.ndarray) -> np.ndarray:
        """
        Inputs x batch to outputs x batch. Each gadget computes
        ReLU(a - b); a positive value picks a for max and b for min.
        """
        sign = -1.0 if self.negate else 1.0
        values = np.empty((self.inputs + len(self.operations), hidden.shape[1]))
        values[: self.inputs] = sign * hidden
        with np.errstate(over="ignore"):
            for nodes, a, b, is_max in self.levels:
                left, right = values[a], values[b]
                a_wins = np.maximum(left - right, 0.0) > 0.0
                values[nodes] = np.where(a_wins == is_max, left, right)
        return sign * values[list(self.outputs)]

    def shifted(self, offset: int) -> "GadgetProgram":
        """Same program placed ``offset`` layers later."""
        return replace(self, start=self.start + offset, stop=self.stop + offset)

    def to_dict(self) -> dict:
        """JSON form."""
        return {
            "inputs": self.inputs,
            "operations": [list(operation) for operation in self.operations],
            "outputs": list(self.outputs),
            "negate": self.negate,
            "start": self.start,
            "stop": self.stop,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GadgetProgram":
        """Inverse of ``to_dict``."""
        return cls(
            inputs=int(data["inputs"]),
            operations=tuple(
                (str(op), int(a), int(b)) for op, a, b in data["operations"]
            ),
            outputs=tuple(int(node) for node in data["outputs"]),
            negate=bool(data["negate"]),
            start=int(data["start"]),
            stop=int(data["stop"]),
        )


@dataclass
class ReluNetwork:
    """
    Z_H o ... o Z_1 with Z_i(x) = act_i(W_i x + b_i). A network without
    layers is the identity on ``input_dim`` coordinates. ``programs`` mark
    the blocks of layers that were built from max/min gadgets.
    """

    input_dim: int
    layers: list[Layer] = field(default_factory=list)
    programs: list[GadgetProgram] = field(default_factory=list)

    def __post_init__(self):
        width = self.input_dim
        for index, layer in enumerate(self.layers):
            if layer.input_dim != width:
                raise DimensionMismatchError(
                    f"Layer {index} expects {layer.input_dim} inputs, gets {width}."
                )
            width = layer.output_dim
        covered = 0
        for program in sorted(self.programs, key=lambda p: p.start):
            if not covered <= program.start < program.stop <= len(self.layers):
                raise DimensionMismatchError(
                    f"Gadget block {program.start}..{program.stop} does not fit "
                    f"{len(self.layers)} layers."
                )
            first, last = self.layers[program.start], self.layers[program.stop - 1]
            if (
                first.input_dim != program.inputs
                or last.output_dim != len(program.outputs)
            ):
                raise DimensionMismatchError(
                    f"Gadget block {program.start}..{program.stop} does not match "
                    "its layer widths."
                )
            covered = program.stop

    @property
    def output_dim(self) -> int:
        """Width of the last layer."""
        return self.layers[-1].output_dim if self.layers else self.input_dim

    @property
    def depth(self) -> int:
        """Number of layers H."""
        return len(self.layers)

    @property
    def widths(self) -> list[int]:
        """d_1..d_{H+1}, input width first."""
        return [self.input_dim] + [layer.output_dim for layer in self.layers]

    @property
    def nonzero_parameters(self) -> int:
        """Nonzero entries over all weights and biases."""
        return sum(
            int(layer.weight.count_nonzero()) + int(np.count_nonzero(layer.bias))
            for layer in self.layers
        )

    def to_dict(self) -> dict:
        """
        Layer-major JSON with dense matrices.
        """
        entries = sum(
            layer.weight.shape[0] * layer.weight.shape[1] for layer in self.layers
        )
        if entries > dense_export_limit:
            raise InvalidParameterError(
                f"Dense export would hold {entries} weights, "
                f"limit is {dense_export_limit}."
            )
        return {
            "widths": self.widths,
            "layers": [
                {
                    "W": layer.weight.toarray().tolist(),
                    "b": layer.bias.tolist(),
                    "act": str(layer.activation),
                }
                for layer in self.layers
            ],
            "gadgets": [program.to_dict() for program in self.programs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReluNetwork":
        """Inverse of ``to_dict``."""
        widths = data["widths"]
        layers = [
            Layer(
                weight=np.asarray(item["W"], dtype=np.float64).reshape(
                    widths[index + 1], widths[index]
                ),
                bias=item["b"],
                activation=item["act"],
            )
            for index, item in enumerate(data["layers"])
        ]
        programs = [GadgetProgram.from_dict(item) for item in data.get("gadgets", [])]
        return cls(input_dim=int(widths[0]), layers=layers, programs=programs)


def _as_batch(net: ReluNetwork, x) -> tuple[np.ndarray, bool]:
    inputs = np.asarray(x, dtype=np.float64)
    single = inputs.ndim == 1
    batch = inputs.reshape(1, -1) if single else inputs
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise DimensionMismatchError(
            f"Network expects {net.input_dim} inputs, got shape {inputs.shape}."
        )
    if not np.isfinite(batch).all():
        raise NonFiniteInputError("Network inputs must not contain NaN or Inf.")
    return batch, single


def _apply_layer(layer: Layer, hidden: np.ndarray) -> np.ndarray:
    hidden = layer.weight @ hidden + layer.bias[:, None]
    if layer.activation == Activation.RELU:
        hidden = np.maximum(hidden, 0.0)
    return hidden


def _forward(net: ReluNetwork, x, use_programs: bool) -> np.ndarray:
    batch, single = _as_batch(net, x)
    programs = {p.start: p for p in net.programs} if use_programs else {}

    outputs = np.empty((batch.shape[0], net.output_dim))
    for start in range(0, batch.shape[0], relu_eval_chunk):
        hidden = batch[start : start + relu_eval_chunk].T
        index = 0
        while index < len(net.layers):
            program = programs.get(index)
            if program is not None:
                hidden = program.run(hidden)
                index = program.stop
            else:
                hidden = _apply_layer(net.layers[index], hidden)
                index += 1
        outputs[start : start + relu_eval_chunk] = hidden.T
    return outputs[0] if single else outputs


def evaluate(net: ReluNetwork, x) -> np.ndarray:
    """
    Forward pass on a point or on a batch of points (one per row).
    Gadget blocks return the selected operand, so sort and rank outputs are
    input coordinates exactly. Rows are processed in fixed-size chunks;
    sparse row sums run in column order, so results do not depend on the
    batch size.
    """
    return _forward(net, x, use_programs=True)


def evaluate_affine(net: ReluNetwork, x) -> np.ndarray:
    """
    Forward pass through the layer weights only. Equal to ``evaluate`` on
    integers and dyadic grids, within a few ulps on other floats.
    """
    return _forward(net, x, use_programs=False)


# Signals are sparse linear combinations of the units of the current layer.
Signal = dict[int, float]


def _combine(*terms: tuple[float, Signal]) -> Signal:
    result: Signal = {}
    for scale, signal in terms:
        for unit, coefficient in signal.items():
            result[unit] = result.get(unit, 0.0) + scale * coefficient
    return {unit: value for unit, value in result.items() if value != 0.0}


class _GadgetGraph:
    """
    DAG of max/min gadgets over the inputs. Every node sits at the layer
    where its value first exists; equal nodes are shared.
    """

    MAX = "max"
    MIN = "min"

    def __init__(self, inputs: int):
        self.depth: list[int] = [0] * inputs
        self.operations: list[tuple[str, int, int] | None] = [None] * inputs
        self._memo: dict[tuple[str, int, int], int] = {}

    def gadget(self, operation: str, a: int, b: int) -> int:
        """Node computing max/min of nodes a and b."""
        key = (operation, a, b)
        if key not in self._memo:
            self._memo[key] = len(self.depth)
            self.depth.append(max(self.depth[a], self.depth[b]) + 1)
            self.operations.append(key)
        return self._memo[key]

    def reduce(self, operation: str, nodes: Sequence[int]) -> int:
        """Balanced pairwise reduction; an odd node waits for the next round."""
        level = list(nodes)
        while len(level) > 1:
            paired = [
                self.gadget(operation, level[i], level[i + 1])
                for i in range(0, len(level) - 1, 2)
            ]
            if len(level) % 2:
                paired.append(level[-1])
            level = paired
        return level[0]


class _RankBuilder:
    """
    Memoized leave-one-out recursion for k-th largest values of subsets.
    """

    def __init__(self, graph: _GadgetGraph):
        self.graph = graph
        self._maxima: dict[tuple[int, ...], int] = {}
        self._ranks: dict[tuple[tuple[int, ...], int], int] = {}

    def maximum(self, subset: tuple[int, ...]) -> int:
        """Tournament over the subset, split into halves."""
        if len(subset) == 1:
            return subset[0]
        if subset not in self._maxima:
            half = (len(subset) + 1) // 2
            self._maxima[subset] = self.graph.gadget(
                _GadgetGraph.MAX,
                self.maximum(subset[:half]),
                self.maximum(subset[half:]),
            )
        return self._maxima[subset]

    def kth_largest(self, subset: tuple[int, ...], k: int) -> int:
        """max^(k) of the inputs listed in subset."""
        if k == 1:
            return self.maximum(subset)
        key = (subset, k)
        if key not in self._ranks:
            children = [
                self.kth_largest(subset[:i] + subset[i + 1 :], k - 1)
                for i in range(len(subset))
            ]
            self._ranks[key] = self.graph.reduce(_GadgetGraph.MIN, children)
        return self._ranks[key]


class _LayerEmitter:
    """
    Collects the rows of one hidden layer.
    """

    def __init__(self):
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.values: list[float] = []
        self.units = 0

    def relu_unit(self, signal: Signal) -> int:
        """A unit computing ReLU(signal)."""
        unit = self.units
        for column, value in signal.items():
            self.rows.append(unit)
            self.cols.append(column)
            self.values.append(value)
        self.units += 1
        return unit

    def carry(self, signal: Signal) -> Signal:
        """Passes a signed signal through as ReLU(z) - ReLU(-z)."""
        positive = self.relu_unit(signal)
        negative = self.relu_unit(_combine((-1.0, signal)))
        return {positive: 1.0, negative: -1.0}

    def layer(self, width: int, activation: Activation = Activation.RELU) -> Layer:
        """Freezes the collected rows into a sparse layer."""
        weight = sparse.coo_matrix(
            (self.values, (self.rows, self.cols)), shape=(self.units, width)
        )
        return Layer(weight=weight, bias=np.zeros(self.units), activation=activation)


def _emit(
    graph: _GadgetGraph, outputs: Sequence[int], negate: bool = False
) -> ReluNetwork:
    """
    Lowers the gadget DAG to layers: layer L holds the gadgets of depth L
    and carries every value still needed later. A final identity layer reads
    the outputs.
    """
    inputs = sum(1 for operation in graph.operations if operation is None)
    final = max((graph.depth[node] for node in outputs), default=0)

    last_use = [0] * len(graph.depth)
    for node, operation in enumerate(graph.operations):
        if operation is not None:
            _, a, b = operation
            last_use[a] = max(last_use[a], graph.depth[node])
            last_use[b] = max(last_use[b], graph.depth[node])
    for node in outputs:
        last_use[node] = final + 1

    by_depth: dict[int, list[int]] = {}
    for node, depth in enumerate(graph.depth):
        by_depth.setdefault(depth, []).append(node)

    sign = -1.0 if negate else 1.0
    signals: dict[int, Signal] = {i: {i: sign} for i in range(inputs)}
    layers = []
    width = inputs
    for depth in range(1, final + 1):
        emitter = _LayerEmitter()
        updated: dict[int, Signal] = {}
        for node in sorted(signals):
            if last_use[node] > depth:
                updated[node] = emitter.carry(signals[node])
        for node in by_depth.get(depth, []):
            operation, a, b = graph.operations[node]
            difference = emitter.relu_unit(
                _combine((1.0, signals[a]), (-1.0, signals[b]))
            )
            if operation == _GadgetGraph.MAX:
                kept = emitter.carry(signals[b])
                updated[node] = _combine((1.0, {difference: 1.0}), (1.0, kept))
            else:
                kept = emitter.carry(signals[a])
                updated[node] = _combine((1.0, kept), (-1.0, {difference: 1.0}))
        layers.append(emitter.layer(width))
        width = emitter.units
        signals = updated

    emitter = _LayerEmitter()
    for node in outputs:
        emitter.relu_unit(_combine((sign, signals[node])))
    layers.append(emitter.layer(width, activation=Activation.IDENTITY))

    program = GadgetProgram(
        inputs=inputs,
        operations=tuple(graph.operations[inputs:]),
        outputs=tuple(outputs),
        negate=negate,
        start=0,
        stop=len(layers),
    )
    net = ReluNetwork(input_dim=inputs, layers=layers, programs=[program])
    logger.debug(
        "Built ReLU network with %s layers, max width %s and %s nonzero parameters.",
        net.depth,
        max(net.widths),
        net.nonzero_parameters,
    )
    return net


def _check_rank(N: int, k: int):
    if N < 1 or not 1 <= k <= N:
        raise InvalidParameterError(f"Need 1 <= k <= N, got N={N}, k={k}.")


def max_k_network(N: int, k: int) -> ReluNetwork:
    """
    Network returning the k-th largest of N inputs, counting multiplicity.
    """
    _check_rank(N, k)
    graph = _GadgetGraph(N)
    node = _RankBuilder(graph).kth_largest(tuple(range(N)), k)
    return _emit(graph, [node])


def min_k_network(N: int, k: int) -> ReluNetwork:
    """
    Network returning the k-th smallest of N inputs:
    min^(k)(x) = -max^(k)(-x).
    """
    _check_rank(N, k)
    graph = _GadgetGraph(N)
    node = _RankBuilder(graph).kth_largest(tuple(range(N)), k)
    return _emit(graph, [node], negate=True)


def max2_gadget() -> ReluNetwork:
    """max(z1, z2) = ReLU(z1 - z2) + z2."""
    return max_k_network(2, 1)


def min2_gadget() -> ReluNetwork:
    """min(z1, z2) = z1 - ReLU(z1 - z2)."""
    graph = _GadgetGraph(2)
    return _emit(graph, [graph.gadget(_GadgetGraph.MIN, 0, 1)])


def sort_network(n: int) -> ReluNetwork:
    """
    Network with outputs (max^(1)(x), ..., max^(n)(x)), the descending sort.
    """
    if n < 1:
        raise InvalidParameterError(f"Need n >= 1, got {n}.")
    graph = _GadgetGraph(n)
    builder = _RankBuilder(graph)
    everything = tuple(range(n))
    outputs = [builder.kth_largest(everything, k) for k in range(1, n + 1)]
    return _emit(graph, outputs)


def _ceil_log2(s: int) -> int:
    return (s - 1).bit_length()


def predicted_kth_depth(N: int, k: int) -> int:
    """
    Layers of ``max_k_network(N, k)``: sum over i < k of ceil(log2(N - i)),
    plus the output layer.
    """
    _check_rank(N, k)
    return sum(_ceil_log2(N - i) for i in range(k)) + 1


def predicted_sort_depth(n: int) -> int:
    """
    Layers of ``sort_network(n)``: sum over s <= n of ceil(log2 s), plus the
    output layer. This grows like n log n.
    """
    if n < 1:
        raise InvalidParameterError(f"Need n >= 1, got {n}.")
    return sum(_ceil_log2(s) for s in range(1, n + 1)) + 1


def compose_invariant(f_net: ReluNetwork, sort: ReluNetwork) -> ReluNetwork:
    """
    f o Sort: the layers of sort followed by the layers of f. Depth and
    parameter counts add up.
    """
    if f_net.input_dim != sort.output_dim:
        raise DimensionMismatchError(
            f"f expects {f_net.input_dim} inputs, sort yields {sort.output_dim}."
        )
    offset = len(sort.layers)
    return ReluNetwork(
        input_dim=sort.input_dim,
        layers=[*sort.layers, *f_net.layers],
        programs=[
            *sort.programs,
            *(program.shifted(offset) for program in f_net.programs),
        ],
    )


def nonzero_parameters(net: ReluNetwork) -> int:
    """Nonzero entries over all weights and biases."""
    return net.nonzero_parameters
