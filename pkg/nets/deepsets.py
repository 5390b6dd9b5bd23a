"""
DeepSets-style invariant networks with hand-written gradients.

Inputs are batches of token sets with shape (B, n, d). Equivariant layers
act on the channel axis and mix tokens only through their sum:
Y = ReLU(X Lambda + (sum over tokens of X) Gamma + b).
"""

from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from common.exceptions import DimensionMismatchError
from relunet.relunet import Activation


class PoolKind(StrEnum):
    """
    Token pooling between the equivariant and the dense part.
    """

    SUM = "sum"
    MEAN = "mean"


@dataclass
class EquivariantLayer:
    """
    lam and gamma are c_in x c_out, bias has length c_out.
    """

    lam: np.ndarray
    gamma: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=np.float64)
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if (
            self.lam.shape != self.gamma.shape
            or self.lam.shape[1] != self.bias.shape[0]
        ):
            raise DimensionMismatchError(
                f"Inconsistent layer shapes {self.lam.shape}, {self.gamma.shape}, "
                f"{self.bias.shape}."
            )

    @property
    def in_channels(self) -> int:
        """c_in."""
        return self.lam.shape[0]

    @property
    def out_channels(self) -> int:
        """c_out."""
        return self.lam.shape[1]


@dataclass
class DenseLayer:
    """
    weight is c_in x c_out.
    """

    weight: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.RELU

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        self.activation = Activation(self.activation)
        if self.weight.ndim != 2 or self.weight.shape[1] != self.bias.shape[0]:
            raise DimensionMismatchError(
                f"Inconsistent layer shapes {self.weight.shape}, {self.bias.shape}."
            )


@dataclass
class DeepSetsModel:
    """
    Equivariant layers, a pooling step and a dense head ending in one output.
    """

    equivariant_layers: list[EquivariantLayer]
    head_layers: list[DenseLayer]
    pool: PoolKind = PoolKind.SUM

    def __post_init__(self):
        self.pool = PoolKind(self.pool)
        channels = [layer.in_channels for layer in self.equivariant_layers[:1]]
        for layer in self.equivariant_layers:
            if layer.in_channels != channels[-1]:
                raise DimensionMismatchError("Equivariant layer widths do not chain.")
            channels.append(layer.out_channels)
        for layer in self.head_layers:
            if channels and layer.weight.shape[0] != channels[-1]:
                raise DimensionMismatchError("Dense layer widths do not chain.")
            channels.append(layer.weight.shape[1])
        if not self.head_layers or self.head_layers[-1].weight.shape[1] != 1:
            raise DimensionMismatchError("The head must end in a single output.")

    @property
    def token_dim(self) -> int:
        """d, the channel count of every input token."""
        if self.equivariant_layers:
            return self.equivariant_layers[0].in_channels
        return self.head_layers[0].weight.shape[0]

    def parameters(self) -> list[np.ndarray]:
        """
        Parameter arrays in a fixed order: lam, gamma, bias per equivariant
        layer, then weight, bias per dense layer.
        """
        params = []
        for layer in self.equivariant_layers:
            params.extend([layer.lam, layer.gamma, layer.bias])
        for layer in self.head_layers:
            params.extend([layer.weight, layer.bias])
        return params

    def with_parameters(self, params: list[np.ndarray]) -> "DeepSetsModel":
        """
        New model with the same architecture and the given parameters.
        """
        current = self.parameters()
        if len(params) != len(current) or any(
            p.shape != q.shape for p, q in zip(params, current)
        ):
            raise DimensionMismatchError("Parameters do not match the architecture.")
        values = iter(params)
        equivariant = [
            EquivariantLayer(
                next(values).copy(), next(values).copy(), next(values).copy()
            )
            for _ in self.equivariant_layers
        ]
        head = [
            DenseLayer(next(values).copy(), next(values).copy(), layer.activation)
            for layer in self.head_layers
        ]
        return DeepSetsModel(
            equivariant_layers=equivariant, head_layers=head, pool=self.pool
        )

    def to_dict(self) -> dict:
        """
        Checkpoint JSON. Dense layers use the ReLU network layout
        (W is out x in).
        """
        return {
            "pool": str(self.pool),
            "equivariant_layers": [
                {
                    "lambda": layer.lam.tolist(),
                    "gamma": layer.gamma.tolist(),
                    "b": layer.bias.tolist(),
                }
                for layer in self.equivariant_layers
            ],
            "layers": [
                {
                    "W": layer.weight.T.tolist(),
                    "b": layer.bias.tolist(),
                    "act": str(layer.activation),
                }
                for layer in self.head_layers
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DeepSetsModel":
        """Inverse of ``to_dict``."""
        return cls(
            equivariant_layers=[
                EquivariantLayer(item["lambda"], item["gamma"], item["b"])
                for item in data["equivariant_layers"]
            ],
            head_layers=[
                DenseLayer(
                    np.asarray(item["W"], dtype=np.float64).T, item["b"], item["act"]
                )
                for item in data["layers"]
            ],
            pool=data.get("pool", PoolKind.SUM),
        )


def init_model(
    token_dim: int,
    equivariant_widths: tuple[int, ...],
    head_widths: tuple[int, ...],
    pool: PoolKind | str = PoolKind.SUM,
    seed: int | np.random.SeedSequence = 0,
) -> DeepSetsModel:
    """
    Draws every matrix and bias from U(-sqrt(1/fan_in), sqrt(1/fan_in)).
    :param token_dim: d
    :param equivariant_widths: channel widths of the equivariant layers
    :param head_widths: hidden widths of the dense head; a final 1-output
        identity layer is appended
    :param pool: sum or mean
    :param seed: seed of the initialization stream
    :return: DeepSetsModel
    """
    rng = np.random.default_rng(seed)

    def uniform(fan_in: int, shape) -> np.ndarray:
        limit = np.sqrt(1.0 / fan_in)
        return rng.uniform(-limit, limit, size=shape)

    equivariant = []
    width = token_dim
    for out in equivariant_widths:
        equivariant.append(
            EquivariantLayer(
                uniform(width, (width, out)),
                uniform(width, (width, out)),
                uniform(width, out),
            )
        )
        width = out

    head = []
    for out in head_widths:
        head.append(DenseLayer(uniform(width, (width, out)), uniform(width, out)))
        width = out
    head.append(
        DenseLayer(uniform(width, (width, 1)), uniform(width, 1), Activation.IDENTITY)
    )
    return DeepSetsModel(equivariant_layers=equivariant, head_layers=head, pool=pool)


def _as_batch(model: DeepSetsModel, X) -> tuple[np.ndarray, bool]:
    inputs = np.asarray(X, dtype=np.float64)
    single = inputs.ndim == 2
    batch = inputs[None] if single else inputs
    if batch.ndim != 3 or batch.shape[2] != model.token_dim:
        raise DimensionMismatchError(
            f"Expected tokens of dimension {model.token_dim}, got shape {inputs.shape}."
        )
    return batch, single


def _equivariant_pre(layer: EquivariantLayer, X: np.ndarray) -> np.ndarray:
    pooled = X.sum(axis=-2, keepdims=True)
    return X @ layer.lam + pooled @ layer.gamma + layer.bias


def equivariant_forward(layer: EquivariantLayer, X) -> np.ndarray:
    """
    ReLU(X Lambda + 1 (1^T X) Gamma + 1 b^T) for X of shape (n, c_in) or
    (B, n, c_in).
    """
    inputs = np.asarray(X, dtype=np.float64)
    if inputs.ndim not in (2, 3) or inputs.shape[-1] != layer.in_channels:
        raise DimensionMismatchError(
            f"Expected {layer.in_channels} channels, got shape {inputs.shape}."
        )
    return np.maximum(_equivariant_pre(layer, inputs), 0.0)


@dataclass
class ForwardCache:
    """
    Layer inputs and pre-activations kept for the backward pass.
    """

    equivariant: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    head: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    tokens: int = 0


def forward(model: DeepSetsModel, X) -> tuple[np.ndarray, ForwardCache]:
    """
    Batched forward pass; returns predictions of shape (B,) and the cache.
    """
    batch, _ = _as_batch(model, X)
    cache = ForwardCache(tokens=batch.shape[1])

    hidden = batch
    for layer in model.equivariant_layers:
        pre = _equivariant_pre(layer, hidden)
        cache.equivariant.append((hidden, pre))
        hidden = np.maximum(pre, 0.0)

    pooled = hidden.sum(axis=1)
    if model.pool == PoolKind.MEAN:
        pooled = pooled / cache.tokens

    for layer in model.head_layers:
        pre = pooled @ layer.weight + layer.bias
        cache.head.append((pooled, pre))
        pooled = np.maximum(pre, 0.0) if layer.activation == Activation.RELU else pre

    return pooled[:, 0], cache


def model_forward(model: DeepSetsModel, X) -> float | np.ndarray:
    """
    Prediction for one token set (n, d), or one per set for (B, n, d).
    """
    batch, single = _as_batch(model, X)
    outputs, _ = forward(model, batch)
    return float(outputs[0]) if single else outputs


def backward(model: DeepSetsModel, X, y) -> tuple[float, list[np.ndarray]]:
    """
    Loss mean(1/2 (f(X) - y)^2) over the batch and its exact gradient with
    respect to ``model.parameters()``, in the same order. The ReLU
    derivative at 0 is 0.
    """
    batch, _ = _as_batch(model, X)
    targets = np.asarray(y, dtype=np.float64).reshape(-1)
    if targets.shape[0] != batch.shape[0]:
        raise DimensionMismatchError(
            f"{batch.shape[0]} inputs but {targets.shape[0]} targets."
        )

    outputs, cache = forward(model, batch)
    residual = outputs - targets
    loss = 0.5 * float(np.mean(residual**2))
    upstream = (residual / batch.shape[0])[:, None]

    head_grads: list[np.ndarray] = []
    for layer, (inputs, pre) in zip(reversed(model.head_layers), reversed(cache.head)):
        if layer.activation == Activation.RELU:
            upstream = upstream * (pre > 0)
        head_grads = [inputs.T @ upstream, upstream.sum(axis=0)] + head_grads
        upstream = upstream @ layer.weight.T

    scale = 1.0 / cache.tokens if model.pool == PoolKind.MEAN else 1.0
    token_upstream = (upstream * scale)[:, None, :]

    equivariant_grads: list[np.ndarray] = []
    for layer, (inputs, pre) in zip(
        reversed(model.equivariant_layers), reversed(cache.equivariant)
    ):
        d_pre = token_upstream * (pre > 0)
        d_summed = d_pre.sum(axis=1)
        grad_lam = np.tensordot(inputs, d_pre, axes=([0, 1], [0, 1]))
        grad_gamma = inputs.sum(axis=1).T @ d_summed
        grad_bias = d_summed.sum(axis=0)
        equivariant_grads = [grad_lam, grad_gamma, grad_bias] + equivariant_grads
        token_upstream = d_pre @ layer.lam.T + (d_summed @ layer.gamma.T)[:, None, :]

    return loss, equivariant_grads + head_grads
