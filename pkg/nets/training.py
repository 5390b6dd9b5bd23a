"""Module that contains the mini-batch training loop."""

from dataclasses import dataclass

import numpy as np

from common.constants import adam_learning_rate, evaluation_chunk
from common.exceptions import DimensionMismatchError, InvalidParameterError
from logger.logger import logger
from nets.adam import AdamState, adam_step
from nets.deepsets import DeepSetsModel, backward, forward


@dataclass(frozen=True)
class Dataset:
    """
    Token sets of shape (m, n, d) with one real target each.
    """

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if self.inputs.ndim != 3 or self.targets.shape != (self.inputs.shape[0],):
            raise DimensionMismatchError(
                f"Inputs {self.inputs.shape} and targets {self.targets.shape} "
                "do not match."
            )

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def samples(self) -> list[tuple[np.ndarray, float]]:
        """(X, y) pairs."""
        return [(x, float(y)) for x, y in zip(self.inputs, self.targets)]


@dataclass
class TrainingResult:
    """
    Trained model, mean squared error after every epoch and before the first.
    """

    model: DeepSetsModel
    history: list[float]
    initial_mse: float


def predict(model: DeepSetsModel, dataset: Dataset) -> np.ndarray:
    """
    Predictions for the whole dataset in fixed-size chunks, in order.
    """
    outputs = [
        forward(model, dataset.inputs[start : start + evaluation_chunk])[0]
        for start in range(0, len(dataset), evaluation_chunk)
    ]
    return np.concatenate(outputs)


def mean_squared_error(model: DeepSetsModel, dataset: Dataset) -> float:
    """mean (f(X) - y)^2 over the dataset."""
    return float(np.mean((predict(model, dataset) - dataset.targets) ** 2))


def train(
    model: DeepSetsModel,
    dataset: Dataset,
    epochs: int,
    batch_size: int,
    seed: int | np.random.SeedSequence,
    learning_rate: float = adam_learning_rate,
) -> TrainingResult:
    """
    Shuffled mini-batch training with Adam. The input model is not modified.
    :param model: initial model
    :param dataset: training data
    :param epochs: passes over the data
    :param batch_size: samples per step; the last batch of an epoch may be smaller
    :param seed: seed of the shuffling stream
    :param learning_rate: Adam step size
    :return: TrainingResult
    """
    if len(dataset) == 0:
        raise InvalidParameterError("Cannot train on an empty dataset.")
    if not 1 <= batch_size <= len(dataset) or epochs < 0:
        raise InvalidParameterError(
            f"Need 1 <= batch_size <= {len(dataset)} and epochs >= 0."
        )

    rng = np.random.default_rng(seed)
    current = model.with_parameters(model.parameters())
    state = AdamState.for_parameters(current.parameters(), learning_rate=learning_rate)
    initial = mean_squared_error(current, dataset)
    history = []

    for epoch in range(epochs):
        order = rng.permutation(len(dataset))
        for start in range(0, len(dataset), batch_size):
            batch = order[start : start + batch_size]
            _, grads = backward(current, dataset.inputs[batch], dataset.targets[batch])
            params, state = adam_step(state, current.parameters(), grads)
            current = current.with_parameters(params)
        history.append(mean_squared_error(current, dataset))
        if (epoch + 1) % 100 == 0:
            logger.debug("Epoch %s: train MSE %s.", epoch + 1, history[-1])

    return TrainingResult(model=current, history=history, initial_mse=initial)
