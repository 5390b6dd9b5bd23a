"""Module that contains the Adam optimizer."""

from dataclasses import dataclass

import numpy as np

from common.constants import (
    adam_beta1,
    adam_beta2,
    adam_epsilon,
    adam_learning_rate,
)
from common.exceptions import DimensionMismatchError


@dataclass(frozen=True)
class AdamState:
    """
    Moment estimates per parameter array and the number of steps taken.
    """

    first_moment: tuple[np.ndarray, ...]
    second_moment: tuple[np.ndarray, ...]
    step: int = 0
    learning_rate: float = adam_learning_rate
    beta1: float = adam_beta1
    beta2: float = adam_beta2
    epsilon: float = adam_epsilon

    @classmethod
    def for_parameters(
        cls, params: list[np.ndarray], learning_rate: float = adam_learning_rate
    ) -> "AdamState":
        """Zero moments shaped like params."""
        zeros = tuple(np.zeros_like(p) for p in params)
        return cls(
            first_moment=zeros,
            second_moment=tuple(z.copy() for z in zeros),
            learning_rate=learning_rate,
        )


def adam_step(
    state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]
) -> tuple[list[np.ndarray], AdamState]:
    """
    One bias-corrected Adam update. Inputs are left untouched.
    :param state: current state
    :param params: parameter arrays
    :param grads: gradients, same shapes as params
    :return: updated parameters and state
    """
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise DimensionMismatchError(
            "Parameters, gradients and moments differ in count."
        )

    step = state.step + 1
    first_correction = 1.0 - state.beta1**step
    second_correction = 1.0 - state.beta2**step

    updated, firsts, seconds = [], [], []
    for param, grad, first, second in zip(
        params, grads, state.first_moment, state.second_moment
    ):
        if param.shape != grad.shape or param.shape != first.shape:
            raise DimensionMismatchError(
                f"Gradient of shape {grad.shape} for parameter of shape {param.shape}."
            )
        first = state.beta1 * first + (1.0 - state.beta1) * grad
        second = state.beta2 * second + (1.0 - state.beta2) * grad * grad
        first_hat = first / first_correction
        second_hat = second / second_correction
        step_size = state.learning_rate * first_hat
        updated.append(param - step_size / (np.sqrt(second_hat) + state.epsilon))
        firsts.append(first)
        seconds.append(second)

    return updated, AdamState(
        first_moment=tuple(firsts),
        second_moment=tuple(seconds),
        step=step,
        learning_rate=state.learning_rate,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
    )
