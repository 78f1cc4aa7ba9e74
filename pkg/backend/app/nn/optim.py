"""Adam with decoupled weight decay.

    m_t = b1 * m_{t-1} + (1 - b1) * g_t
    v_t = b2 * v_{t-1} + (1 - b2) * g_t^2
    p  <- p - lr * m_hat / (sqrt(v_hat) + eps)
    p  <- p - lr * wd * p
"""

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from app.exceptions import OptimizerError
from app.nn.tensor import Tensor
from app.utils.logging_config import get_logger

logger = get_logger("nn")


@dataclass
class AdamState:
    learning_rate: float = 0.01
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.learning_rate > 0.0:
            raise OptimizerError(f"Invalid learning rate: {self.learning_rate}")
        if not 0.0 < self.beta1 < 1.0:
            raise OptimizerError(f"Invalid beta1: {self.beta1}")
        if not 0.0 < self.beta2 < 1.0:
            raise OptimizerError(f"Invalid beta2: {self.beta2}")
        if not self.epsilon > 0.0:
            raise OptimizerError(f"Invalid epsilon: {self.epsilon}")
        if not self.weight_decay >= 0.0:
            raise OptimizerError(f"Invalid weight decay: {self.weight_decay}")


def adam_step(params: Sequence[Tensor], state: AdamState) -> None:
    """One Adam update over ``params``; gradients are cleared afterwards."""
    missing = [i for i, p in enumerate(params) if p.grad is None]
    if missing:
        raise OptimizerError(f"{len(missing)} parameter(s) have no gradient (first index {missing[0]})")
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    if len(state.m) != len(params):
        raise OptimizerError(f"optimizer state tracks {len(state.m)} parameters, got {len(params)}")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
        if state.weight_decay:
            p.data -= state.learning_rate * state.weight_decay * p.data
        p.grad = None


class Adam:
    """Optimizer object binding a parameter list to its AdamState."""

    def __init__(
        self,
        params: Iterable[Tensor],
        lr: float = 0.01,
        weight_decay: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.state = AdamState(
            learning_rate=lr, weight_decay=weight_decay, beta1=beta1, beta2=beta2, epsilon=eps
        )
        logger.debug(
            f"Initialized Adam: lr={lr}, weight_decay={weight_decay}, "
            f"{len(self.params)} parameter tensors"
        )

    def step(self) -> None:
        adam_step(self.params, self.state)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
