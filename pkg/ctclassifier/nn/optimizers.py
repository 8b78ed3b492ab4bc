"""
First-order optimizers (SGD and Adam) acting on ParamSets in place.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ctclassifier.errors import ConfigError, NumericalError
from ctclassifier.nn.params import GradientSet, ParamSet

OPTIMIZERS = ("sgd", "adam")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7

    def __post_init__(self):
        if self.kind not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got '{self.kind}'")
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError(f"betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")


@dataclass
class OptimizerState:
    step: int = 0
    m: Optional[ParamSet] = field(default=None, repr=False)
    v: Optional[ParamSet] = field(default=None, repr=False)


def optimizer_step(params: ParamSet, grads: GradientSet, state: OptimizerState,
                   config: OptimizerConfig):
    """
    Apply one update to every trainable parameter.

    Frozen layers are left untouched. The whole gradient set is checked for
    non-finite values before any parameter changes.

    Returns:
        Tuple of (params, state), both updated in place
    """
    params.check_congruent(grads)
    for index, name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for layer {index} {name}")

    state.step += 1
    if config.kind == "adam":
        if state.m is None:
            state.m = params.zeros_like()
            state.v = params.zeros_like()
        params.check_congruent(state.m, "optimizer moments")
        bias1 = 1 - config.beta1 ** state.step
        bias2 = 1 - config.beta2 ** state.step

    for index, name, p in params.items():
        if not params.is_trainable(index):
            continue
        g = grads[index][name]
        if config.kind == "sgd":
            p -= config.lr * g
            continue
        m = state.m[index][name]
        v = state.v[index][name]
        m *= config.beta1
        m += (1 - config.beta1) * g
        v *= config.beta2
        v += (1 - config.beta2) * np.square(g)
        m_hat = m / bias1
        v_hat = v / bias2
        p -= config.lr * m_hat / (np.sqrt(v_hat) + config.eps)

    return params, state
