"""Parameter update rules: plain SGD and Adam (Kingma & Ba, Algorithm 1).

Both rules are pure: they return new parameter (and state) objects and
leave their inputs untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .nn import GradientSet, Layer, MlpParams


@dataclass(frozen=True)
class AdamConfig:
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0 <= value < 1:
                raise ConfigError(f"{name} must lie in [0, 1), got {value}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def fresh(cls, params: MlpParams) -> "AdamState":
        return cls([np.zeros_like(a) for a in params.arrays()],
                   [np.zeros_like(a) for a in params.arrays()], 0)

    def copy(self) -> "AdamState":
        return AdamState([a.copy() for a in self.m], [a.copy() for a in self.v], self.t)


def _rebuild(params: MlpParams, flat: list[np.ndarray]) -> MlpParams:
    return MlpParams([Layer(flat[2 * k], flat[2 * k + 1], layer.spec) for k, layer in enumerate(params.layers)])


def sgd_step(params: MlpParams, grads: GradientSet, learning_rate: float) -> MlpParams:
    if not learning_rate > 0:
        raise ConfigError(f"learning_rate must be > 0, got {learning_rate}")
    grads.check_matches(params)
    return _rebuild(params, [p - learning_rate * g for p, g in zip(params.arrays(), grads.arrays())])


def adam_step(state: AdamState, config: AdamConfig, params: MlpParams,
              grads: GradientSet) -> tuple[MlpParams, AdamState]:
    grads.check_matches(params)
    if len(state.m) != 2 * len(params.layers):
        raise ConfigError("Adam state does not match the parameter layout")
    t = state.t + 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        new_p.append(p - config.alpha * m_hat / (np.sqrt(v_hat) + config.epsilon))
        new_m.append(m)
        new_v.append(v)
    return _rebuild(params, new_p), AdamState(new_m, new_v, t)
