"""Named parameter storage and the Adam + EMA update."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ParamStore:
    """Named float64 arrays with one gradient slot per array."""

    values: dict[str, np.ndarray]
    grads: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.values = {k: np.asarray(v, dtype=np.float64) for k, v in self.values.items()}
        if not self.grads:
            self.grads = {k: np.zeros_like(v) for k, v in self.values.items()}
        for name, g in self.grads.items():
            if g.shape != self.values[name].shape:
                raise ValueError(f"gradient shape mismatch for {name!r}")

    def names(self) -> list[str]:
        return sorted(self.values)

    def copy_values(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.values.items()}

    def check_finite(self) -> None:
        for name, v in self.values.items():
            if not np.all(np.isfinite(v)):
                raise FloatingPointError(f"parameter {name!r} has non-finite entries")


@dataclass
class AdamState:
    """Adam moments plus an exponential-moving-average shadow of the parameters."""

    lr: float
    ema_decay: float = 0.999
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    ema: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError("ema_decay must lie in [0, 1)")


def init_adam(params: ParamStore, lr: float, ema_decay: float = 0.999) -> AdamState:
    state = AdamState(lr=lr, ema_decay=ema_decay)
    for name, val in params.values.items():
        state.m[name] = np.zeros_like(val)
        state.v[name] = np.zeros_like(val)
        state.ema[name] = val.copy()
    return state


def grad_step(params: ParamStore, grads: dict[str, np.ndarray], state: AdamState) -> ParamStore:
    """One Adam update from the given gradients, then an EMA shadow update."""
    state.step += 1
    b1c = 1.0 - state.beta1**state.step
    b2c = 1.0 - state.beta2**state.step
    for name in params.values:
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(params.values[name])
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        m = state.m[name]
        v = state.v[name]
        m += (1.0 - state.beta1) * (g - m)
        v += (1.0 - state.beta2) * (g * g - v)
        params.values[name] -= state.lr * (m / b1c) / (np.sqrt(v / b2c) + state.eps)
        ema = state.ema[name]
        ema += (1.0 - state.ema_decay) * (params.values[name] - ema)
    return params
