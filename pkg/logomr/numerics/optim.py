from dataclasses import dataclass, field

import numpy as np

from logomr.common import ContractError
from logomr.numerics.params import ParameterSet


DEFAULT_LR = 5e-5


@dataclass
class AdamState:
    lr: float = DEFAULT_LR
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: ParameterSet, lr: float = DEFAULT_LR, **hyper) -> "AdamState":
        return cls(lr=lr, m={n: np.zeros_like(p) for n, p in params.items()},
                   v={n: np.zeros_like(p) for n, p in params.items()}, **hyper)


def adam_step(params: ParameterSet, grads: dict[str, np.ndarray], state: AdamState) -> tuple[ParameterSet, AdamState]:
    """
    One bias-corrected Adam update. Inputs are left untouched; new parameter and state
    objects are returned. A zero gradient leaves its parameter bit-identical.
    """
    if state.t < 0:
        raise ContractError(f"adam state step must be >= 0, got {state.t}")
    if set(grads) != set(params):
        raise ContractError(f"gradient names {sorted(set(grads) ^ set(params))} do not match parameters")

    t = state.t + 1
    new_params = ParameterSet()
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, value in params.items():
        grad = grads[name]
        m = state.m.get(name, np.zeros_like(value))
        v = state.v.get(name, np.zeros_like(value))
        if grad.shape != value.shape or m.shape != value.shape or v.shape != value.shape:
            raise ContractError(f"adam_step: dims of '{name}' disagree: param {list(value.shape)}, "
                                f"grad {list(grad.shape)}, moments {list(m.shape)}/{list(v.shape)}")
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        new_params[name] = value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name] = m
        new_v[name] = v

    return new_params, AdamState(lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps,
                                 t=t, m=new_m, v=new_v)
