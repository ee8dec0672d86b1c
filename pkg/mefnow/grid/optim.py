import dataclasses

import numpy as np


@dataclasses.dataclass
class AdamState:
    """Moments and hyperparameters for one parameter array."""
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.002
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, param, **hyper):
        return cls(m=np.zeros_like(param, dtype=np.float64), v=np.zeros_like(param, dtype=np.float64), **hyper)


def adam_step(param, grad, state):
    """
    One bias-corrected Adam update.

    Pure function: neither ``param`` nor ``state`` is modified.

    Returns:
        tuple: Updated parameter array and updated ``AdamState``.

    """
    param = np.asarray(param)
    grad = np.asarray(grad)
    if param.shape != grad.shape or state.m.shape != param.shape:
        raise ValueError(
            'Adam shape mismatch: parameter ' + str(param.shape) + ', gradient ' + str(grad.shape) + ', moments '
            + str(state.m.shape)
        )
    if state.t < 0:
        raise ValueError('Adam step counter must be non-negative')

    t = state.t + 1
    g = grad.astype(np.float64)
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    update = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_param = (param.astype(np.float64) - update).astype(param.dtype)
    return new_param, dataclasses.replace(state, m=m, v=v, t=t)


class Adam:
    """
    Adam over a dictionary of named parameters.

    Args:
        lr (float): Learning rate. Default 0.002.
        beta1 (float): First-moment decay. Default 0.5.
        beta2 (float): Second-moment decay. Default 0.999.
        eps (float): Denominator offset. Default 1e-8.

    """

    def __init__(self, lr=0.002, beta1=0.5, beta2=0.999, eps=1e-8):
        self.hyper = dict(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        self.states = {}
        self.steps = 0

    def step(self, params, grads):
        """Update ``params`` (a name to array dictionary) in place using ``grads``."""
        for name in params:
            if name not in self.states:
                self.states[name] = AdamState.zeros_like(params[name], **self.hyper)
            params[name], self.states[name] = adam_step(params[name], grads[name], self.states[name])
        self.steps += 1
