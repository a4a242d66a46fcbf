"""Minimal Adam optimizer with named parameter slots.

Anchor-indexed slots can be remapped when the anchor set changes (grow adds
rows with zero moments, prune drops rows).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Adam:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-15
    state: dict = field(default_factory=dict)  # name -> (m, v)

    def step(self, name: str, param: np.ndarray, grad: np.ndarray, lr: float, t: int) -> None:
        """In-place update of ``param``; ``t`` is the 1-based step count."""
        if grad.shape != param.shape:
            raise ValueError(
                f"gradient shape {grad.shape} does not match parameter "
                f"{name} of shape {param.shape}"
            )
        if name not in self.state:
            self.state[name] = (np.zeros_like(param), np.zeros_like(param))
        m, v = self.state[name]
        m *= self.beta1
        m += (1 - self.beta1) * grad
        v *= self.beta2
        v += (1 - self.beta2) * grad**2
        m_hat = m / (1 - self.beta1**t)
        v_hat = v / (1 - self.beta2**t)
        param -= lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def remap_rows(self, name: str, rows: np.ndarray, n_total: int) -> None:
        """Rebuild a row-indexed slot: surviving rows keep their moments, new
        rows (beyond len(rows)) start at zero."""
        if name not in self.state:
            return
        m, v = self.state[name]
        shape = (n_total,) + m.shape[1:]
        new_m, new_v = np.zeros(shape), np.zeros(shape)
        new_m[: len(rows)] = m[rows]
        new_v[: len(rows)] = v[rows]
        self.state[name] = (new_m, new_v)


def exp_decay(lr_init: float, lr_final: float, t: int, t_max: int) -> float:
    """Exponential interpolation from lr_init to lr_final over t_max steps."""
    if t_max <= 1:
        return lr_final
    frac = min(max(t / t_max, 0.0), 1.0)
    return float(lr_init * (lr_final / lr_init) ** frac)
