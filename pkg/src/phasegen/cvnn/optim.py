"""Complex MSE loss and Adam with per-epoch exponential learning-rate decay."""

from dataclasses import dataclass, field

import numpy as np


def loss_mse_complex(eps, eps_hat):
    """Mean squared modulus of the complex difference, accumulated in float64."""
    eps, eps_hat = np.asarray(eps), np.asarray(eps_hat)
    if eps.shape != eps_hat.shape:
        raise ValueError(f"shape mismatch: eps {eps.shape} vs eps_hat {eps_hat.shape}")
    d = eps_hat.astype(np.complex128) - eps.astype(np.complex128)
    return float(np.mean(d.real ** 2 + d.imag ** 2))


def loss_mse_complex_grad(eps, eps_hat):
    """Split-real gradient of :func:`loss_mse_complex` with respect to ``eps_hat``."""
    eps_hat = np.asarray(eps_hat)
    return (2.0 / eps_hat.size) * (eps_hat - np.asarray(eps))


@dataclass
class OptimizerState:
    lr: float = 1e-4
    gamma: float = 0.995
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    step: int = 0
    epoch: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")

    def end_epoch(self):
        """Apply one exponential decay of the learning rate."""
        self.epoch += 1
        self.lr *= self.gamma


def _real_view(p):
    return p.view(p.real.dtype) if np.iscomplexobj(p) else p


def adam_step(params, grads, state, names=None):
    """In-place Adam update with bias correction; complex entries update as two reals."""
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} parameters but {len(grads)} gradients")
    for i, g in enumerate(grads):
        if not np.isfinite(g).all():
            label = names[i] if names else f"#{i}"
            raise FloatingPointError(f"non-finite gradient for parameter {label} at step {state.step}")
    if not state.m:
        state.m = [np.zeros(_real_view(p).shape, dtype=np.float64) for p in params]
        state.v = [np.zeros(_real_view(p).shape, dtype=np.float64) for p in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.step
    corr2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        gr = _real_view(np.ascontiguousarray(g, dtype=p.dtype))
        m *= b1
        m += (1 - b1) * gr
        v *= b2
        v += (1 - b2) * gr * gr
        pr = _real_view(p)
        pr -= (state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)).astype(pr.dtype)
    return params, state
