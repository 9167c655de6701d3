"""Classical fixed-step fourth-order Runge-Kutta."""
from __future__ import annotations
from typing import Callable

import numpy as np

from .exceptions import DivergenceError

Rhs = Callable[[float, np.ndarray], np.ndarray]


def rk4_step(fn: Rhs, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = fn(t, y)
    k2 = fn(t + h / 2, y + h / 2 * k1)
    k3 = fn(t + h / 2, y + h / 2 * k2)
    k4 = fn(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_integrate(fn: Rhs, y0: np.ndarray, n_steps: int, h: float, t0: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Integrate ``n_steps`` steps of size ``h``; returns (t, states) with the start included.

    Raises DivergenceError with the index of the first non-finite step.
    """
    y = np.array(y0, copy=True)
    states = np.empty((n_steps + 1,) + y.shape, dtype=y.dtype)
    states[0] = y
    t = t0
    with np.errstate(over='ignore', invalid='ignore'):
        for step in range(1, n_steps + 1):
            y = rk4_step(fn, t, y, h)
            if not np.all(np.isfinite(y)):
                raise DivergenceError(f'state became non-finite at step {step} (t={t + h:.6g})', step)
            states[step] = y
            t = t0 + step * h
    times = t0 + h * np.arange(n_steps + 1)
    return times, states
