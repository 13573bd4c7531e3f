"""
rk4.py
---------------------------
Fixed-step classical Runge-Kutta for y' = fn(t, y), integrating from t0 to t1
in either direction. The step count is ceil(|t1 - t0| / step), so a segment
is always covered by equal steps no longer than `step`.
"""
import logging
import math
from typing import Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)

# hard cap on steps per call
MAX_STEPS = 10_000_000


class StepUnderflowError(ArithmeticError):
    """Requested step is non-positive or too small for the interval."""


def step_count(t0: float, t1: float, step: float) -> int:
    if not step > 0 or not math.isfinite(step):
        raise StepUnderflowError(f"RK4 step must be positive and finite, got {step}")
    span = abs(t1 - t0)
    if span == 0.0:
        return 0
    n = max(1, math.ceil(span / step - 1e-9))
    if n > MAX_STEPS or step < 1e-14 * max(1.0, abs(t0), abs(t1)):
        raise StepUnderflowError(f"step {step} on [{t0}, {t1}] needs {n} steps")
    return n


def rk4(fn: Callable[[float, np.ndarray], np.ndarray], t0: float, t1: float, y0: np.ndarray,
        step: float, project: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> np.ndarray:
    """State at t1. `project` (if given) is applied after every step."""
    n = step_count(t0, t1, step)
    w = np.array(y0, dtype=float)
    if n == 0:
        return w
    h = (t1 - t0) / n
    t = t0
    for j in range(1, n + 1):
        K1 = h * fn(t, w)
        K2 = h * fn(t + h / 2, w + K1 / 2)
        K3 = h * fn(t + h / 2, w + K2 / 2)
        K4 = h * fn(t + h, w + K3)
        w = w + (K1 + 2 * K2 + 2 * K3 + K4) / 6
        if project is not None:
            w = project(w)
        t = t0 + j * h
    logger.debug(f"rk4: {n} steps of {h:.3g} on [{t0:g}, {t1:g}]")
    return w

