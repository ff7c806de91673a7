"""Finite-difference verification of analytic gradients.

``grad_check`` treats the checked computation as a black box mapping arrays
to a scalar plus analytic gradients, and compares those gradients against
central differences coordinate by coordinate. Run it on float64 inputs;
float32 rounding drowns the difference quotient.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

REL_FLOOR = 1e-8


def grad_check(operation: Callable, inputs: Sequence[np.ndarray],
               step: float = 1e-5) -> float:
    """Return the max relative error between analytic and numeric gradients.

    ``operation(*inputs)`` must return ``(scalar_value, grads)`` where
    ``grads`` aligns with ``inputs`` (an entry may be None to skip that
    input). Inputs are perturbed one coordinate at a time with
    h = step*max(1, |x|); the relative error per coordinate is
    |g_a - g_n| / max(|g_a|, |g_n|, 1e-8).
    """
    inputs = [np.asarray(x, dtype=np.float64) for x in inputs]
    _, analytic = operation(*inputs)
    max_err = 0.0
    for idx, x in enumerate(inputs):
        if analytic[idx] is None:
            continue
        g_a = np.asarray(analytic[idx], dtype=np.float64)
        flat = x.reshape(-1)
        for coord in range(flat.size):
            orig = flat[coord]
            h = step * max(1.0, abs(orig))
            flat[coord] = orig + h
            f_plus, _ = operation(*inputs)
            flat[coord] = orig - h
            f_minus, _ = operation(*inputs)
            flat[coord] = orig
            g_n = (float(f_plus) - float(f_minus)) / (2 * h)
            g_a_coord = g_a.reshape(-1)[coord]
            denom = max(abs(g_a_coord), abs(g_n), REL_FLOOR)
            max_err = max(max_err, abs(g_a_coord - g_n) / denom)
    return max_err
