"""Weight initialization."""
from __future__ import annotations

import math

import numpy as np

from ..errors import ValidationError


def xavier_uniform_init(shape: tuple[int, ...], fan_in: int, fan_out: int,
                        seed) -> np.ndarray:
    """Sample i.i.d. uniform weights on [-a, a] with a = sqrt(6/(fan_in+fan_out)).

    ``seed`` may be an int or a ``numpy.random.Generator``; passing a
    generator lets a model draw all of its parameters from one stream in
    registration order. For convolution weights, fan_in = in_ch*kernel and
    fan_out = out_ch*kernel.
    """
    if fan_in < 1 or fan_out < 1:
        raise ValidationError(f"fans must be positive, got {fan_in}, {fan_out}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)
