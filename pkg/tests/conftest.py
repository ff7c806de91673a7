"""Shared test utilities: scalar-projection gradient checks and probes."""
from __future__ import annotations

import numpy as np
import pytest

import seismonet.model
from seismonet.nn import Tape


def projection_check(build, arrays, proj_seed=99, step=1e-5):
    """Finite-difference check of an op through a fixed random projection.

    ``build(tape, *arrays)`` must return (inputs_to_check, output_tensor)
    where inputs_to_check is a sequence of SignalTensor/Parameter objects
    aligned with ``arrays`` (None entries are skipped). Returns the max
    relative error over all checked coordinates.
    """
    from seismonet.nn import grad_check

    def fn(*values):
        tape = Tape()
        tracked, out = build(tape, *values)
        proj = np.random.default_rng(proj_seed).normal(size=out.values.shape)
        scalar = float((proj * out.values).sum())
        out.grad[...] = proj
        tape.backward()
        return scalar, [t.grad if t is not None else None for t in tracked]

    return grad_check(fn, arrays, step=step)


class KinkProbe:
    """Record how close leaky-ReLU inputs come to the activation kink
    during a model forward pass (model-level gradient checks must run at
    points with a healthy margin)."""

    def __init__(self):
        self.min_margin = np.inf

    def __enter__(self):
        self._orig = seismonet.model.leaky_relu

        def wrapped(x, slope, tape=None):
            margin = float(np.abs(np.asarray(x.values)).min())
            self.min_margin = min(self.min_margin, margin)
            return self._orig(x, slope, tape)

        seismonet.model.leaky_relu = wrapped
        return self

    def __exit__(self, *exc):
        seismonet.model.leaky_relu = self._orig
        return False


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
