"""Quadrature weight vectors for fixed uniform node sets.

Weights are materialized explicitly (rather than calling an integrator)
because several callers need the weighted nodes themselves, e.g. to build
signed measures or to reuse one rule across many integrands.
"""
from __future__ import annotations

import numpy as np

from .errors import ParameterError


def trapezoid_weights(n_nodes: int, dx: float) -> np.ndarray:
    if n_nodes < 2:
        raise ParameterError(f"trapezoid rule needs >= 2 nodes, got {n_nodes}")
    w = np.full(n_nodes, dx)
    w[0] = w[-1] = dx / 2.0
    return w


def simpson_weights(n_nodes: int, dx: float) -> np.ndarray:
    """Composite Simpson weights; n_nodes must be odd (even interval count)."""
    if n_nodes < 3 or n_nodes % 2 == 0:
        raise ParameterError(f"Simpson rule needs an odd node count >= 3, got {n_nodes}")
    w = np.ones(n_nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * dx / 3.0


def uniform_nodes(lo: float, hi: float, n_nodes: int) -> tuple[np.ndarray, float]:
    if not hi > lo:
        raise ParameterError(f"empty interval [{lo}, {hi}]")
    x = np.linspace(lo, hi, n_nodes)
    return x, x[1] - x[0]
