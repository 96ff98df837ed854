"""Scalar smooth functions carrying their own derivative families.

Higher levels of a controlled path need eta, eta', eta'', ... evaluated
along a flow, so a plain callable is not enough.  Each factory below
returns a SmoothFunction whose derivatives are exact closed forms
(trigonometric shifts, polynomial recursions for tanh / gaussian / bump)
rather than finite differences.
"""
from __future__ import annotations

from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import CapabilityError, ParameterError


class SmoothFunction:
    """A function R -> R with derivatives available up to max_order.

    :param name: short label used in reports and test output.
    :param evaluator: evaluator(x, k) returning the k-th derivative at x.
    :param max_order: highest derivative order supported (None = any).
    """

    def __init__(self, name: str, evaluator: Callable[[np.ndarray, int], np.ndarray],
                 max_order: int | None = None):
        self.name = name
        self._evaluator = evaluator
        self.max_order = max_order

    def __call__(self, x, order: int = 0):
        if order < 0:
            raise ParameterError(f"derivative order must be >= 0, got {order}")
        if self.max_order is not None and order > self.max_order:
            raise CapabilityError(
                f"{self.name} supports derivatives up to order {self.max_order}, got {order}")
        x = np.asarray(x, dtype=float)
        return self._evaluator(x, order)

    def __repr__(self) -> str:
        return f"SmoothFunction({self.name!r})"


def constant(value: float, name: str | None = None) -> SmoothFunction:
    def ev(x, k):
        return np.full_like(x, value) if k == 0 else np.zeros_like(x)
    return SmoothFunction(name or f"const({value})", ev)


def identity() -> SmoothFunction:
    def ev(x, k):
        if k == 0:
            return x.copy()
        if k == 1:
            return np.ones_like(x)
        return np.zeros_like(x)
    return SmoothFunction("identity", ev)


def polynomial(coeffs, name: str | None = None) -> SmoothFunction:
    """Polynomial with coefficients lowest order first."""
    coeffs = np.asarray(coeffs, dtype=float)

    def ev(x, k):
        c = coeffs
        for _ in range(k):
            c = P.polyder(c)
            if c.size == 0:
                return np.zeros_like(x)
        return P.polyval(x, c)

    return SmoothFunction(name or "polynomial", ev)


def sine(amplitude: float = 1.0, frequency: float = 1.0, phase: float = 0.0,
         name: str | None = None) -> SmoothFunction:
    """amplitude * sin(frequency * x + phase); derivatives by phase shift."""
    def ev(x, k):
        return amplitude * frequency**k * np.sin(frequency * x + phase + k * np.pi / 2.0)
    return SmoothFunction(name or "sine", ev)


def cosine(amplitude: float = 1.0, frequency: float = 1.0, name: str | None = None) -> SmoothFunction:
    return sine(amplitude, frequency, phase=np.pi / 2.0, name=name or "cosine")


def tanh_fn(scale: float = 1.0, name: str | None = None) -> SmoothFunction:
    """tanh(scale*x).  d/dx Q(T) = scale*(1-T^2)*Q'(T) keeps every
    derivative a polynomial in T = tanh(scale*x)."""
    cache = {0: np.array([0.0, 1.0])}

    def coeffs(k: int) -> np.ndarray:
        while k not in cache:
            m = max(cache)
            cache[m + 1] = scale * P.polymul(P.polyder(cache[m]), np.array([1.0, 0.0, -1.0]))
        return cache[k]

    def ev(x, k):
        return P.polyval(np.tanh(scale * x), coeffs(k))

    return SmoothFunction(name or "tanh", ev)


def gaussian(center: float = 0.0, width: float = 1.0, amplitude: float = 1.0,
             name: str | None = None) -> SmoothFunction:
    """amplitude * exp(-(x-center)^2 / (2 width^2)).

    g^(k) = Q_k(x) g with Q_{k+1} = Q_k' - ((x-center)/width^2) Q_k.
    """
    if width <= 0.0:
        raise ParameterError(f"width must be positive, got {width}")
    w2 = width * width
    lin = np.array([center / w2, -1.0 / w2])  # -(x-center)/width^2
    cache = {0: np.array([1.0])}

    def coeffs(k: int) -> np.ndarray:
        while k not in cache:
            m = max(cache)
            cache[m + 1] = P.polyadd(P.polyder(cache[m]), P.polymul(lin, cache[m]))
        return cache[k]

    def ev(x, k):
        g = amplitude * np.exp(-((x - center) ** 2) / (2.0 * w2))
        return P.polyval(x, coeffs(k)) * g

    return SmoothFunction(name or "gaussian", ev)


def bump(center: float = 0.0, radius: float = 1.0, amplitude: float = 1.0,
         name: str | None = None) -> SmoothFunction:
    """Compactly supported bump amplitude * exp(-1/(1-u^2)), u = (x-center)/radius.

    Derivatives are P_k(u) (1-u^2)^(-2k) B(u) with the polynomial recursion
    P_{k+1} = P_k' (1-u^2)^2 + 4k u P_k (1-u^2) - 2u P_k.  Values within
    1e-6 of the support edge are clamped to zero: the true derivative there
    is below double-precision underflow anyway.
    """
    if radius <= 0.0:
        raise ParameterError(f"radius must be positive, got {radius}")
    one_minus_u2 = np.array([1.0, 0.0, -1.0])
    cache = {0: np.array([1.0])}

    def coeffs(k: int) -> np.ndarray:
        while k not in cache:
            m = max(cache)
            pk = cache[m]
            term = P.polymul(P.polyder(pk), P.polymul(one_minus_u2, one_minus_u2))
            term = P.polyadd(term, 4.0 * m * P.polymul(np.array([0.0, 1.0]), P.polymul(pk, one_minus_u2)))
            term = P.polyadd(term, -2.0 * P.polymul(np.array([0.0, 1.0]), pk))
            cache[m + 1] = term
        return cache[k]

    def ev(x, k):
        u = (x - center) / radius
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0 - 1e-6
        if np.any(inside):
            ui = u[inside]
            d = 1.0 - ui * ui
            vals = P.polyval(ui, coeffs(k)) * np.exp(-1.0 / d) / d ** (2 * k)
            out[inside] = vals * amplitude / radius**k
        return out

    return SmoothFunction(name or "bump", ev)


def product(f: SmoothFunction, g: SmoothFunction, name: str | None = None) -> SmoothFunction:
    """Pointwise product; derivatives by the Leibniz rule."""
    from math import comb

    def ev(x, k):
        out = np.zeros_like(x)
        for j in range(k + 1):
            out += comb(k, j) * f(x, j) * g(x, k - j)
        return out

    max_order = None
    if f.max_order is not None or g.max_order is not None:
        candidates = [m for m in (f.max_order, g.max_order) if m is not None]
        max_order = min(candidates)
    return SmoothFunction(name or f"{f.name}*{g.name}", ev, max_order)


def sine_windowed_bump(center: float = 0.0, radius: float = 1.0, frequency: float = 6.0,
                       name: str | None = None) -> SmoothFunction:
    """Oscillatory test function: sin(frequency*(x-center)) times a bump window."""
    return product(sine(frequency=frequency, phase=-frequency * center),
                   bump(center, radius),
                   name=name or "sine_windowed_bump")
