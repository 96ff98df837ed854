"""Uniform time grids on [0, T].

Every multi-time object in the package (paths, two-parameter arrays,
rough-path levels) lives on one of these grids, and all pairwise time
differences are integer multiples of the step, which lets Hoelder-type
norms be evaluated lag by lag instead of pair by pair.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError, ParameterError


class TimeGrid:
    """Uniform grid 0 = t_0 < t_1 < ... < t_N = T with t_i = i*T/N."""

    def __init__(self, horizon: float, n_steps: int):
        if not horizon > 0.0:
            raise ParameterError(f"horizon must be positive, got {horizon}")
        if n_steps < 2:
            raise ParameterError(f"need at least 2 steps, got {n_steps}")
        self.horizon = float(horizon)
        self.n_steps = int(n_steps)
        self.dt = self.horizon / self.n_steps
        self.points = np.linspace(0.0, self.horizon, self.n_steps + 1)

    @property
    def n_points(self) -> int:
        return self.n_steps + 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return self.n_steps == other.n_steps and self.horizon == other.horizon

    def __hash__(self):
        return hash((self.horizon, self.n_steps))

    def __repr__(self) -> str:
        return f"TimeGrid(horizon={self.horizon}, n_steps={self.n_steps})"

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Grid index of a time that must lie on the grid (within tol)."""
        i = int(round(t / self.dt))
        if i < 0 or i > self.n_steps or abs(i * self.dt - t) > tol * max(1.0, self.horizon):
            raise ParameterError(f"t={t} is not a grid point of {self!r}")
        return i

    def coarsen(self, factor: int) -> "TimeGrid":
        """Grid with every factor-th point; factor must divide n_steps."""
        if factor < 1 or self.n_steps % factor != 0:
            raise ParameterError(f"factor {factor} does not divide n_steps {self.n_steps}")
        return TimeGrid(self.horizon, self.n_steps // factor)


def check_same_grid(a: TimeGrid, b: TimeGrid) -> None:
    if a != b:
        raise DimensionError(f"grids differ: {a!r} vs {b!r}")


def lag_maxima(values: np.ndarray, lags: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-lag maxima of |F[i, i+L]| for a two-parameter array F.

    :param values: square array indexed by grid-point pairs; only the
        upper triangle (i < j) is read.
    :param lags: integer lags to evaluate; defaults to all 1..N.
    :return: (lags, maxima) with maxima[k] = max_i |F[i, i+lags[k]]|.
    """
    n = values.shape[0] - 1
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise DimensionError(f"expected square two-parameter array, got shape {values.shape}")
    if lags is None:
        lags = np.arange(1, n + 1)
    lags = np.asarray(lags, dtype=int)
    if lags.size == 0 or lags.min() < 1 or lags.max() > n:
        raise ParameterError(f"lags must lie in [1, {n}]")
    maxima = np.empty(lags.size)
    for k, lag in enumerate(lags):
        maxima[k] = np.abs(np.diagonal(values, offset=lag)).max()
    return lags, maxima


def path_increment_maxima(path: np.ndarray, lags: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-lag maxima of |y[i+L] - y[i]| for a one-parameter path."""
    y = np.asarray(path, dtype=float)
    n = y.shape[0] - 1
    if lags is None:
        lags = np.arange(1, n + 1)
    lags = np.asarray(lags, dtype=int)
    if lags.size == 0 or lags.min() < 1 or lags.max() > n:
        raise ParameterError(f"lags must lie in [1, {n}]")
    maxima = np.empty(lags.size)
    for k, lag in enumerate(lags):
        maxima[k] = np.abs(y[lag:] - y[:-lag]).max()
    return lags, maxima


def holder_norm_from_maxima(lags: np.ndarray, maxima: np.ndarray, dt: float, alpha: float) -> float:
    """sup over represented lags of max|increment| / (lag*dt)**alpha."""
    h = lags * dt
    return float(np.max(maxima / h**alpha))


def dyadic_lags(n_steps: int, min_lag: int = 1) -> np.ndarray:
    """Lags min_lag, 2*min_lag, 4*min_lag, ... up to n_steps."""
    lags = []
    lag = min_lag
    while lag <= n_steps:
        lags.append(lag)
        lag *= 2
    return np.asarray(lags, dtype=int)


def loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log y against log x (scaling-rate fits)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 2:
        raise ParameterError("need at least two points for a slope fit")
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise ParameterError("log-log fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    lx = lx - lx.mean()
    return float(np.dot(lx, ly - ly.mean()) / np.dot(lx, lx))
