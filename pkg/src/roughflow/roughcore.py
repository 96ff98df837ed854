"""Scalar rough-path core: truncated tensors, lifts, norms, sewing.

Level-n increments of a path on a TimeGrid are stored as dense
(N+1) x (N+1) arrays with only the upper triangle (i < j) meaningful;
the level-0 component is the constant 1 and is kept implicit.  On a
uniform grid every Hoelder-type supremum is evaluated lag by lag, so no
weight matrix is ever materialized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InputError, ParameterError
from .grid import TimeGrid, check_same_grid, dyadic_lags, holder_norm_from_maxima, lag_maxima

MAX_DEGREE = 6


def degree_from_exponent(gamma: float) -> int:
    """p = floor(1/gamma), guarded against floating-point floor slips."""
    if not 0.0 < gamma < 0.5:
        raise ParameterError(f"exponent gamma must lie in (0, 1/2), got {gamma}")
    p = int(math.floor(1.0 / gamma + 1e-9))
    if p > MAX_DEGREE:
        raise ParameterError(
            f"gamma={gamma} needs degree {p}; degrees above {MAX_DEGREE} are not supported")
    return p


class TruncTensor:
    """Element of the scalar truncated tensor algebra up to degree p.

    levels[n] is the degree-n component; levels[0] must equal 1.
    """

    def __init__(self, levels):
        levels = np.asarray(levels, dtype=float)
        if levels.ndim != 1 or levels.size < 2:
            raise InputError(f"need levels (a0, ..., ap) with p >= 1, got shape {levels.shape}")
        if levels[0] != 1.0:
            raise InputError(f"level-0 component must be 1, got {levels[0]}")
        self.levels = levels

    @property
    def degree(self) -> int:
        return self.levels.size - 1

    @classmethod
    def exp_lift(cls, x: float, degree: int) -> "TruncTensor":
        """(1, x, x^2/2!, ..., x^p/p!), the lift of a scalar increment."""
        if degree < 1:
            raise ParameterError(f"degree must be >= 1, got {degree}")
        n = np.arange(degree + 1)
        return cls(np.power(float(x), n) / np.array([math.factorial(k) for k in n]))

    def __eq__(self, other):
        if not isinstance(other, TruncTensor):
            return NotImplemented
        return self.degree == other.degree and np.array_equal(self.levels, other.levels)

    def __repr__(self):
        return f"TruncTensor({np.array2string(self.levels, precision=6)})"


def tensor_product(a: TruncTensor, b: TruncTensor) -> TruncTensor:
    """Truncated product: c_n = sum_{k<=n} a_{n-k} b_k, terms above p dropped."""
    if a.degree != b.degree:
        raise DimensionError(f"degrees differ: {a.degree} vs {b.degree}")
    p = a.degree
    out = np.convolve(a.levels, b.levels)[: p + 1]
    return TruncTensor(out)


class RoughPath:
    """A gamma-rough path: levels X^(1..p) over grid pairs, p = floor(1/gamma)."""

    def __init__(self, grid: TimeGrid, gamma: float, levels: list[np.ndarray]):
        p = degree_from_exponent(gamma)
        if len(levels) != p:
            raise InputError(f"gamma={gamma} requires {p} levels, got {len(levels)}")
        npts = grid.n_points
        for n, lev in enumerate(levels, start=1):
            if lev.shape != (npts, npts):
                raise DimensionError(
                    f"level {n} has shape {lev.shape}, expected {(npts, npts)}")
        self.grid = grid
        self.gamma = float(gamma)
        self.degree = p
        self.levels = levels

    def level(self, n: int) -> np.ndarray:
        """Level-n increment array, 1 <= n <= p."""
        if not 1 <= n <= self.degree:
            raise ParameterError(f"level must lie in [1, {self.degree}], got {n}")
        return self.levels[n - 1]

    @property
    def base(self) -> np.ndarray:
        return self.levels[0]

    def base_path(self) -> np.ndarray:
        """Path values (anchored at 0) whose increments form level 1."""
        out = np.zeros(self.grid.n_points)
        out[1:] = self.levels[0][0, 1:]
        return out

    def holder_norms(self) -> list[float]:
        """[||X^(n)||_{n*gamma} for n = 1..p]."""
        return [holder_norm(self.levels[n - 1], self.grid, n * self.gamma)
                for n in range(1, self.degree + 1)]


def geometric_lift(values: np.ndarray, grid: TimeGrid, gamma: float) -> RoughPath:
    """Canonical lift X^(n)_st = (X_t - X_s)^n / n! of a sampled path."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_points,):
        raise DimensionError(f"path has shape {values.shape}, expected ({grid.n_points},)")
    p = degree_from_exponent(gamma)
    inc = np.triu(values[None, :] - values[:, None], k=1)
    levels = [inc]
    for n in range(2, p + 1):
        levels.append(levels[-1] * inc / n)
    return RoughPath(grid, gamma, levels)


_chen_kernel = None


def _compiled_chen_kernel():
    """Numba triple-scan if numba is importable, else None (numpy path)."""
    global _chen_kernel
    if _chen_kernel is None:
        try:
            import numba
        except ImportError:
            _chen_kernel = False
            return None
        # workqueue is always available; probing TBB emits a warning on old TBBs
        numba.config.THREADING_LAYER = "workqueue"

        @numba.njit(cache=True, parallel=True)
        def kernel(stacked, scales):
            p, npts, _ = stacked.shape
            per_k = np.zeros(npts)
            for k in numba.prange(1, npts - 1):
                local = 0.0
                for n in range(1, p + 1):
                    for i in range(k):
                        for j in range(k + 1, npts):
                            s = stacked[n - 1, i, k] + stacked[n - 1, k, j]
                            for m in range(1, n):
                                s += stacked[n - m - 1, i, k] * stacked[m - 1, k, j]
                            d = abs(stacked[n - 1, i, j] - s) / scales[n - 1]
                            if d > local:
                                local = d
                per_k[k] = local
            return per_k.max()

        _chen_kernel = kernel
    return _chen_kernel or None


def chen_defect(x: RoughPath) -> float:
    """Worst Chen-relation violation over all grid triples i < k < j.

    For each level n the defect X^(n)_ij - sum_m X^(n-m)_ik X^(m)_kj is
    maximized over triples and divided by max(1, max|X^(n)|), so the
    returned value is comparable against a relative tolerance.
    """
    npts = x.grid.n_points
    p = x.degree
    stacked = np.stack(x.levels)
    scales = np.array([max(1.0, np.abs(l).max()) for l in x.levels])
    kernel = _compiled_chen_kernel()
    if kernel is not None:
        return float(kernel(stacked, scales))
    # cbuf[m] holds X^(m)_{., k} with the implicit level-0 row of ones at m=0,
    # so the Chen sum at level n is one (n+1)-rank product cbuf[n::-1].T @ rbuf[:n+1].
    cbuf = np.ones((p + 1, npts))
    rbuf = np.ones((p + 1, npts))
    worst = 0.0
    for k in range(1, npts - 1):
        cbuf[1:, :k] = stacked[:, :k, k]
        rbuf[1:, : npts - k - 1] = stacked[:, k, k + 1:]
        c = cbuf[:, :k]
        r = rbuf[:, : npts - k - 1]
        for n in range(1, p + 1):
            d = stacked[n - 1, :k, k + 1:] - c[n::-1].T @ r[: n + 1]
            level_worst = np.max(np.abs(d, out=d)) / scales[n - 1]
            if level_worst > worst:
                worst = level_worst
    return worst


def holder_norm(values: np.ndarray, grid: TimeGrid, alpha: float) -> float:
    """sup_{s<t} |F_st| / (t-s)^alpha over grid pairs.

    Accepts a two-parameter array (uses its upper triangle) or a path
    (uses its increments).  Pairs closer than one grid step do not exist
    on the grid, so the supremum is automatically restricted away from
    the diagonal.
    """
    if alpha <= 0.0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        if values.shape[0] != grid.n_points:
            raise DimensionError(f"array size {values.shape} does not match {grid!r}")
        lags, maxima = lag_maxima(values)
    elif values.ndim == 1:
        if values.shape[0] != grid.n_points:
            raise DimensionError(f"path size {values.shape} does not match {grid!r}")
        from .grid import path_increment_maxima
        lags, maxima = path_increment_maxima(values)
    else:
        raise DimensionError(f"expected 1-D path or 2-D pair array, got ndim={values.ndim}")
    return holder_norm_from_maxima(lags, maxima, grid.dt, alpha)


def rough_distance(x: RoughPath, y: RoughPath) -> float:
    """Inhomogeneous rough-path distance: sum_n ||X^(n) - Y^(n)||_{n*gamma}."""
    check_same_grid(x.grid, y.grid)
    if x.gamma != y.gamma:
        raise ParameterError(f"exponents differ: {x.gamma} vs {y.gamma}")
    total = 0.0
    for n in range(1, x.degree + 1):
        diff = x.levels[n - 1] - y.levels[n - 1]
        if np.any(diff):
            total += holder_norm(diff, x.grid, n * x.gamma)
    return total


@dataclass
class TwoParamFn:
    """Two-parameter function on grid pairs with regularity bookkeeping.

    alpha is the size exponent of Xi itself and beta the exponent of
    delta Xi_sut = Xi_st - Xi_su - Xi_ut.
    """
    grid: TimeGrid
    values: np.ndarray
    alpha: float
    beta: float

    def __post_init__(self):
        npts = self.grid.n_points
        if self.values.shape != (npts, npts):
            raise DimensionError(
                f"values shape {self.values.shape} does not match {(npts, npts)}")

    def norm_alpha(self) -> float:
        return holder_norm(self.values, self.grid, self.alpha)

    def delta_norm_beta(self, k_stride: int = 1) -> float:
        """sup over triples |delta Xi_sut| / (t-s)^beta.

        k_stride > 1 restricts the middle index to a subsample, which
        keeps the triple scan affordable on fine grids.
        """
        return delta_defect_norm(self.values, self.grid, self.beta, k_stride=k_stride)


def delta_defect_norm(values: np.ndarray, grid: TimeGrid, beta: float,
                      k_stride: int = 1) -> float:
    """sup_{s<u<t} |Xi_st - Xi_su - Xi_ut| / (t-s)^beta on the grid."""
    if beta <= 0.0:
        raise ParameterError(f"beta must be positive, got {beta}")
    if k_stride < 1:
        raise ParameterError(f"k_stride must be >= 1, got {k_stride}")
    npts = grid.n_points
    worst = 0.0
    lag = np.arange(npts) * grid.dt
    for k in range(1, npts - 1, k_stride):
        d = np.abs(values[:k, k + 1:] - values[:k, k][:, None] - values[k, k + 1:][None, :])
        # (t - s) for the block (i < k < j) is lag[j - i]
        span = lag[k + 1 - np.arange(k)[:, None] + np.arange(npts - k - 1)[None, :]]
        worst = max(worst, float(np.max(d / span**beta)))
    return worst


@dataclass
class SewingResult:
    """Output of the discrete sewing map.

    values is the sewed path I with I_0 = 0; remainder_constant is the
    measured sup of |I_st - Xi_st| / (t-s)^beta, and lag_profile holds
    the per-dyadic-lag maxima of |I_st - Xi_st| used for rate fits.
    """
    grid: TimeGrid
    beta: float
    values: np.ndarray
    remainder_constant: float
    lag_profile: tuple[np.ndarray, np.ndarray] = field(repr=False)

    @property
    def endpoint(self) -> float:
        return float(self.values[-1])


def sewing_integrate(xi: np.ndarray, grid: TimeGrid, alpha: float, beta: float) -> SewingResult:
    """Discrete sewing map: telescope the germ Xi down to the grid mesh.

    The sewed path is I_{t_j} = sum_{i<j} Xi_{t_i t_{i+1}}; uniqueness of
    the continuum limit needs beta > 1, so smaller beta is rejected.
    """
    if beta <= 1.0:
        raise ParameterError(f"sewing needs beta > 1 for uniqueness, got beta={beta}")
    if alpha <= 0.0 or alpha > beta:
        raise ParameterError(f"need 0 < alpha <= beta, got alpha={alpha}, beta={beta}")
    xi = np.asarray(xi, dtype=float)
    npts = grid.n_points
    if xi.shape != (npts, npts):
        raise DimensionError(f"germ shape {xi.shape} does not match {(npts, npts)}")
    path = np.zeros(npts)
    np.cumsum(np.diagonal(xi, offset=1), out=path[1:])
    gap = np.triu(path[None, :] - path[:, None], k=1) - np.triu(xi, k=1)
    lags, maxima = lag_maxima(gap, dyadic_lags(grid.n_steps))
    constant = holder_norm_from_maxima(*lag_maxima(gap), dt=grid.dt, alpha=beta)
    return SewingResult(grid, beta, path, constant, (lags, maxima))
