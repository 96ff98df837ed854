"""Flows of scalar ODEs perturbed by an additive rough driver.

The equation phi_t(x) = x + int_0^t b(r, phi_r(x)) dr + X_t splits into a
drift-only reduced equation for y = phi - X, which Heun integrates; the
driver enters exactly, so b = 0 flows are exact to roundoff whatever the
grid.  Discontinuous drifts are never stepped directly: they are run
through mollify (and optionally the monotone envelope) first.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CapabilityError, DimensionError, InputError, ParameterError
from .grid import TimeGrid, holder_norm_from_maxima, path_increment_maxima

# quadrature nodes for one mollifier pass; budget guards against runaway
# per-step costs since every flow step re-evaluates the convolution
MOLLIFIER_NODES = 201
MOLLIFIER_NODE_BUDGET = 10_001

# truncation point of the decreasing envelope inf_{j >= n} b_j
ENVELOPE_K_MAX = 256


@dataclass
class Drift:
    """Drift field b(t, x) with optional spatial derivative.

    fn and derivative must accept numpy arrays in x (and scalar t) and
    evaluate elementwise.  bound is a sup-norm certificate checked on
    every sampled batch.
    """
    fn: Callable[[float, np.ndarray], np.ndarray]
    bound: float
    derivative: Callable[[float, np.ndarray], np.ndarray] | None = None
    smooth: bool = True
    time_homogeneous: bool = True
    name: str = "drift"

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.fn(t, x), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise InputError(f"drift {self.name} produced non-finite values")
        if self.bound > 0 and np.max(np.abs(vals)) > self.bound * (1.0 + 1e-9):
            raise InputError(
                f"drift {self.name} exceeded its bound {self.bound} at t={t}")
        return vals

    def derivative_at(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.derivative is None:
            raise CapabilityError(f"drift {self.name} carries no spatial derivative")
        vals = np.asarray(self.derivative(t, x), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise InputError(f"drift derivative {self.name} produced non-finite values")
        return vals


def zero_drift() -> Drift:
    return Drift(fn=lambda t, x: np.zeros_like(x), bound=0.0,
                 derivative=lambda t, x: np.zeros_like(x), name="zero")


def constant_drift(c: float) -> Drift:
    return Drift(fn=lambda t, x: np.full_like(x, c), bound=abs(c),
                 derivative=lambda t, x: np.zeros_like(x), name=f"const({c})")


def cos_drift(amplitude: float = 1.0, frequency: float = 1.0) -> Drift:
    return Drift(fn=lambda t, x: amplitude * np.cos(frequency * x),
                 bound=abs(amplitude),
                 derivative=lambda t, x: -amplitude * frequency * np.sin(frequency * x),
                 name="cos")


def tanh_drift(scale: float = 1.0) -> Drift:
    return Drift(fn=lambda t, x: np.tanh(scale * x), bound=1.0,
                 derivative=lambda t, x: scale / np.cosh(scale * x) ** 2,
                 name="tanh")


def linear_drift(rate: float = -1.0, box: float = 100.0) -> Drift:
    """b(t, x) = rate * x clipped to a large box, so the bound is finite."""
    return Drift(fn=lambda t, x: np.clip(rate * x, -abs(rate) * box, abs(rate) * box),
                 bound=abs(rate) * box,
                 derivative=lambda t, x: np.where(np.abs(x) < box, rate, 0.0),
                 name=f"linear({rate})")


def sign_drift(height: float = 1.0) -> Drift:
    """The discontinuous benchmark drift; mollify before stepping."""
    return Drift(fn=lambda t, x: height * np.sign(x), bound=abs(height),
                 derivative=None, smooth=False, name="sign")


def _mollifier_nodes(n_nodes: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Interior nodes of (-1, 1) with bump weights (mass exactly 1) and
    the bump-derivative quadrature row used for d/dx of the smoothing."""
    if n_nodes < 3:
        raise ParameterError(f"mollifier needs >= 3 nodes, got {n_nodes}")
    if n_nodes > MOLLIFIER_NODE_BUDGET:
        raise ParameterError(
            f"mollifier node count {n_nodes} exceeds budget {MOLLIFIER_NODE_BUDGET}")
    v = np.linspace(-1.0, 1.0, n_nodes + 2)[1:-1]
    rho = np.exp(-1.0 / (1.0 - v**2))
    drho = rho * (-2.0 * v) / (1.0 - v**2) ** 2
    total = rho.sum()
    return v, rho / total, drho / total


def mollify(base: Drift, n: int, n_nodes: int = MOLLIFIER_NODES) -> Drift:
    """Smoothing at scale 1/n: b_n(t,x) = sum_i w_i b(t, x - v_i/n).

    Weights are the normalized bump exp(-1/(1-v^2)) on (-1,1); the
    normalization makes constants exactly invariant.  The spatial
    derivative uses the integrated-by-parts form n * sum_i w'_i b(t, x -
    v_i/n), which needs no derivative of the (possibly discontinuous)
    base.
    """
    if n < 1:
        raise ParameterError(f"mollification level must be >= 1, got {n}")
    v, w, dw = _mollifier_nodes(n_nodes)
    offsets = v / float(n)

    def fn(t, x):
        x = np.asarray(x, dtype=float)
        return base.fn(t, x[..., None] - offsets) @ w

    def derivative(t, x):
        x = np.asarray(x, dtype=float)
        return float(n) * (base.fn(t, x[..., None] - offsets) @ dw)

    return Drift(fn=fn, bound=base.bound, derivative=derivative, smooth=True,
                 time_homogeneous=base.time_homogeneous, name=f"{base.name}~{n}")


@dataclass
class MollifiedFamily:
    """The smoothing ladder b_n of one base drift, with its monotone
    envelopes b~_{n,k} = min_{j=n..k} b_j and the truncation of
    inf_{j>=n} b_j at k_max."""
    base: Drift
    n_nodes: int = MOLLIFIER_NODES
    k_max: int = ENVELOPE_K_MAX
    _cache: dict = field(default_factory=dict, repr=False)

    def member(self, n: int) -> Drift:
        if n not in self._cache:
            self._cache[n] = mollify(self.base, n, self.n_nodes)
        return self._cache[n]

    def envelope(self, n: int, k: int | None = None) -> Drift:
        """Pointwise min of members j = n..k (k defaults to k_max)."""
        if k is None:
            k = self.k_max
        if not 1 <= n <= k:
            raise ParameterError(f"need 1 <= n <= k, got ({n}, {k})")
        v, w, dw = _mollifier_nodes(self.n_nodes)
        levels = np.arange(n, k + 1, dtype=float)
        offsets = v[None, :] / levels[:, None]  # (n_levels, n_nodes)
        base_fn = self.base.fn

        def fn(t, x):
            x = np.asarray(x, dtype=float)
            vals = base_fn(t, x[..., None, None] - offsets) @ w
            return np.min(vals, axis=-1)

        def derivative(t, x):
            # derivative of the argmin member; ties broken by the first
            # minimizer, matching how the min itself is evaluated
            x = np.asarray(x, dtype=float)
            smoothed = base_fn(t, x[..., None, None] - offsets)
            idx = np.argmin(smoothed @ w, axis=-1)
            picked = np.take_along_axis(
                smoothed, idx[..., None, None], axis=-2)[..., 0, :]
            return np.take(levels, idx) * (picked @ dw)

        return Drift(fn=fn, bound=self.base.bound, derivative=derivative,
                     smooth=True, time_homogeneous=self.base.time_homogeneous,
                     name=f"{self.base.name}~[{n},{k}]")


def _driver_values(driver, grid: TimeGrid) -> np.ndarray:
    if hasattr(driver, "base_path"):
        vals = np.asarray(driver.base_path(), dtype=float)
    else:
        vals = np.asarray(driver, dtype=float)
    if vals.shape != (grid.n_points,):
        raise DimensionError(
            f"driver has shape {vals.shape}, expected ({grid.n_points},)")
    return vals


@dataclass
class FlowField:
    """Solved flow phi_t(x_j) over a grid and a family of start points."""
    grid: TimeGrid
    x_nodes: np.ndarray
    values: np.ndarray  # (n_nodes, n_points)
    driver: np.ndarray
    drift: Drift

    @property
    def n_nodes(self) -> int:
        return self.x_nodes.size

    def path(self, j: int) -> np.ndarray:
        return self.values[j]

    def reduced(self) -> np.ndarray:
        """Drift-only part y = phi - X; its increments are R^phi."""
        return self.values - self.driver[None, :]

    def remainder(self, j: int) -> np.ndarray:
        """Two-parameter drift record R^phi_st = phi_st - X_st at node j."""
        y = self.values[j] - self.driver
        return np.triu(y[None, :] - y[:, None], k=1)

    def remainder_bound_defect(self) -> float:
        """max over nodes and pairs of |R^phi_st| - bound*(t-s); <= 0 when
        the drift respects its certificate."""
        spans = (np.arange(1, self.grid.n_points) * self.grid.dt)
        worst = -np.inf
        for j in range(self.n_nodes):
            y = self.values[j] - self.driver
            lags, maxima = path_increment_maxima(y)
            worst = max(worst, float(np.max(maxima - self.drift.bound * spans)))
        return worst


def solve_flow(drift: Drift, driver, grid: TimeGrid, x_nodes) -> FlowField:
    """Heun integration of the reduced equation y' = b(t, y + X_t).

    The flow is phi = y + X; since the driver is handled exactly, the
    only error is the drift quadrature.  x_nodes may be a scalar or an
    array of start points solved simultaneously.
    """
    xvals = _driver_values(driver, grid)
    x_nodes = np.atleast_1d(np.asarray(x_nodes, dtype=float))
    if x_nodes.ndim != 1:
        raise DimensionError("x_nodes must be a scalar or 1-D array")
    dt = grid.dt
    y = np.empty((x_nodes.size, grid.n_points))
    y[:, 0] = x_nodes - xvals[0]
    cur = y[:, 0].copy()
    for k in range(grid.n_steps):
        t0, t1 = grid.points[k], grid.points[k + 1]
        f0 = drift(t0, cur + xvals[k])
        pred = cur + dt * f0
        f1 = drift(t1, pred + xvals[k + 1])
        cur = cur + 0.5 * dt * (f0 + f1)
        y[:, k + 1] = cur
    return FlowField(grid=grid, x_nodes=x_nodes, values=y + xvals[None, :],
                     driver=xvals, drift=drift)


@dataclass
class InverseFlow:
    """Backward characteristics psi_t^{t0}(y): the value at t = t0 inverts
    phi_{t0}, and intermediate times satisfy phi_{t0-t}(x) =
    psi_t^{t0}(phi_{t0}(x))."""
    t0: float
    times: np.ndarray
    y_nodes: np.ndarray
    values: np.ndarray  # (n_nodes, n_times)
    driver: np.ndarray
    drift: Drift

    @property
    def terminal(self) -> np.ndarray:
        """psi_{t0}^{t0}(y), the inverse map of phi_{t0} on the nodes."""
        return self.values[:, -1]


def solve_inverse_flow(drift: Drift, driver, grid: TimeGrid, t0: float,
                       y_nodes) -> InverseFlow:
    """Heun integration of psi_t(y) = y - int_0^t b(t0-r, psi_r) dr
    - (X_{t0} - X_{t0-t}), on the grid points of [0, t0].

    The substitution zeta = psi + (X_{t0} - X_{t0-t}) removes the driver
    from the stepped equation, and t0 - t_k lands exactly on grid points,
    so the driver again enters without interpolation error.
    """
    xvals = _driver_values(driver, grid)
    i0 = grid.index_of(t0)
    if i0 < 1:
        raise ParameterError(f"inverse flow needs t0 > 0, got t0={t0}")
    y_nodes = np.atleast_1d(np.asarray(y_nodes, dtype=float))
    dt = grid.dt
    # driver values along reversed time: D_k = X_{t0} - X_{t0 - t_k}
    drv = xvals[i0] - xvals[i0::-1]
    zeta = np.empty((y_nodes.size, i0 + 1))
    zeta[:, 0] = y_nodes
    cur = y_nodes.astype(float).copy()
    for k in range(i0):
        s0 = grid.points[i0 - k]        # t0 - t_k
        s1 = grid.points[i0 - k - 1]    # t0 - t_{k+1}
        f0 = drift(s0, cur - drv[k])
        pred = cur - dt * f0
        f1 = drift(s1, pred - drv[k + 1])
        cur = cur - 0.5 * dt * (f0 + f1)
        zeta[:, k + 1] = cur
    return InverseFlow(t0=t0, times=grid.points[: i0 + 1], y_nodes=y_nodes,
                       values=zeta - drv[None, :], driver=xvals, drift=drift)


def composition_defect(drift: Drift, driver, grid: TimeGrid, t0: float,
                       x_nodes) -> float:
    """max over nodes and times of |psi_t^{t0}(phi_{t0}(x)) - phi_{t0-t}(x)|.

    The inverse flow is solved directly at the forward flow's terminal
    values, so no interpolation in y enters the defect.
    """
    flow = solve_flow(drift, driver, grid, x_nodes)
    i0 = grid.index_of(t0)
    inv = solve_inverse_flow(drift, driver, grid, t0, flow.values[:, i0])
    forward_reversed = flow.values[:, i0::-1]
    return float(np.max(np.abs(inv.values - forward_reversed)))


def flow_derivative(drift: Drift, driver, grid: TimeGrid, x0: float,
                    return_flow: bool = False):
    """d/dx phi_t(x0) = exp(int_0^t b'(r, phi_r) dr) along the solved path.

    Trapezoid quadrature of the derivative along the trajectory; needs
    the drift to carry b'.
    """
    if drift.derivative is None:
        raise CapabilityError(f"drift {drift.name} carries no spatial derivative")
    flow = solve_flow(drift, driver, grid, x0)
    phi = flow.values[0]
    slopes = np.array([drift.derivative_at(t, np.asarray([phi[k]]))[0]
                       for k, t in enumerate(grid.points)])
    integral = np.concatenate([
        [0.0], np.cumsum(0.5 * (slopes[:-1] + slopes[1:]) * grid.dt)])
    deriv = np.exp(integral)
    return (deriv, flow) if return_flow else deriv


def finite_difference_derivative(drift: Drift, driver, grid: TimeGrid,
                                 x0: float, h: float = 1e-4) -> np.ndarray:
    """Centered difference (phi_t(x0+h) - phi_t(x0-h)) / 2h, the oracle
    for flow_derivative."""
    flow = solve_flow(drift, driver, grid, np.array([x0 - h, x0 + h]))
    return (flow.values[1] - flow.values[0]) / (2.0 * h)


def _gamma_norm(path: np.ndarray, grid: TimeGrid, gamma: float) -> float:
    lags, maxima = path_increment_maxima(path)
    return holder_norm_from_maxima(lags, maxima, grid.dt, gamma)


def stability_experiment(drift: Drift, driver, grid: TimeGrid, gamma: float,
                         x0: float = 0.0,
                         epsilons=(1e-1, 1e-2, 1e-3, 1e-4)) -> dict:
    """Flow sensitivity to driver perturbations X~ = X + eps*sin.

    Reports per-eps ratios ||phi - phi~||_gamma / ||X - X~||_gamma for
    the forward flow and the inverse-flow analogue at t0 = T, plus their
    sups over the family.
    """
    xvals = _driver_values(driver, grid)
    base = solve_flow(drift, xvals, grid, x0)
    t0 = grid.horizon
    i0 = grid.n_steps
    base_inv = solve_inverse_flow(drift, xvals, grid, t0, base.values[:, i0])
    rows = []
    for eps in epsilons:
        pert = xvals + eps * np.sin(grid.points)
        dist = _gamma_norm(pert - xvals, grid, gamma)
        other = solve_flow(drift, pert, grid, x0)
        flow_gap = _gamma_norm(other.values[0] - base.values[0], grid, gamma)
        other_inv = solve_inverse_flow(drift, pert, grid, t0, base.values[:, i0])
        igrid = TimeGrid(t0, i0)
        inv_gap = _gamma_norm(other_inv.values[0] - base_inv.values[0], igrid, gamma)
        rows.append({"eps": float(eps), "flow_ratio": flow_gap / dist,
                     "inverse_ratio": inv_gap / dist})
    return {
        "drift": drift.name,
        "gamma": gamma,
        "rows": rows,
        "flow_ratio_sup": max(r["flow_ratio"] for r in rows),
        "inverse_ratio_sup": max(r["inverse_ratio"] for r in rows),
    }


def batch_flow(drift: Drift, drivers: np.ndarray, grid: TimeGrid, x0: float,
               with_derivative: bool = False) -> tuple[np.ndarray, np.ndarray | None]:
    """Flows from one start point across many drivers (one path per row).

    Returns (phi paths, terminal d/dx phi_T or None).  The derivative
    accumulates the same trapezoid as flow_derivative, vectorized across
    paths.
    """
    drivers = np.asarray(drivers, dtype=float)
    n_paths, npts = drivers.shape
    if npts != grid.n_points:
        raise DimensionError(
            f"drivers have {npts} columns, expected {grid.n_points}")
    dt = grid.dt
    cur = x0 - drivers[:, 0]
    phi = np.empty((n_paths, npts))
    phi[:, 0] = x0
    integral = np.zeros(n_paths)
    if with_derivative:
        slope_prev = drift.derivative_at(0.0, phi[:, 0].copy())
    for k in range(grid.n_steps):
        t0, t1 = grid.points[k], grid.points[k + 1]
        f0 = drift(t0, cur + drivers[:, k])
        pred = cur + dt * f0
        f1 = drift(t1, pred + drivers[:, k + 1])
        cur = cur + 0.5 * dt * (f0 + f1)
        phi[:, k + 1] = cur + drivers[:, k + 1]
        if with_derivative:
            slope_next = drift.derivative_at(t1, phi[:, k + 1])
            integral += 0.5 * dt * (slope_prev + slope_next)
            slope_prev = slope_next
    return phi, (np.exp(integral) if with_derivative else None)


def derivative_moment_experiment(base_drift: Drift, hurst: float,
                                 n_paths: int, grid: TimeGrid,
                                 levels=(4, 16, 64), x0: float = 0.0,
                                 seed: int = 0) -> list[dict]:
    """Monte-Carlo E[(d/dx phi_T(x0))^2] across mollification levels.

    The drift's Lipschitz constant grows with the level, but the moment
    must stay bounded; rows report the estimate with its standard error.
    One driver batch is shared across levels, so rows differ only
    through the drift.
    """
    from .fbm import FbmConfig, sample_fbm

    cfg = FbmConfig(hurst=hurst, grid=grid, seed=seed)
    drivers = sample_fbm(cfg, n_paths).paths
    family = MollifiedFamily(base_drift)
    rows = []
    for n in levels:
        _, deriv = batch_flow(family.member(n), drivers, grid, x0,
                              with_derivative=True)
        sq = deriv**2
        rows.append({
            "n": int(n),
            "estimate": float(sq.mean()),
            "stderr": float(sq.std() / np.sqrt(n_paths)),
        })
    return rows


def flow_convergence_experiment(base_drift: Drift, hurst: float, gamma: float,
                                grid: TimeGrid, levels=(8, 16, 32, 64),
                                n_seeds: int = 100, x0: float = 0.5,
                                seed: int = 0, k_max: int = ENVELOPE_K_MAX) -> dict:
    """Per-sample Cauchy decay of flows along the envelope ladder.

    For each driver sample, solves the flow with the truncated envelope
    drift at each level and records the C^gamma gaps between consecutive
    levels; a seed passes when the gaps decrease monotonically.
    """
    from .fbm import FbmConfig, sample_fbm

    if not gamma < hurst:
        raise ParameterError(f"need gamma < H, got gamma={gamma}, H={hurst}")
    family = MollifiedFamily(base_drift, k_max=k_max)
    drifts = [family.envelope(n) for n in levels]
    cfg = FbmConfig(hurst=hurst, grid=grid, seed=seed)
    drivers = sample_fbm(cfg, n_seeds).paths
    # one batched solve per level; seeds ride along as batch rows
    flows = [batch_flow(d, drivers, grid, x0)[0] for d in drifts]
    per_seed = []
    n_pass = 0
    for i in range(n_seeds):
        gaps = [_gamma_norm(flows[j + 1][i] - flows[j][i], grid, gamma)
                for j in range(len(flows) - 1)]
        decays = all(gaps[j + 1] <= gaps[j] + 1e-12 for j in range(len(gaps) - 1))
        n_pass += decays
        per_seed.append({"seed": i, "gaps": gaps, "monotone": bool(decays)})
    return {
        "drift": base_drift.name,
        "levels": list(levels),
        "pass_fraction": n_pass / n_seeds,
        "per_seed": per_seed,
    }
