"""Transport equation driven by a rough path plus a drift.

The solution is composition with the inverse characteristic flow:
u(t, x) = u0(inverse flow at x).  The weak-form verifier never
finite-differences u in space; every term involving d_x u is rewritten
by the change of variables x = phi_t(y) as a y-integral of u0' composed
with the forward flow, and the rough term is the sewing integral of the
measure-weighted controlled composition.  That keeps the residual
meaningful when the drift is a steep mollification of a discontinuous
field and u is far from classically differentiable.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .controlled import SignedMeasureOnGrid, measure_lift, rough_integral
from .errors import ExtrapolationError, InputError, ParameterError
from .flowsolver import (Drift, MollifiedFamily, _driver_values, solve_flow,
                         solve_inverse_flow)
from .grid import TimeGrid, check_same_grid
from .quadrature import simpson_weights, uniform_nodes
from .roughcore import RoughPath, geometric_lift, holder_norm
from .smoothfn import SmoothFunction, bump, gaussian, sine_windowed_bump

X_QUAD_NODES = 401
Y_QUAD_NODES = 401


@dataclass(frozen=True)
class InitialDatum:
    """C^1 initial condition whose slope has finite mass on a known box.

    The slope's essential support bounds the y-quadrature domain of
    every change-of-variables integral, so they must genuinely contain
    it; the mass check below guards against passing a slope that is not
    integrable on the box.
    """
    fn: SmoothFunction
    support: tuple[float, float]
    name: str = "datum"

    def __post_init__(self):
        lo, hi = self.support
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ParameterError(f"bad support interval {self.support}")

    def __call__(self, x) -> np.ndarray:
        return self.fn(x, order=0)

    def slope(self, x) -> np.ndarray:
        return self.fn(x, order=1)

    def slope_mass(self, n_nodes: int = Y_QUAD_NODES) -> float:
        nodes, dx = uniform_nodes(self.support[0], self.support[1], n_nodes)
        mass = float(simpson_weights(n_nodes, dx) @ np.abs(self.slope(nodes)))
        if not np.isfinite(mass):
            raise InputError(f"slope of {self.name} has non-finite mass")
        return mass


def gaussian_datum(center: float = 0.0, width: float = 0.35,
                   amplitude: float = 1.0) -> InitialDatum:
    return InitialDatum(fn=gaussian(center, width, amplitude),
                        support=(center - 8.0 * width, center + 8.0 * width),
                        name="gaussian-datum")


def bump_datum(center: float = 0.0, radius: float = 1.0,
               amplitude: float = 1.0) -> InitialDatum:
    return InitialDatum(fn=bump(center, radius, amplitude),
                        support=(center - radius, center + radius),
                        name="bump-datum")


def constant_datum(value: float) -> InitialDatum:
    def ev(x, k):
        return np.full_like(x, value) if k == 0 else np.zeros_like(x)
    return InitialDatum(fn=SmoothFunction(f"const({value})", ev),
                        support=(-1.0, 1.0), name="constant-datum")


@dataclass(frozen=True)
class TestFunction:
    """Smooth compactly supported test function with known support."""
    fn: SmoothFunction
    lo: float
    hi: float
    name: str = "eta"

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise ParameterError(f"bad support [{self.lo}, {self.hi}]")

    def __call__(self, x, order: int = 0) -> np.ndarray:
        return self.fn(x, order=order)

    @property
    def max_order(self) -> int | None:
        return self.fn.max_order


def bump_test_function(center: float = 0.0, radius: float = 1.0) -> TestFunction:
    return TestFunction(fn=bump(center, radius), lo=center - radius,
                        hi=center + radius, name=f"bump({center},{radius})")


def test_function_suite() -> list[TestFunction]:
    """Fixed suite: five bumps of varying center and width plus one
    oscillatory windowed bump; deterministic so reports are
    reproducible."""
    suite = [
        bump_test_function(0.0, 1.0),
        bump_test_function(0.5, 0.8),
        bump_test_function(-0.6, 0.7),
        bump_test_function(0.2, 1.5),
        bump_test_function(-0.1, 0.4),
    ]
    suite.append(TestFunction(fn=sine_windowed_bump(0.1, 1.2), lo=-1.1,
                              hi=1.3, name="sine-windowed"))
    return suite


@dataclass
class TransportSolution:
    """u(t, x) on requested time rows of the grid, by characteristics."""
    grid: TimeGrid
    x_grid: np.ndarray
    times: np.ndarray
    values: np.ndarray          # (n_times, n_x)
    datum: InitialDatum
    drift: Drift
    driver_values: np.ndarray
    flow: object = field(repr=False, default=None)

    def time_index(self, t: float) -> int:
        hits = np.where(np.abs(self.times - t) <= 1e-9)[0]
        if hits.size == 0:
            raise ParameterError(f"t={t} is not among the solved times")
        return int(hits[0])

    def at(self, t: float, x) -> np.ndarray:
        """Linear interpolation in x on one solved row; evaluation
        outside the solved x-range is refused rather than extrapolated."""
        x = np.asarray(x, dtype=float)
        if np.any(x < self.x_grid[0]) or np.any(x > self.x_grid[-1]):
            raise ExtrapolationError(
                f"x outside the solved range [{self.x_grid[0]}, {self.x_grid[-1]}]")
        row = self.values[self.time_index(t)]
        return np.interp(x, self.x_grid, row)

    def snapshot_rows(self):
        """(t, x, u) triples in row-major order, for delimited output."""
        for i, t in enumerate(self.times):
            for j, x in enumerate(self.x_grid):
                yield float(t), float(x), float(self.values[i, j])


def solve_transport(datum: InitialDatum, drift: Drift, driver,
                    grid: TimeGrid, x_grid: np.ndarray,
                    times: np.ndarray | None = None) -> TransportSolution:
    """Classical solution by characteristics on the requested time rows.

    Each positive time costs one inverse-flow solve from that time back
    to zero; t = 0 is the datum itself.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    if x_grid.ndim != 1 or x_grid.size < 2 or np.any(np.diff(x_grid) <= 0):
        raise InputError("x_grid must be a strictly increasing 1-D array")
    datum.slope_mass()
    xvals = _driver_values(driver, grid)
    if times is None:
        times = grid.points
    times = np.asarray(times, dtype=float)
    indices = [grid.index_of(float(t)) for t in times]
    if len(indices) != len(set(indices)):
        raise InputError("solved times must be distinct")
    rows = np.empty((len(indices), x_grid.size))
    for r, k in enumerate(indices):
        if k == 0:
            rows[r] = datum(x_grid)
        else:
            inv = solve_inverse_flow(drift, xvals, grid, grid.points[k], x_grid)
            rows[r] = datum(inv.terminal)
    forward = solve_flow(drift, xvals, grid, x_grid)
    return TransportSolution(grid=grid, x_grid=x_grid,
                             times=grid.points[indices], values=rows,
                             datum=datum, drift=drift, driver_values=xvals,
                             flow=forward)


def classical_residual(solution: TransportSolution) -> dict:
    """Finite-difference residual of the strong form on interior nodes.

    Central differences in t and x; the driver's slope is the centered
    difference of its values.  Meaningful for smooth drift and driver
    only; the time rows must be consecutive grid points.
    """
    times = solution.times
    if times.size < 3:
        raise ParameterError("need at least three consecutive time rows")
    if not np.allclose(np.diff(times), solution.grid.dt, rtol=0, atol=1e-12):
        raise ParameterError("time rows must be consecutive grid points")
    u = solution.values
    x = solution.x_grid
    dt = solution.grid.dt
    k0 = solution.grid.index_of(float(times[0]))
    xv = solution.driver_values[k0: k0 + times.size]
    dudt = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2.0 * dt)
    dudx = (u[1:-1, 2:] - u[1:-1, :-2]) / (x[2:] - x[:-2])[None, :]
    xdot = (xv[2:] - xv[:-2]) / (2.0 * dt)
    b = np.stack([solution.drift(float(t), x[1:-1])
                  for t in times[1:-1]])
    res = dudt + (b + xdot[:, None]) * dudx
    return {
        "max_abs": float(np.max(np.abs(res))),
        "mean_abs": float(np.mean(np.abs(res))),
        "n_interior": int(res.size),
    }


def _eta_quadrature(eta: TestFunction,
                    n_nodes: int = X_QUAD_NODES) -> tuple[np.ndarray, np.ndarray]:
    nodes, dx = uniform_nodes(eta.lo, eta.hi, n_nodes)
    return nodes, simpson_weights(n_nodes, dx)


def _datum_quadrature(datum: InitialDatum,
                      n_nodes: int = Y_QUAD_NODES) -> tuple[np.ndarray, np.ndarray]:
    nodes, dx = uniform_nodes(datum.support[0], datum.support[1], n_nodes)
    return nodes, simpson_weights(n_nodes, dx)


def _drift_along(drift: Drift, flow_values: np.ndarray, grid: TimeGrid,
                 n_cols: int) -> np.ndarray:
    if drift.time_homogeneous:
        return drift(0.0, flow_values[:, :n_cols])
    cols = [drift(float(grid.points[r]), flow_values[:, r])
            for r in range(n_cols)]
    return np.stack(cols, axis=1)


def weak_residual(solution: TransportSolution, eta: TestFunction,
                  rough: RoughPath, t: float) -> dict:
    """Defect of the weak form at time t against one test function.

    Terms: t1 = int u(t) eta dx, t4 = int u0 eta dx,
    t2 = int_0^t int u0'(y) b(r, phi_r(y)) eta(phi_r(y)) dy dr,
    t3 = rough integral of the controlled path
    s -> -int u0'(y) eta(phi_s(y)) dy against the driver lift;
    the identity is t1 + t2 - t3 - t4 = 0 and the residual is its
    absolute defect over the largest term magnitude.
    """
    if not solution.drift.smooth:
        raise InputError(
            "weak form needs a smooth (mollified) drift; pass a "
            "mollification level, not the discontinuous base")
    check_same_grid(solution.grid, rough.grid)
    if not np.allclose(solution.driver_values, rough.base_path(),
                       rtol=0.0, atol=1e-12):
        raise InputError("solution and rough lift have different drivers")
    if eta.lo <= solution.x_grid[0] or eta.hi >= solution.x_grid[-1]:
        raise InputError(
            f"test-function support [{eta.lo}, {eta.hi}] escapes the "
            "solution's x-grid interior")
    grid = solution.grid
    i_t = grid.index_of(t)
    if i_t < 1:
        raise ParameterError(f"need t > 0, got t={t}")
    drift = solution.drift
    datum = solution.datum

    xq, wx = _eta_quadrature(eta)
    inv = solve_inverse_flow(drift, solution.driver_values, grid,
                             grid.points[i_t], xq)
    t1 = float(wx @ (datum(inv.terminal) * eta(xq)))
    t4 = float(wx @ (datum(xq) * eta(xq)))

    yq, wy = _datum_quadrature(datum)
    slopes = datum.slope(yq)
    forward = solve_flow(drift, solution.driver_values, grid, yq)
    eta_phi = eta(forward.values[:, : i_t + 1])
    b_phi = _drift_along(drift, forward.values, grid, i_t + 1)
    w_r = (wy * slopes) @ (b_phi * eta_phi)
    t2 = float(np.trapezoid(w_r, dx=grid.dt))

    mu = SignedMeasureOnGrid(yq, -(wy * slopes))
    controlled = measure_lift(eta, forward, mu, rough)
    t3 = float(rough_integral(controlled, rough).values[i_t])

    scale = max(abs(t1), abs(t2), abs(t3), abs(t4), 1e-300)
    return {
        "residual": abs(t1 + t2 - t3 - t4) / scale,
        "t1": t1, "t2": t2, "t3": t3, "t4": t4,
        "scale": scale,
        "t": float(grid.points[i_t]),
    }


def duality_gap(solution: TransportSolution, eta: TestFunction,
                t: float, n_nodes: int | None = None) -> float:
    """Relative defect of int u(t) eta' dx = -int u0'(y) eta(phi_t(y)) dy.

    Left side through the inverse flow, right side through the forward
    flow, so the gap measures how compatible the two steppers and the
    two quadratures are; it does not presuppose the weak form.  The
    default node counts floor the gap near 2e-5 on narrow test bumps
    whose interior derivatives are large; pass a finer n_nodes when a
    tighter quadrature floor is needed.
    """
    grid = solution.grid
    i_t = grid.index_of(t)
    if i_t < 1:
        raise ParameterError(f"need t > 0, got t={t}")
    xq, wx = _eta_quadrature(eta, n_nodes or X_QUAD_NODES)
    inv = solve_inverse_flow(solution.drift, solution.driver_values, grid,
                             grid.points[i_t], xq)
    lhs = float(wx @ (solution.datum(inv.terminal) * eta(xq, order=1)))
    yq, wy = _datum_quadrature(solution.datum, n_nodes or Y_QUAD_NODES)
    forward = solve_flow(solution.drift, solution.driver_values, grid, yq)
    rhs = -float((wy * solution.datum.slope(yq)) @ eta(forward.values[:, i_t]))
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)


def weak_residual_sweep(drift: Drift, hurst: float, gamma: float,
                        resolutions=(256, 512, 1024), base_steps: int = 2048,
                        datum: InitialDatum | None = None,
                        eta: TestFunction | None = None,
                        seed: int = 0, horizon: float = 1.0) -> dict:
    """Weak-form residual at the horizon across nested time resolutions.

    One fine fBm path is sampled once and strided down, so every level
    sees the same realization and the residual column reflects pure
    refinement; fresh sampling per level would compare unrelated paths.
    """
    from .fbm import FbmConfig, sample_fbm

    if not 0.0 < gamma < hurst:
        raise ParameterError(f"need 0 < gamma < hurst, got {gamma} >= {hurst}")
    res = [int(n) for n in resolutions]
    if sorted(res) != res or len(set(res)) != len(res):
        raise ParameterError(f"resolutions must be strictly increasing: {res}")
    for n in res:
        if base_steps % n != 0:
            raise ParameterError(
                f"resolution {n} must divide base_steps={base_steps}")
    datum = datum if datum is not None else gaussian_datum()
    eta = eta if eta is not None else bump_test_function(0.0, 1.0)

    base = TimeGrid(n_steps=base_steps, horizon=horizon)
    fine = sample_fbm(FbmConfig(hurst=hurst, grid=base, seed=seed), 1).paths[0]
    reach = float(np.max(np.abs(fine))) + drift.bound * horizon + 1.0
    x_grid = np.linspace(min(datum.support[0], eta.lo) - reach,
                         max(datum.support[1], eta.hi) + reach, 481)

    rows = []
    for n in res:
        factor = base_steps // n
        g = base.coarsen(factor)
        p = fine[::factor]
        rough = geometric_lift(p, g, gamma)
        sol = solve_transport(datum, drift, p, g, x_grid,
                              times=np.array([0.0, g.points[-1]]))
        out = weak_residual(sol, eta, rough, g.points[-1])
        rows.append({"n_steps": int(n), "residual": out["residual"],
                     "t1": out["t1"], "t2": out["t2"],
                     "t3": out["t3"], "t4": out["t4"]})
    values = [r["residual"] for r in rows]
    return {"rows": rows,
            "monotone": bool(all(a > b for a, b in zip(values, values[1:]))),
            "seed": int(seed), "hurst": float(hurst), "gamma": float(gamma),
            "base_steps": int(base_steps)}


def _coarse_driver(path: np.ndarray, grid: TimeGrid, factor: int) -> np.ndarray:
    if grid.n_steps % factor != 0:
        raise ParameterError(
            f"coarsening factor {factor} must divide n_steps={grid.n_steps}")
    knots = grid.points[::factor]
    return np.interp(grid.points, knots, path[::factor])


def _piecewise_linear_integral(m_values: np.ndarray, path: np.ndarray,
                               grid: TimeGrid, factor: int) -> float:
    """int m dX for the piecewise-linear driver: per coarse block, the
    slope times the trapezoid of m over the block."""
    slopes = np.diff(path[::factor]) / (factor * grid.dt)
    total = 0.0
    for b, s in enumerate(slopes):
        block = m_values[b * factor: (b + 1) * factor + 1]
        total += s * float(np.trapezoid(block, dx=grid.dt))
    return total


def regular_existence_experiment(drift: Drift, hurst: float, gamma: float,
                                 grid: TimeGrid,
                                 datum: InitialDatum | None = None,
                                 eta: TestFunction | None = None,
                                 coarsen_factors=(32, 16, 8, 4),
                                 seed: int = 0) -> dict:
    """Stability of every weak-form term under smooth driver approximation.

    One rough driver; piecewise-linear interpolations at coarser knot
    spacings play the smooth approximations.  For each level the
    classical time integral against the interpolant is compared with the
    rough integral, the terminal mass integral with its rough-driver
    value (normalized by the Hoelder distance of the drivers), and the
    strong-form finite-difference residual is probed; all gaps must
    shrink as the knots refine.
    """
    from .fbm import FbmConfig, sample_fbm

    if not 0.0 < gamma < hurst:
        raise ParameterError(f"need 0 < gamma < hurst, got {gamma} >= {hurst}")
    if not drift.smooth:
        raise InputError("regular experiment needs a smooth drift")
    datum = datum if datum is not None else gaussian_datum()
    eta = eta if eta is not None else bump_test_function(0.0, 1.0)
    path = sample_fbm(FbmConfig(hurst=hurst, grid=grid, seed=seed), 1).paths[0]
    rough = geometric_lift(path, grid, gamma)

    yq, wy = _datum_quadrature(datum)
    slopes = datum.slope(yq)
    mu_w = -(wy * slopes)
    forward = solve_flow(drift, path, grid, yq)
    controlled = measure_lift(eta, forward, SignedMeasureOnGrid(yq, mu_w), rough)
    t3_rough = float(rough_integral(controlled, rough).values[-1])

    xq, wx = _eta_quadrature(eta)
    horizon = grid.points[-1]
    inv = solve_inverse_flow(drift, path, grid, horizon, xq)
    t1_rough = float(wx @ (datum(inv.terminal) * eta(xq)))

    lo = min(datum.support[0], eta.lo) - 0.5
    hi = max(datum.support[1], eta.hi) + 0.5
    x_probe = np.linspace(lo, hi, 201)
    probe_rows = [grid.n_steps // 8 * j for j in range(1, 8)]

    rows = []
    for factor in coarsen_factors:
        coarse = _coarse_driver(path, grid, factor)
        fwd_eps = solve_flow(drift, coarse, grid, yq)
        m_eps = mu_w @ eta(fwd_eps.values)
        t3_eps = _piecewise_linear_integral(m_eps, path, grid, factor)
        inv_eps = solve_inverse_flow(drift, coarse, grid, horizon, xq)
        t1_eps = float(wx @ (datum(inv_eps.terminal) * eta(xq)))
        dist = holder_norm(path - coarse, grid, gamma)
        t1_gap = abs(t1_eps - t1_rough)
        classical_max = 0.0
        for k in probe_rows:
            sol = solve_transport(datum, drift, coarse, grid, x_probe,
                                  times=grid.points[k - 1: k + 2])
            classical_max = max(classical_max,
                                classical_residual(sol)["max_abs"])
        rows.append({
            "factor": int(factor),
            "coarse_dt": float(factor * grid.dt),
            "t3_gap": abs(t3_eps - t3_rough),
            "t1_gap": t1_gap,
            "holder_distance": float(dist),
            "fitted_c": t1_gap / dist if dist > 0 else 0.0,
            "classical_max": classical_max,
        })
    return {"rows": rows, "t3_rough": t3_rough, "t1_rough": t1_rough,
            "gamma": gamma, "hurst": hurst, "seed": seed,
            "n_steps": grid.n_steps}


def singular_existence_experiment(base_drift: Drift, hurst: float,
                                  gamma: float, grid: TimeGrid,
                                  levels=(8, 16, 32, 64), n_seeds: int = 50,
                                  datum: InitialDatum | None = None,
                                  eta: TestFunction | None = None,
                                  seed: int = 0) -> dict:
    """Weak-form behavior along a mollification ladder of a rough drift.

    Per seed and per level n: solve with the n-th mollification, record
    the weak residual, its drift term, and the duality gap; a seed
    passes when the consecutive-level drift-term gaps decrease, the
    Cauchy behavior that makes the singular limit meaningful.
    """
    from .fbm import FbmConfig, sample_fbm

    if not 0.0 < gamma < hurst:
        raise ParameterError(f"need 0 < gamma < hurst, got {gamma} >= {hurst}")
    if len(levels) < 3:
        raise ParameterError("need at least three mollification levels")
    datum = datum if datum is not None else gaussian_datum()
    eta = eta if eta is not None else bump_test_function(0.7, 0.5)
    family = MollifiedFamily(base_drift)
    paths = sample_fbm(FbmConfig(hurst=hurst, grid=grid, seed=seed),
                       n_seeds).paths
    horizon = grid.points[-1]
    x_box = np.linspace(min(datum.support[0], eta.lo) - 0.5,
                        max(datum.support[1], eta.hi) + 0.5, 201)

    rows = []
    n_pass = 0
    for s in range(n_seeds):
        rough = geometric_lift(paths[s], grid, gamma)
        drift_terms = []
        residuals = []
        duality = []
        for n in levels:
            drift_n = family.member(int(n))
            sol = solve_transport(datum, drift_n, paths[s], grid, x_box,
                                  times=grid.points[[0, grid.n_steps]])
            rep = weak_residual(sol, eta, rough, horizon)
            residuals.append(rep["residual"])
            drift_terms.append(rep["t2"])
            duality.append(duality_gap(sol, eta, horizon))
        gaps = np.abs(np.diff(drift_terms))
        monotone = bool(np.all(np.diff(gaps) <= 1e-12))
        n_pass += monotone
        rows.append({
            "seed": int(seed + s),
            "drift_terms": drift_terms,
            "cauchy_gaps": gaps.tolist(),
            "residuals": residuals,
            "duality_gaps": duality,
            "monotone": monotone,
        })
    return {"rows": rows, "pass_fraction": n_pass / n_seeds,
            "levels": [int(n) for n in levels], "gamma": gamma,
            "hurst": hurst, "n_steps": grid.n_steps, "seed": seed}
