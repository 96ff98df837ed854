"""Pilot measurements for the acceptance criteria 1, 2, 6, 7, 8, 10."""
import time

import numpy as np

from roughflow.cli import compact_bump_drift
from roughflow.controlled import integral_germ, lift_composition, rough_integral
from roughflow.fbm import FbmConfig, covariance, girsanov_weight, sample_fbm
from roughflow.flowsolver import (composition_defect, cos_drift,
                                  derivative_moment_experiment, sign_drift,
                                  solve_flow)
from roughflow.grid import TimeGrid
from roughflow.localtime import support_check
from roughflow.roughcore import chen_defect, geometric_lift
import roughflow.smoothfn as sf


def c1():
    t0 = time.perf_counter()
    grid = TimeGrid(1.0, 256)
    rng = np.random.default_rng(0)
    gammas = {3: 0.3, 4: 0.25, 5: 0.2}
    worst = 0.0
    n_done = 0
    for i in range(100):
        p = (3, 4, 5)[i % 3]
        incr = rng.standard_normal(256) * np.sqrt(grid.dt)
        path = np.concatenate([[0.0], np.cumsum(incr)])
        x = geometric_lift(path, grid, gammas[p])
        assert x.degree == p, (p, x.degree)
        worst = max(worst, chen_defect(x))
        n_done += 1
    dt = time.perf_counter() - t0
    print(f"[c1] n={n_done} worst_chen={worst:.3e} runtime={dt:.2f}s")


def c2():
    t0 = time.perf_counter()
    grid = TimeGrid(1.0, 2048)
    eta = sf.sine()
    drift = cos_drift(1.0)
    slopes = []
    for seed in range(20):
        path = sample_fbm(FbmConfig(hurst=0.25, grid=grid, seed=seed), 1).paths[0]
        x = geometric_lift(path, grid, 0.2)
        phi = solve_flow(drift, path, grid, np.array([0.0])).path(0)
        y = lift_composition(eta, phi, x)
        ivals = rough_integral(y).values
        xi = integral_germ(y)
        lags = np.arange(1, grid.n_steps // 64 + 1)
        rems = []
        for lag in lags:
            idx = np.arange(grid.n_points - lag)
            r = np.abs(ivals[idx + lag] - ivals[idx] - xi[idx, idx + lag])
            rems.append(np.max(r))
        slope = np.polyfit(np.log(lags * grid.dt), np.log(rems), 1)[0]
        slopes.append(slope)
    dt = time.perf_counter() - t0
    s = np.array(slopes)
    print(f"[c2] slopes min={s.min():.3f} mean={s.mean():.3f} max={s.max():.3f} "
          f"runtime={dt:.1f}s")
    print("     per-seed:", np.round(s, 3).tolist())


def c6():
    t0 = time.perf_counter()
    grid = TimeGrid(1.0, 512)
    paths = sample_fbm(FbmConfig(hurst=0.25, grid=grid, seed=0), 50).paths
    y_grid = np.linspace(-3.0, 3.0, 241)
    res = support_check(compact_bump_drift(1.0, 1.0), paths, grid, 1.0,
                        y_grid, K=25.0)
    dt = time.perf_counter() - t0
    print(f"[c6] outside={res['n_outside']} viol={res['n_violations']} "
          f"fraction={res['fraction']:.4f} runtime={dt:.1f}s")


def c7():
    t0 = time.perf_counter()
    rows = derivative_moment_experiment(sign_drift(1.0), 0.25, 2000,
                                        TimeGrid(1.0, 512), levels=(4, 16, 64),
                                        x0=0.0, seed=0)
    est = np.array([r["estimate"] for r in rows])
    dt = time.perf_counter() - t0
    print(f"[c7] estimates={np.round(est, 4).tolist()} band={est.max()/est.min():.3f} "
          f"runtime={dt:.1f}s")


def c8():
    t0 = time.perf_counter()
    drift = cos_drift(1.0)
    x_nodes = np.linspace(-1.5, 1.5, 33)
    fine_grid = TimeGrid(1.0, 4096)
    coarse_grid = fine_grid.coarsen(2)
    defects, ratios = [], []
    for seed in range(8):
        path = sample_fbm(FbmConfig(hurst=0.25, grid=fine_grid, seed=seed), 1).paths[0]
        d_coarse = composition_defect(drift, path[::2], coarse_grid, 1.0, x_nodes)
        d_fine = composition_defect(drift, path, fine_grid, 1.0, x_nodes)
        defects.append(d_coarse)
        ratios.append(d_fine / d_coarse)
    dt = time.perf_counter() - t0
    d = np.array(defects)
    r = np.array(ratios)
    print(f"[c8] defect2048 max={d.max():.3e} ratios mean={r.mean():.3f} "
          f"min={r.min():.3f} max={r.max():.3f} runtime={dt:.1f}s")
    print("     ratios:", np.round(r, 3).tolist())


def c10():
    t0 = time.perf_counter()
    grid = TimeGrid(1.0, 64)
    for seed in (0, 1):
        sample = sample_fbm(FbmConfig(hurst=0.25, grid=grid, seed=seed), 10_000)
        times = grid.points
        idx = np.linspace(1, grid.n_steps, 8).astype(int)
        max_z = 0.0
        for i in idx:
            for j in idx:
                prod = sample.paths[:, i] * sample.paths[:, j]
                emp = prod.mean()
                se = prod.std(ddof=1) / np.sqrt(prod.size)
                exact = float(covariance(times[i], times[j], 0.25))
                max_z = max(max_z, abs(emp - exact) / se)
        print(f"[c10] seed={seed} max_z={max_z:.3f}")
    zs = {}
    for hurst in (0.5, 0.25):
        sample = sample_fbm(FbmConfig(hurst=hurst, grid=grid, seed=0), 10_000)
        w = girsanov_weight(sample, np.full(grid.n_points, 0.8))
        stat = w.weight * (sample.paths[:, -1] + 0.8 * 1.0)
        z = abs(stat.mean()) / (stat.std(ddof=1) / np.sqrt(stat.size))
        zs[hurst] = z
    dt = time.perf_counter() - t0
    print(f"[c10] girsanov z: H=0.5 {zs[0.5]:.3f}, H=0.25 {zs[0.25]:.3f} "
          f"total runtime={dt:.1f}s")


if __name__ == "__main__":
    c1()
    c10()
    c7()
    c8()
    c6()
    c2()
