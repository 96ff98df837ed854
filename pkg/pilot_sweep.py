"""Pilot: (A) regular experiment at N=2048; (B) criterion-9 sweep seeds at base 2048;
(C) cost of an 8192 cholesky sample."""
import time

import numpy as np

from roughflow.fbm import FbmConfig, sample_fbm
from roughflow.flowsolver import cos_drift
from roughflow.grid import TimeGrid
from roughflow.roughcore import geometric_lift
from roughflow.transport import (bump_test_function, gaussian_datum,
                                 regular_existence_experiment, solve_transport,
                                 weak_residual)

H, GAMMA = 0.25, 0.2
drift = cos_drift(0.8)
datum = gaussian_datum()
eta = bump_test_function(0.0, 1.0)

print("=== A: regular experiment, N=2048, seed 9 ===", flush=True)
t0 = time.time()
grid = TimeGrid(n_steps=2048, horizon=1.0)
rep = regular_existence_experiment(drift, H, GAMMA, grid, seed=9)
print(f"t3_rough={rep['t3_rough']:+.5f} t1_rough={rep['t1_rough']:+.5f}")
for r in rep["rows"]:
    print(f"  f={r['factor']:3d} t3_gap={r['t3_gap']:.5f} t1_gap={r['t1_gap']:.6f}"
          f" dist={r['holder_distance']:.4f} C={r['fitted_c']:.5f}"
          f" cls={r['classical_max']:.4f}", flush=True)
print(f"A time: {time.time()-t0:.1f}s", flush=True)

print("=== B: sweep seeds, base 2048 -> N in (256,512,1024) ===", flush=True)
base = TimeGrid(n_steps=2048, horizon=1.0)
x_grid = np.linspace(-6.0, 6.0, 481)
for seed in range(8):
    t0 = time.time()
    pf = sample_fbm(FbmConfig(hurst=H, grid=base, seed=seed), 1).paths[0]
    res = []
    for factor in (8, 4, 2):
        g = base.coarsen(factor)
        p = pf[::factor]
        rough = geometric_lift(p, g, GAMMA)
        sol = solve_transport(datum, drift, p, g, x_grid,
                              times=np.array([0.0, g.points[-1]]))
        out = weak_residual(sol, eta, rough, g.points[-1])
        res.append(out["residual"])
    mono = res[0] > res[1] > res[2]
    tag = "MONO" if mono else "    "
    print(f"  seed={seed} res={res[0]:.4f}/{res[1]:.4f}/{res[2]:.4f} {tag}"
          f"  ({time.time()-t0:.0f}s)", flush=True)

print("=== C: one 8192 cholesky sample ===", flush=True)
t0 = time.time()
g8 = TimeGrid(n_steps=8192, horizon=1.0)
pf = sample_fbm(FbmConfig(hurst=H, grid=g8, seed=9), 1).paths[0]
print(f"C time: {time.time()-t0:.1f}s final={pf[-1]:+.4f}", flush=True)
