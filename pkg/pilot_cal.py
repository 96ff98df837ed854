"""Calibration pilot: freeze tolerances for tests/test_transport.py."""
import time

import numpy as np

from roughflow.fbm import FbmConfig, sample_fbm
from roughflow.flowsolver import (MollifiedFamily, cos_drift, constant_drift,
                                  sign_drift, zero_drift)
from roughflow.grid import TimeGrid
from roughflow.roughcore import geometric_lift
from roughflow.smoothfn import sine
from roughflow.transport import (bump_test_function, classical_residual,
                                 duality_gap, gaussian_datum,
                                 regular_existence_experiment, solve_transport,
                                 test_function_suite, weak_residual,
                                 weak_residual_sweep)

H, GAMMA = 0.25, 0.2
datum = gaussian_datum()

print("=== 1: weak_residual_sweep default (seed 0) ===", flush=True)
t0 = time.time()
rep = weak_residual_sweep(cos_drift(0.8), H, GAMMA)
print(f"  monotone={rep['monotone']} "
      f"res={[round(r['residual'], 4) for r in rep['rows']]} "
      f"({time.time()-t0:.1f}s)", flush=True)

print("=== 2: duality, smooth cos drift, N=4096, suite ===", flush=True)
t0 = time.time()
g4 = TimeGrid(n_steps=4096, horizon=1.0)
p4 = sample_fbm(FbmConfig(hurst=H, grid=g4, seed=1), 1).paths[0]
x_grid = np.linspace(-7.0, 7.0, 561)
sol4 = solve_transport(datum, cos_drift(0.8), p4, g4, x_grid,
                       times=np.array([0.0, 0.5, 1.0]))
worst = 0.0
for eta in test_function_suite():
    for t in (0.5, 1.0):
        worst = max(worst, duality_gap(sol4, eta, t))
print(f"  max gap={worst:.3e} ({time.time()-t0:.1f}s)", flush=True)

print("=== 2b: duality, mollified sign n=64, N=512 ===", flush=True)
t0 = time.time()
g5 = TimeGrid(n_steps=512, horizon=1.0)
p5 = sample_fbm(FbmConfig(hurst=H, grid=g5, seed=1), 1).paths[0]
fam = MollifiedFamily(sign_drift(1.0))
sol5 = solve_transport(datum, fam.member(64), p5, g5, x_grid,
                       times=np.array([0.0, 0.5, 1.0]))
worst5 = 0.0
for eta in test_function_suite():
    for t in (0.5, 1.0):
        worst5 = max(worst5, duality_gap(sol5, eta, t))
print(f"  max gap={worst5:.3e} ({time.time()-t0:.1f}s)", flush=True)

print("=== 3: regular experiment, b=0, N=1024 ===", flush=True)
t0 = time.time()
g1 = TimeGrid(n_steps=1024, horizon=1.0)
rep0 = regular_existence_experiment(zero_drift(), H, GAMMA, g1, seed=9)
for r in rep0["rows"]:
    print(f"  f={r['factor']:3d} t3_gap={r['t3_gap']:.2e} "
          f"t1_gap={r['t1_gap']:.2e} cls={r['classical_max']:.2e}", flush=True)
print(f"  ({time.time()-t0:.1f}s)", flush=True)

print("=== 4: classical/weak consistency, smooth everything ===", flush=True)
t0 = time.time()
g = TimeGrid(n_steps=512, horizon=1.0)
drv = sine(amplitude=0.3, frequency=1.0)
sol = solve_transport(datum, cos_drift(0.8), drv, g, x_grid)
cls = classical_residual(sol)
rough = geometric_lift(sol.driver_values, g, 0.45)
wk = weak_residual(sol, bump_test_function(0.0, 1.0), rough, 1.0)
print(f"  classical max={cls['max_abs']:.3e} mean={cls['mean_abs']:.3e}")
print(f"  weak residual={wk['residual']:.3e} "
      f"ratio={wk['residual']/cls['max_abs']:.3e} ({time.time()-t0:.1f}s)",
      flush=True)

print("=== 5: smooth-X first-order sweep, b=0 ===", flush=True)
eta0 = bump_test_function(0.0, 1.0)
vals = []
for n in (128, 256, 512, 1024, 2048):
    gn = TimeGrid(n_steps=n, horizon=1.0)
    soln = solve_transport(datum, zero_drift(), drv, gn, x_grid,
                           times=np.array([0.0, 1.0]))
    rn = geometric_lift(soln.driver_values, gn, 0.45)
    vals.append(weak_residual(soln, eta0, rn, 1.0)["residual"])
print("  res:", " ".join(f"{v:.2e}" for v in vals), flush=True)
slope = np.polyfit(np.log([128, 256, 512, 1024, 2048]), np.log(vals), 1)[0]
print(f"  slope={-slope:.2f}", flush=True)

print("=== 6: constant-speed oracle b=1, X=0 ===", flush=True)
gk = TimeGrid(n_steps=256, horizon=1.0)
solk = solve_transport(datum, constant_drift(1.0), np.zeros(257), gk, x_grid)
xs = np.linspace(-3.0, 3.0, 101)
err = max(float(np.max(np.abs(solk.at(t, xs) - datum(xs - t))))
          for t in (0.25, 0.5, 1.0))
print(f"  max err={err:.3e}", flush=True)
