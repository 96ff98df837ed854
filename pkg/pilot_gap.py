import sys
import numpy as np
import roughflow.transport as tr
from roughflow.flowsolver import sign_drift
from roughflow.grid import TimeGrid

n_steps = int(sys.argv[1])
y_nodes = int(sys.argv[2])
seeds = [int(s) for s in sys.argv[3].split(",")]

if y_nodes != 401:
    orig = tr._datum_quadrature
    tr._datum_quadrature = lambda d, n_nodes=y_nodes: orig(d, n_nodes=n_nodes)

grid = TimeGrid(1.0, n_steps)
import time
for s in seeds:
    t0 = time.time()
    rep = tr.singular_existence_experiment(
        sign_drift(), 0.25, 0.2, grid, levels=(8, 16, 32, 64),
        n_seeds=1, seed=s)
    row = rep["rows"][0]
    g = row["cauchy_gaps"]
    print(f"N={n_steps} Y={y_nodes} seed={s}: gaps="
          f"[{g[0]:.5f}, {g[1]:.5f}, {g[2]:.5f}] "
          f"mono={row['monotone']} dual={max(row['duality_gaps']):.4f} "
          f"({time.time()-t0:.0f}s)")
