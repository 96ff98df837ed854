import sys, time
import numpy as np
from roughflow.transport import singular_existence_experiment
from roughflow.flowsolver import sign_drift
from roughflow.grid import TimeGrid

n_steps = int(sys.argv[1])
n_seeds = int(sys.argv[2])
hurst = float(sys.argv[3]) if len(sys.argv) > 3 else 0.3
gamma = float(sys.argv[4]) if len(sys.argv) > 4 else 0.25

t0 = time.time()
rep = singular_existence_experiment(sign_drift(), hurst, gamma,
                                    TimeGrid(1.0, n_steps), n_seeds=n_seeds)
fails = [r["seed"] for r in rep["rows"] if not r["monotone"]]
res = max(max(r["residuals"]) for r in rep["rows"])
dual = max(max(r["duality_gaps"]) for r in rep["rows"])
print(f"N={n_steps} H={hurst} g={gamma} seeds={n_seeds}: "
      f"pass={rep['pass_fraction']:.3f} fails={fails} "
      f"max_res={res:.3f} max_dual={dual:.4f} time={time.time()-t0:.0f}s")
for r in rep["rows"][:4]:
    g = r["cauchy_gaps"]
    print(f"  seed={r['seed']}: [{g[0]:.6f}, {g[1]:.6f}, {g[2]:.6f}] "
          f"mono={r['monotone']}")
