import sys, time
from roughflow.transport import singular_existence_experiment
from roughflow.flowsolver import sign_drift
from roughflow.grid import TimeGrid

horizon = float(sys.argv[1]); n_steps = int(sys.argv[2])
n_seeds = int(sys.argv[3]); hurst = float(sys.argv[4]); gamma = float(sys.argv[5])
t0 = time.time()
rep = singular_existence_experiment(sign_drift(), hurst, gamma,
                                    TimeGrid(horizon, n_steps), n_seeds=n_seeds)
fails = [r["seed"] for r in rep["rows"] if not r["monotone"]]
res = max(max(r["residuals"]) for r in rep["rows"])
dual = max(max(r["duality_gaps"]) for r in rep["rows"])
print(f"T={horizon} N={n_steps} H={hurst} g={gamma} seeds={n_seeds}: "
      f"pass={rep['pass_fraction']:.3f} fails={fails} "
      f"max_res={res:.3f} max_dual={dual:.4f} time={time.time()-t0:.0f}s")
