import sys, time
from roughflow.transport import (singular_existence_experiment,
                                 gaussian_datum, bump_test_function)
from roughflow.flowsolver import sign_drift
from roughflow.grid import TimeGrid

label = sys.argv[1]
hurst = float(sys.argv[2]); n_seeds = int(sys.argv[3])
dw = float(sys.argv[4]); ec = float(sys.argv[5]); er = float(sys.argv[6])

t0 = time.time()
rep = singular_existence_experiment(
    sign_drift(), hurst, 0.25, TimeGrid(1.0, 512), n_seeds=n_seeds,
    datum=gaussian_datum(width=dw), eta=bump_test_function(ec, er))
fails = [r["seed"] for r in rep["rows"] if not r["monotone"]]
dual = max(max(r["duality_gaps"]) for r in rep["rows"])
print(f"{label} H={hurst} datum_w={dw} eta=({ec},{er}) seeds={n_seeds}: "
      f"pass={rep['pass_fraction']:.3f} fails={fails} "
      f"max_dual={dual:.4f} time={time.time()-t0:.0f}s")
