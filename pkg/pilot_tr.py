import numpy as np
import time
import warnings
from roughflow.grid import TimeGrid
from roughflow.fbm import FbmConfig, sample_fbm
from roughflow.flowsolver import (zero_drift, constant_drift, cos_drift,
                                  sign_drift, MollifiedFamily)
from roughflow.roughcore import geometric_lift
from roughflow import transport as tr

xg = np.linspace(-4.0, 4.0, 161)

# 1. b=0, X=0
g = TimeGrid(1.0, 256)
datum = tr.gaussian_datum()
sol = tr.solve_transport(datum, zero_drift(), np.zeros(g.n_points), g, xg,
                         times=g.points[[0, 128, 256]])
print("b=0,X=0 u==u0:", np.max(np.abs(sol.values - datum(xg)[None, :])))
eta = tr.bump_test_function(0.0, 1.0)
rough0 = geometric_lift(np.zeros(g.n_points), g, 0.45)
rep = tr.weak_residual(sol, eta, rough0, 1.0)
print("b=0,X=0 residual:", rep["residual"])

# 2. b=0 smooth X: translation + first-order residual sweep
for n in (128, 256, 512, 1024, 2048):
    gn = TimeGrid(1.0, n)
    X = 0.4 * np.sin(2.0 * np.pi * gn.points)
    soln = tr.solve_transport(datum, zero_drift(), X, gn, xg,
                              times=gn.points[[0, n]])
    exact = datum(xg - X[-1])
    tr_err = np.max(np.abs(soln.values[1] - exact))
    roughn = geometric_lift(X, gn, 0.45)
    repn = tr.weak_residual(soln, eta, roughn, 1.0)
    print(f"N={n}: translation err {tr_err:.2e} weak residual {repn['residual']:.3e}")

# 3. b=1, X=0
solc = tr.solve_transport(datum, constant_drift(1.0), np.zeros(g.n_points), g,
                          xg, times=g.points[[0, 256]])
print("b=1 err:", np.max(np.abs(solc.values[1] - datum(xg - 1.0))))

# 4. constants are solutions (fBm driver, cos drift)
gf = TimeGrid(1.0, 512)
path = sample_fbm(FbmConfig(hurst=0.25, grid=gf, seed=4), 1).paths[0]
roughf = geometric_lift(path, gf, 0.2)
const_sol = tr.solve_transport(tr.constant_datum(2.5), cos_drift(0.8), path,
                               gf, xg, times=gf.points[[0, 512]])
repc = tr.weak_residual(const_sol, eta, roughf, 1.0)
print("constant datum residual:", repc["residual"], "terms",
      repc["t1"], repc["t2"], repc["t3"], repc["t4"])

# 5. b=cos fBm sweep N in {256,512,1024}: same underlying path, coarsened
t0 = time.time()
gfine = TimeGrid(1.0, 1024)
pfine = sample_fbm(FbmConfig(hurst=0.25, grid=gfine, seed=9), 1).paths[0]
for n in (256, 512, 1024):
    stride = 1024 // n
    gn = gfine.coarsen(stride) if stride > 1 else gfine
    pn = pfine[::stride]
    rn = geometric_lift(pn, gn, 0.2)
    soln = tr.solve_transport(datum, cos_drift(0.8), pn, gn, xg,
                              times=gn.points[[0, n]])
    repn = tr.weak_residual(soln, eta, rn, 1.0)
    dg = tr.duality_gap(soln, eta, 1.0)
    print(f"cos fBm N={n}: residual {repn['residual']:.4e} duality {dg:.2e} "
          f"({time.time()-t0:.0f}s)")

# 6. duality gap, mollified sign at N=512
fam = MollifiedFamily(sign_drift(1.0))
sol64 = tr.solve_transport(datum, fam.member(64), pfine[::2], gfine.coarsen(2),
                           xg, times=gfine.coarsen(2).points[[0, 512]])
print("duality mollified-sign n=64 N=512:", tr.duality_gap(sol64, eta, 1.0))

# 7. regular experiment
t0 = time.time()
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    regrep = tr.regular_existence_experiment(cos_drift(0.8), 0.25, 0.2,
                                             TimeGrid(1.0, 512), seed=3)
for row in regrep["rows"]:
    print({k: (f"{v:.3e}" if isinstance(v, float) else v) for k, v in row.items()})
print(f"regular: {time.time()-t0:.0f}s")

# 8. singular quick: 6 seeds at N=512
t0 = time.time()
srep = tr.singular_existence_experiment(sign_drift(1.0), 0.25, 0.2,
                                        TimeGrid(1.0, 512), n_seeds=6, seed=0)
print("singular pass fraction:", srep["pass_fraction"],
      f"({time.time()-t0:.0f}s)")
for row in srep["rows"][:3]:
    print("  gaps", [f"{x:.2e}" for x in row["cauchy_gaps"]],
          "res", [f"{x:.1e}" for x in row["residuals"]],
          "dual", [f"{x:.1e}" for x in row["duality_gaps"]])
