import numpy as np
import warnings
from roughflow.grid import TimeGrid
from roughflow.fbm import FbmConfig, sample_fbm
from roughflow.flowsolver import cos_drift, solve_flow, solve_inverse_flow
from roughflow.roughcore import geometric_lift
from roughflow.controlled import SignedMeasureOnGrid, measure_lift, rough_integral
from roughflow import transport as tr

warnings.simplefilter("ignore")
NF = 8192
gf = TimeGrid(1.0, NF)
pf = sample_fbm(FbmConfig(hurst=0.25, grid=gf, seed=9), 1).paths[0]
datum = tr.gaussian_datum()
eta = tr.bump_test_function(0.0, 1.0)
drift = cos_drift(0.8)
yq, wy = tr._datum_quadrature(datum)
slopes = datum.slope(yq)
mu_w = -(wy * slopes)
xq, wx = tr._eta_quadrature(eta)

for n in (256, 512, 1024, 2048, 4096, 8192):
    stride = NF // n
    gn = gf.coarsen(stride) if stride > 1 else gf
    pn = pf[::stride]
    fwd = solve_flow(drift, pn, gn, yq)
    m = mu_w @ eta(fwd.values)
    # trapezoid Riemann sum of the controlled path against the driver
    t3_trap = float(np.sum(np.diff(pn) * 0.5 * (m[:-1] + m[1:])))
    if n <= 2048:
        rough = geometric_lift(pn, gn, 0.2)
        lift = measure_lift(eta, fwd, SignedMeasureOnGrid(yq, mu_w), rough)
        t3_sew = float(rough_integral(lift, rough).values[-1])
        del rough, lift
    else:
        t3_sew = float("nan")
    # residual pieces
    inv = solve_inverse_flow(drift, pn, gn, 1.0, xq)
    t1 = float(wx @ (datum(inv.terminal) * eta(xq)))
    t4 = float(wx @ (datum(xq) * eta(xq)))
    eta_phi = eta(fwd.values)
    b_phi = drift(0.0, fwd.values)
    w_r = (wy * slopes) @ (b_phi * eta_phi)
    t2 = float(np.trapezoid(w_r, dx=gn.dt))
    scale = max(abs(t1), abs(t2), abs(t3_trap), abs(t4))
    print(f"N={n:5d}: t3_sew {t3_sew:+.5f} t3_trap {t3_trap:+.5f} "
          f"res_sew {abs(t1+t2-t3_sew-t4)/scale:.4f} "
          f"res_trap {abs(t1+t2-t3_trap-t4)/scale:.4f}")
