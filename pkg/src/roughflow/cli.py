"""Experiment runner: one subcommand per pipeline stage, deterministic
seeding, CSV/JSON artifacts, and PNG figures on every report path.

Exit codes: 0 all checks passed, 1 at least one check failed, 2 invalid
usage or configuration.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import figures
from .controlled import smooth_consistency_check
from .errors import (CapabilityError, DimensionError, ExtrapolationError,
                     InputError, NumericalError, ParameterError,
                     ResolutionError, SingularityError, SizeError)
from .fbm import FbmConfig, covariance, girsanov_weight, sample_fbm
from .flowsolver import (Drift, composition_defect, constant_drift, cos_drift,
                         derivative_moment_experiment,
                         flow_convergence_experiment, sign_drift, tanh_drift,
                         zero_drift)
from .grid import TimeGrid
from .localtime import ibp_check, lambda_truncated, moment_experiment
from .permanent import (bounds_check, brute_permanent, f_m_recursive, gamma_m,
                        integral_estimate_check, p_m_expand, TridiagSpec)
from .reporting import RunReport, write_csv, write_json
from .roughcore import chen_defect, geometric_lift
from .smoothfn import bump
from .transport import (gaussian_datum, solve_transport, test_function_suite,
                        weak_residual, duality_gap, weak_residual_sweep)

ROUGHFLOW_ERRORS = (CapabilityError, DimensionError, ExtrapolationError,
                    InputError, NumericalError, ParameterError,
                    ResolutionError, SingularityError, SizeError)

SUBCOMMANDS = ("sample-fbm", "lift", "integrate", "flow", "inverse",
               "transport", "weak-residual", "ibp", "moments", "girsanov",
               "permanent", "all")

SWEEP_KEYS = ("H", "N", "n", "n_paths", "K")

MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment's parameters; a JSON/TOML file with these keys is
    the serializable form, and command-line flags override file keys."""
    hurst: float = 0.25
    gamma: float = 0.2
    horizon: float = 1.0
    n_steps: int = 512
    seed: int = 0
    n_paths: int = 100
    drift: str = "cos"
    drift_value: float = 1.0
    drift_table: dict | None = None
    datum: str = "gaussian"
    eta_suite: str = "default"
    out_dir: str = "runs"
    threads: int = 1

    def validate(self) -> "ExperimentConfig":
        if not 0.0 < self.hurst < 0.5:
            raise ParameterError(f"H must lie in (0, 1/2), got {self.hurst}")
        if not self.gamma < self.hurst:
            raise ParameterError(
                f"violated invariant gamma < H: gamma={self.gamma}, "
                f"H={self.hurst}")
        p = math.floor(1.0 / self.gamma) + 1
        if not p * self.gamma > 1.0:
            raise ParameterError(
                "violated invariant (floor(1/gamma)+1)*gamma > 1: "
                f"gamma={self.gamma} gives {p * self.gamma}")
        if self.n_steps < 2 or self.n_steps & (self.n_steps - 1) != 0:
            raise ParameterError(
                f"violated invariant N a power of 2: N={self.n_steps}")
        if self.horizon <= 0.0:
            raise ParameterError(f"horizon must be positive, got {self.horizon}")
        if not 0 <= self.seed <= MAX_SEED:
            raise ParameterError(f"seed must fit in 64 bits, got {self.seed}")
        if self.n_paths < 1:
            raise ParameterError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.threads < 1:
            raise ParameterError(f"threads must be >= 1, got {self.threads}")
        if self.drift not in ("zero", "constant", "cos", "tanh", "sign",
                              "custom-table"):
            raise ParameterError(f"unknown drift preset {self.drift!r}")
        if self.drift == "custom-table":
            table = self.drift_table or {}
            if sorted(table) != ["b", "x"] or len(table["x"]) != len(table["b"]):
                raise ParameterError(
                    "custom-table drift needs equal-length x and b arrays")
            if np.any(np.diff(np.asarray(table["x"], dtype=float)) <= 0):
                raise ParameterError("custom-table x values must increase")
        return self

    def to_dict(self) -> dict:
        out = {"hurst": self.hurst, "gamma": self.gamma,
               "horizon": self.horizon, "n_steps": self.n_steps,
               "seed": self.seed, "n_paths": self.n_paths,
               "drift": self.drift, "drift_value": self.drift_value,
               "datum": self.datum, "eta_suite": self.eta_suite,
               "out_dir": self.out_dir, "threads": self.threads}
        if self.drift_table is not None:
            out["drift_table"] = self.drift_table
        return out

    def grid(self) -> TimeGrid:
        return TimeGrid(self.horizon, self.n_steps)


def load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise InputError(f"config file not found: {path}")
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(text)
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise InputError(f"config file {path} is not valid JSON: {err}") from err


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    keys: dict = {}
    if getattr(args, "config", None):
        raw = load_config_file(args.config)
        unknown = set(raw) - set(ExperimentConfig.__dataclass_fields__) - {"grid"}
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        keys.update({k: v for k, v in raw.items() if k != "grid"})
    if getattr(args, "seed", None) is not None:
        keys["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        keys["out_dir"] = args.out
    if getattr(args, "threads", None) is not None:
        keys["threads"] = args.threads
    return ExperimentConfig(**keys).validate()


def make_drift(cfg: ExperimentConfig) -> Drift:
    if cfg.drift == "zero":
        return zero_drift()
    if cfg.drift == "constant":
        return constant_drift(cfg.drift_value)
    if cfg.drift == "cos":
        return cos_drift(cfg.drift_value)
    if cfg.drift == "tanh":
        return tanh_drift(cfg.drift_value)
    if cfg.drift == "sign":
        return sign_drift(cfg.drift_value)
    xs = np.asarray(cfg.drift_table["x"], dtype=float)
    bs = np.asarray(cfg.drift_table["b"], dtype=float)
    slopes = np.gradient(bs, xs)
    return Drift(fn=lambda t, x: np.interp(x, xs, bs),
                 bound=float(np.max(np.abs(bs))),
                 derivative=lambda t, x: np.interp(x, xs, slopes),
                 name="custom-table")


def compact_bump_drift(amplitude: float = 1.0, radius: float = 1.0) -> Drift:
    """Compactly supported smooth drift for the occupation-field
    pipeline, which requires the drift to vanish outside a box."""
    b = bump(0.0, radius, amplitude)
    return Drift(fn=lambda t, x: b(x),
                 bound=float(amplitude * np.exp(-1.0)),
                 derivative=lambda t, x: b(x, order=1),
                 name="bump")


# --- subcommand runners ---------------------------------------------------

def run_sample_fbm(cfg: ExperimentConfig, out: Path) -> RunReport:
    report = RunReport("sample-fbm", cfg.to_dict())
    grid = cfg.grid()
    sample = sample_fbm(FbmConfig(hurst=cfg.hurst, grid=grid, seed=cfg.seed),
                        cfg.n_paths)
    idx = np.linspace(1, grid.n_steps, 8).astype(int)
    times = grid.points[idx]
    sub = sample.paths[:, idx]
    rows = []
    max_z = 0.0
    for i in range(8):
        for j in range(8):
            prods = sub[:, i] * sub[:, j]
            emp = float(prods.mean())
            se = float(prods.std() / np.sqrt(cfg.n_paths))
            exact = float(covariance(times[i], times[j], cfg.hurst))
            z = abs(emp - exact) / se if se > 0 else 0.0
            max_z = max(max_z, z)
            rows.append((float(times[i]), float(times[j]), emp, exact, se, z))
    report.add_check("covariance_within_3se", max_z <= 3.0, value=max_z,
                     threshold=3.0, detail=f"8x8 sub-grid, {cfg.n_paths} paths")
    report.metrics.update({"max_z": max_z, "n_paths": cfg.n_paths,
                           "hurst": cfg.hurst})
    report.add_artifact(write_csv(out / "covariance.csv",
                                  ["t_i", "t_j", "empirical", "exact", "se", "z"],
                                  rows))
    shown = sample.paths[: min(8, cfg.n_paths)]
    report.add_artifact(write_csv(
        out / "sample_paths.csv",
        ["t"] + [f"path_{k}" for k in range(shown.shape[0])],
        [(float(t),) + tuple(float(v) for v in shown[:, r])
         for r, t in enumerate(grid.points)]))
    report.add_artifact(figures.paths_figure(
        grid.points, shown, out / "paths.png",
        title=f"fBm paths, H={cfg.hurst}"))
    return report.finish()


def run_lift(cfg: ExperimentConfig, out: Path) -> RunReport:
    report = RunReport("lift", cfg.to_dict())
    grid = cfg.grid()
    path = sample_fbm(FbmConfig(hurst=cfg.hurst, grid=grid, seed=cfg.seed),
                      1).paths[0]
    rough = geometric_lift(path, grid, cfg.gamma)
    defect = chen_defect(rough)
    report.add_check("chen_exact", defect <= 1e-12, value=defect,
                     threshold=1e-12, detail=f"p={rough.degree}")
    norms = rough.holder_norms()
    report.metrics.update({"degree": rough.degree, "chen_defect": defect,
                           "holder_norms": norms})
    report.add_artifact(write_csv(
        out / "signature_terminal.csv",
        ["level", "increment_over_horizon", "holder_norm"],
        [(n, float(rough.level(n)[0, -1]), float(norms[n - 1]))
         for n in range(1, rough.degree + 1)]))
    report.add_artifact(figures.paths_figure(
        grid.points, path, out / "driver.png",
        title=f"driver path, H={cfg.hurst}"))
    return report.finish()


def run_integrate(cfg: ExperimentConfig, out: Path) -> RunReport:
    report = RunReport("integrate", cfg.to_dict())
    resolutions = [n for n in (256, 512, 1024) if n <= cfg.n_steps] or [cfg.n_steps]
    gamma = 0.45  # smooth pair; the lift degree only needs gamma < 1/2
    rows = []
    for n in resolutions:
        g = TimeGrid(cfg.horizon, n)
        x_vals = g.points**2
        y_vals = np.sin(g.points)
        rough, quad, gap = smooth_consistency_check(y_vals, x_vals, g, gamma)
        rows.append((n, rough, quad, gap))
    gaps = np.array([r[3] for r in rows])
    final_gap = float(gaps[-1])
    report.add_check("smooth_consistency_gap", final_gap <= 1e-3,
                     value=final_gap, threshold=1e-3,
                     detail=f"N={resolutions[-1]}, sin against x^2")
    if len(rows) >= 2:
        ns = np.array([r[0] for r in rows], dtype=float)
        slope = float(np.polyfit(np.log(ns), np.log(gaps), 1)[0])
        report.add_check("first_order_rate", slope <= -0.9, value=slope,
                         threshold=-0.9, detail="log-log slope of gap vs N")
        report.metrics["rate"] = slope
    report.metrics["gaps"] = [float(g) for g in gaps]
    report.add_artifact(write_csv(out / "consistency.csv",
                                  ["n_steps", "rough", "quadrature", "gap"],
                                  rows))
    report.add_artifact(figures.convergence_figure(
        [r[0] for r in rows], {"rough vs quadrature": gaps},
        out / "consistency.png", "N", "smooth consistency",
        reference_slope=-1.0))
    return report.finish()


def run_flow(cfg: ExperimentConfig, out: Path) -> RunReport:
    report = RunReport("flow", cfg.to_dict())
    grid = cfg.grid()
    n_seeds = min(cfg.n_paths, 50)
    result = flow_convergence_experiment(sign_drift(cfg.drift_value),
                                         cfg.hurst, cfg.gamma, grid,
                                         n_seeds=n_seeds, seed=cfg.seed)
    frac = result["pass_fraction"]
    report.add_check("flow_cauchy_fraction", frac >= 0.8, value=frac,
                     threshold=0.8,
                     detail=f"envelope ladder {result['levels']}, "
                            f"{n_seeds} seeds")
    report.metrics.update({"pass_fraction": frac, "levels": result["levels"]})
    rows = [(r["seed"],) + tuple(float(g) for g in r["gaps"])
            + (r["monotone"],) for r in result["per_seed"]]
    gap_cols = [f"gap_{a}_{b}" for a, b in
                zip(result["levels"][:-1], result["levels"][1:])]
    report.add_artifact(write_csv(out / "flow_gaps.csv",
                                  ["seed"] + gap_cols + ["monotone"], rows))
    mean_gaps = np.mean([[g for g in r["gaps"]] for r in result["per_seed"]],
                        axis=0)
    report.add_artifact(figures.convergence_figure(
        result["levels"][:-1], {"mean Cauchy gap": mean_gaps},
        out / "flow_gaps.png", "level n", "flow envelope convergence"))
    return report.finish()


def run_inverse(cfg: ExperimentConfig, out: Path) -> RunReport:
    report = RunReport("inverse", cfg.to_dict())
    grid = cfg.grid()
    drift = make_drift(cfg)
    path = sample_fbm(FbmConfig(hurst=cfg.hurst, grid=grid, seed=cfg.seed),
                      1).paths[0]
    x_nodes = np.linspace(-1.5, 1.5, 33)
    coarse_grid = grid.coarsen(2)
    coarse = path[::2]
    rows = [
        (grid.n_steps // 2,
         composition_defect(drift, coarse, coarse_grid, cfg.horizon, x_nodes)),
        (grid.n_steps,
         composition_defect(drift, path, grid, cfg.horizon, x_nodes)),
    ]
    fine = rows[1][1]
    ratio = fine / rows[0][1] if rows[0][1] > 0 else 0.0
    bound = 5e-3 if cfg.n_steps >= 2048 else 5e-2
    report.add_check("composition_defect_bounded", fine <= bound, value=fine,
                     threshold=bound, detail=f"N={cfg.n_steps}")
    report.add_check("defect_halves_under_refinement", 0.35 <= ratio <= 0.80,
                     value=ratio, threshold=0.65,
                     detail="fine/coarse defect ratio, nested driver")
    report.metrics.update({"defect_fine": fine, "defect_coarse": rows[0][1],
                           "ratio": ratio})
    report.add_artifact(write_csv(out / "composition_defect.csv",
                                  ["n_steps", "max_defect"], rows))
    report.add_artifact(figures.convergence_figure(
        [r[0] for r in rows], {"composition defect": [r[1] for r in rows]},
        out / "composition_defect.png", "N", "inverse-flow identity",
        reference_slope=-1.0))
    return report.finish()


def run_transport(cfg: ExperimentConfig, out: Path) -> RunReport:
    report = RunReport("transport", cfg.to_dict())
    grid = cfg.grid()
    drift = make_drift(cfg)
    if not drift.smooth:
        raise InputError(
            "transport subcommand needs a smooth drift preset; mollified "
            "singular runs live in the library experiments")
    path = sample_fbm(FbmConfig(hurst=cfg.hurst, grid=grid, seed=cfg.seed),
                      1).paths[0]
    datum = gaussian_datum()
    reach = float(np.max(np.abs(path))) + drift.bound * cfg.horizon + 1.0
    x_grid = np.linspace(datum.support[0] - reach, datum.support[1] + reach,
                         321)
    times = [0.0, 0.5 * cfg.horizon, cfg.horizon]
    solution = solve_transport(datum, drift, path, grid, x_grid, times=times)
    rough = geometric_lift(path, grid, cfg.gamma)
    eta = test_function_suite()[0]
    weak = weak_residual(solution, eta, rough, cfg.horizon)
    dual = max(duality_gap(solution, e, cfg.horizon)
               for e in test_function_suite())
    lo, hi = float(solution.values.min()), float(solution.values.max())
    in_range = (lo >= float(datum(x_grid).min()) - 1e-12
                and hi <= float(datum(x_grid).max()) + 1e-12)
    report.add_check("range_preserved", in_range, value=hi,
                     detail=f"solution range [{lo:.3g}, {hi:.3g}]")
    report.add_check("duality_identity", dual <= 1e-3, value=dual,
                     threshold=1e-3, detail="worst test function in suite")
    report.metrics.update({"weak_residual": weak["residual"],
                           "duality_gap": dual})
    residual_payload = {
        "seed": cfg.seed, "n": 0, "N": cfg.n_steps,
        "residual": weak["residual"],
        "terms": [weak["t1"], weak["t2"], weak["t3"], weak["t4"]],
    }
    report.add_artifact(write_json(out / "residual.json", residual_payload))
    report.add_artifact(write_csv(out / "snapshots.csv", ["t", "x", "u"],
                                  list(solution.snapshot_rows())))
    report.add_artifact(figures.snapshot_figure(
        x_grid, times, solution.values, out / "snapshots.png"))
    return report.finish()


def run_weak_residual(cfg: ExperimentConfig, out: Path,
                      resolutions=(256, 512, 1024)) -> RunReport:
    report = RunReport("weak-residual", cfg.to_dict())
    drift = make_drift(cfg) if cfg.drift in ("cos", "tanh", "constant") \
        else cos_drift(0.8)
    base_steps = max(2048, 2 * max(resolutions))
    sweep = weak_residual_sweep(drift, cfg.hurst, cfg.gamma,
                                resolutions=tuple(resolutions),
                                base_steps=base_steps, seed=cfg.seed,
                                horizon=cfg.horizon)
    report.add_check("residuals_monotone", sweep["monotone"],
                     detail=f"N in {list(resolutions)}, one nested driver")
    report.metrics.update({
        "residuals": [r["residual"] for r in sweep["rows"]],
        "base_steps": sweep["base_steps"],
    })
    rows = [(r["n_steps"], r["residual"], r["t1"], r["t2"], r["t3"], r["t4"])
            for r in sweep["rows"]]
    report.add_artifact(write_csv(out / "weak_residuals.csv",
                                  ["n_steps", "residual", "t1", "t2", "t3", "t4"],
                                  rows))
    report.add_artifact(figures.convergence_figure(
        [r[0] for r in rows], {"weak residual": [r[1] for r in rows]},
        out / "weak_residuals.png", "N", "weak-form residual refinement"))
    return report.finish()


def run_ibp(cfg: ExperimentConfig, out: Path, K: float = 50.0) -> RunReport:
    report = RunReport("ibp", cfg.to_dict())
    drift = compact_bump_drift(cfg.drift_value)
    n_steps = min(cfg.n_steps, 1024)
    grid = TimeGrid(cfg.horizon, n_steps)
    n_paths = min(cfg.n_paths, 40)
    result = ibp_check(drift, grid, cfg.horizon, None, K, n_paths,
                       cfg.hurst, seed=cfg.seed)
    gap = result["mean_relative_gap"]
    report.add_check("ibp_mean_relative_gap", gap <= 0.05, value=gap,
                     threshold=0.05,
                     detail=f"K={K:g}, {n_paths} paths, N={n_steps}")
    report.metrics.update({"lhs_mean": result["lhs_mean"],
                           "rhs_mean": result["rhs_mean"],
                           "per_path_gap_median": result["per_path_gap_median"],
                           "K": K, "n_paths": n_paths})
    report.add_artifact(write_csv(
        out / "ibp_paths.csv", ["path", "lhs", "rhs", "abs_gap"],
        [(i, float(l), float(r), float(abs(l - r)))
         for i, (l, r) in enumerate(zip(result["lhs"], result["rhs"]))]))
    path = sample_fbm(FbmConfig(hurst=cfg.hurst, grid=grid, seed=cfg.seed),
                      1).paths[0]
    y_grid = np.linspace(-1.4, 1.4, 561)
    slice_ = lambda_truncated(drift, path, grid, cfg.horizon, y_grid, K)
    report.add_artifact(write_csv(out / "lambda_field.csv", ["y", "value"],
                                  list(zip(y_grid, slice_.values))))
    running_max = float(np.max(np.abs(path)))
    report.add_artifact(figures.field_figure(
        y_grid, slice_.values, out / "lambda_field.png", support=running_max,
        title="occupation field slice"))
    return report.finish()


def run_moments(cfg: ExperimentConfig, out: Path) -> RunReport:
    report = RunReport("moments", cfg.to_dict())
    grid = cfg.grid()
    levels = (4, 16, 64)
    rows = derivative_moment_experiment(sign_drift(cfg.drift_value), cfg.hurst,
                                        min(cfg.n_paths, 500), grid,
                                        levels=levels, seed=cfg.seed)
    estimates = [r["estimate"] for r in rows]
    band = max(estimates) / min(estimates)
    report.add_check("derivative_moment_band", band <= 3.0, value=band,
                     threshold=3.0,
                     detail=f"E[(dphi)^2] across n in {list(levels)}")
    field_grid = TimeGrid(cfg.horizon, min(cfg.n_steps, 2048))
    y_grid = np.linspace(-1.05, 1.05, 211)
    field_rows = moment_experiment(compact_bump_drift(cfg.drift_value),
                                   cfg.hurst, field_grid, cfg.horizon, 0.0,
                                   y_grid, [2, 4], min(cfg.n_paths, 40), 25.0,
                                   seed=cfg.seed)
    cs = [r["fitted_c_integral"] for r in field_rows]
    stable = max(cs) / min(cs) if min(cs) > 0 else np.inf
    report.add_check("field_moment_constant_stable", stable <= 2.0,
                     value=stable, threshold=2.0,
                     detail="fitted envelope constant across m in {2, 4}")
    report.metrics.update({"derivative_moments": rows,
                           "field_moments": field_rows})
    report.add_artifact(write_json(out / "moment_tables.json",
                                   {"derivative_moments": rows,
                                    "field_moments": field_rows}))
    report.add_artifact(write_csv(
        out / "derivative_moments.csv", ["n", "estimate", "stderr"],
        [(r["n"], r["estimate"], r["stderr"]) for r in rows]))
    report.add_artifact(figures.band_figure(
        [r["n"] for r in rows], estimates, [r["stderr"] for r in rows],
        out / "derivative_moments.png"))
    return report.finish()


def run_girsanov(cfg: ExperimentConfig, out: Path) -> RunReport:
    report = RunReport("girsanov", cfg.to_dict())
    n_paths = max(cfg.n_paths, 20_000)
    grid = TimeGrid(cfg.horizon, 64)
    shift = 0.8
    zs = {}
    for hurst in (0.5, cfg.hurst):
        sample = sample_fbm(FbmConfig(hurst=hurst, grid=grid, seed=cfg.seed),
                            n_paths)
        w = girsanov_weight(sample, np.full(grid.n_points, shift)).weight
        vals = w * (sample.paths[:, -1] + shift * cfg.horizon)
        se = float(vals.std() / np.sqrt(n_paths))
        z = abs(float(vals.mean())) / se
        zs[hurst] = z
        name = "girsanov_mean_brownian" if hurst == 0.5 else "girsanov_mean_fbm"
        report.add_check(name, z <= 3.0, value=z, threshold=3.0,
                         detail=f"H={hurst}, reweighted terminal mean, "
                                f"{n_paths} paths")
        if hurst == cfg.hurst:
            report.add_artifact(write_csv(
                out / "weights.csv", ["path", "terminal", "weight"],
                [(i, float(sample.paths[i, -1]), float(w[i]))
                 for i in range(min(n_paths, 2000))]))
            report.add_artifact(figures.histogram_figure(
                np.log(w), out / "weights.png",
                f"log Girsanov weights, H={hurst}", "log w"))
    report.metrics.update({"z_scores": {str(k): v for k, v in zs.items()},
                           "shift": shift, "n_paths": n_paths})
    return report.finish()


def run_permanent(cfg: ExperimentConfig, out: Path) -> RunReport:
    report = RunReport("permanent", cfg.to_dict())
    bounds = bounds_check(12)
    report.add_check("polynomial_bounds", bounds["all_pass"],
                     detail="term counts, degrees, coefficients up to m=12")
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for m in range(1, 7):
        for _ in range(25):
            s = np.sort(rng.uniform(0.05, 3.0, size=m))
            spec = TridiagSpec(s=s, hurst=cfg.hurst)
            f = f_m_recursive(spec)
            b = brute_permanent(spec.matrix())
            worst = max(worst, abs(f - b) / abs(b))
    report.add_check("oracle_equivalence", worst <= 1e-12, value=worst,
                     threshold=1e-12, detail="recursion vs Ryser, m <= 6")
    estimates = [integral_estimate_check(m, cfg.hurst, seed=cfg.seed)
                 for m in (2, 3, 4)]
    ratio = max(e["lhs"] / e["envelope"] for e in estimates)
    report.add_check("gamma_envelope_rate", ratio <= 1.05, value=ratio,
                     threshold=1.05,
                     detail="simplex integral vs C^m/Gamma(m(1-3H)+1)")
    report.metrics["gamma_sequence"] = [gamma_m(m) for m in range(1, 13)]
    report.add_artifact(write_json(
        out / "integral_estimates.json",
        [{"m": e["m"], "H": e["hurst"], "lhs": e["lhs"],
          "envelope": e["envelope"], "fitted_C": e["fitted_c"]}
         for e in estimates]))
    poly = p_m_expand(6)
    report.add_artifact(write_csv(
        out / "polynomial_m6.csv", ["alpha", "coeff"],
        [("|".join(str(a) for a in alpha), c) for alpha, c in poly.terms()]))
    report.add_artifact(figures.envelope_figure(
        [e["m"] for e in estimates], [e["lhs"] for e in estimates],
        [e["envelope"] for e in estimates], out / "envelope.png"))
    return report.finish()


RUNNERS = {
    "sample-fbm": run_sample_fbm,
    "lift": run_lift,
    "integrate": run_integrate,
    "flow": run_flow,
    "inverse": run_inverse,
    "transport": run_transport,
    "weak-residual": run_weak_residual,
    "ibp": run_ibp,
    "moments": run_moments,
    "girsanov": run_girsanov,
    "permanent": run_permanent,
}


def run_all(cfg: ExperimentConfig, out: Path) -> RunReport:
    report = RunReport("all", cfg.to_dict())
    sub_reports = []
    for name in SUBCOMMANDS[:-1]:
        sub = RUNNERS[name](cfg, out.parent / name)
        sub_reports.append(sub)
        report.add_check(name, sub.passed,
                         detail=f"{len(sub.checks)} checks")
        sub.write(out.parent / name / "report.json")
    report.metrics["subcommands"] = [s.subcommand for s in sub_reports]
    report.add_artifact(write_json(
        out / "combined.json", {"reports": [s.to_dict() for s in sub_reports]}))
    return report.finish()


# --- sweep ----------------------------------------------------------------

def parse_grid(raw) -> dict:
    if raw is None:
        return {}
    grid = json.loads(raw) if isinstance(raw, str) else dict(raw)
    unknown = set(grid) - set(SWEEP_KEYS)
    if unknown:
        raise InputError(
            f"sweep grid keys must be among {list(SWEEP_KEYS)}, got "
            f"{sorted(unknown)}")
    for key, values in grid.items():
        if not isinstance(values, (list, tuple)) or not values:
            raise InputError(f"grid key {key!r} needs a non-empty list")
    return grid


def apply_point(cfg: ExperimentConfig, point: dict) -> ExperimentConfig:
    updates = {}
    if "H" in point:
        updates["hurst"] = float(point["H"])
    if "N" in point:
        updates["n_steps"] = int(point["N"])
    if "n_paths" in point:
        updates["n_paths"] = int(point["n_paths"])
    return replace(cfg, **updates).validate() if updates else cfg


def run_sweep(target: str, cfg: ExperimentConfig, grid: dict,
              out: Path) -> RunReport:
    report = RunReport("sweep", {**cfg.to_dict(), "target": target,
                                 "grid": grid})
    if not grid:
        report.metrics["rows"] = []
        report.add_artifact(write_json(out / "sweep.json",
                                       {"target": target, "rows": []}))
        return report.finish()

    if target == "weak-residual" and list(grid) == ["N"]:
        # one nested driver across the whole column, not a cross product
        resolutions = tuple(sorted(int(n) for n in grid["N"]))
        sub = run_weak_residual(cfg, out, resolutions=resolutions)
        rows = [{"N": n, "residual": float(res)}
                for n, res in zip(resolutions, sub.metrics["residuals"])]
        col = [r["residual"] for r in rows]
        report.add_check("residual_column_monotone",
                         all(b < a for a, b in zip(col, col[1:])),
                         detail=f"N grid {list(resolutions)}")
        report.metrics["rows"] = rows
        report.add_artifact(write_csv(out / "sweep.csv", ["N", "residual"],
                                      [(r["N"], r["residual"]) for r in rows]))
        report.add_artifact(write_json(out / "sweep.json",
                                       {"target": target, "rows": rows}))
        report.add_artifact(figures.convergence_figure(
            [r["N"] for r in rows], {"residual": col}, out / "sweep.png",
            "N", "weak-residual sweep"))
        return report.finish()

    if target == "ibp" and list(grid) == ["K"]:
        rows = []
        for K in grid["K"]:
            sub = run_ibp(cfg, out / f"K_{K:g}", K=float(K))
            rows.append({"K": float(K),
                         "mean_relative_gap": sub.checks[0].value,
                         "k_gap_proxy": sub.metrics["per_path_gap_median"]})
        col = [r["mean_relative_gap"] for r in rows]
        report.add_check("gap_column_decreasing",
                         all(b <= a * 1.05 for a, b in zip(col, col[1:])),
                         detail=f"K grid {list(grid['K'])}")
        report.metrics["rows"] = rows
        report.add_artifact(write_csv(
            out / "sweep.csv", ["K", "mean_relative_gap"],
            [(r["K"], r["mean_relative_gap"]) for r in rows]))
        report.add_artifact(write_json(out / "sweep.json",
                                       {"target": target, "rows": rows}))
        report.add_artifact(figures.convergence_figure(
            [r["K"] for r in rows], {"mean relative gap": col},
            out / "sweep.png", "K", "ibp truncation sweep"))
        return report.finish()

    keys = sorted(grid)
    rows = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        point = dict(zip(keys, combo))
        sub_cfg = apply_point(cfg, point)
        label = "_".join(f"{k}{v:g}" for k, v in point.items())
        sub = RUNNERS[target](sub_cfg, out / label)
        headline = sub.checks[0]
        rows.append({**point, "check": headline.name,
                     "value": headline.value, "passed": sub.passed})
    report.add_check("all_points_pass", all(r["passed"] for r in rows),
                     detail=f"{len(rows)} grid points of {target}")
    report.metrics["rows"] = rows
    report.add_artifact(write_csv(
        out / "sweep.csv", keys + ["check", "value", "passed"],
        [tuple(r[k] for k in keys) + (r["check"], r["value"], r["passed"])
         for r in rows]))
    report.add_artifact(write_json(out / "sweep.json",
                                   {"target": target, "rows": rows}))
    return report.finish()


# --- entry point ----------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH",
                        help="JSON or TOML config file")
    parser.add_argument("--seed", type=int, metavar="U64",
                        help="overrides the config seed")
    parser.add_argument("--out", metavar="DIR",
                        help="output directory (default runs/)")
    parser.add_argument("--threads", type=int, metavar="INT",
                        help="worker budget, recorded in the report")
    parser.add_argument("--json", action="store_true",
                        help="print the machine-readable report to stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roughflow",
        description="rough-path numerics experiments with CSV/JSON/PNG artifacts")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        _add_common(p)
    p = sub.add_parser("sweep", help="run one subcommand over a parameter grid")
    p.add_argument("target", choices=[s for s in SUBCOMMANDS if s != "all"])
    p.add_argument("--grid", metavar="JSON",
                   help='e.g. {"N": [256, 512, 1024]}; config "grid" key '
                        "is the file-based form")
    _add_common(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        if args.subcommand == "sweep":
            grid = parse_grid(args.grid)
            if not grid and args.config:
                grid = parse_grid(load_config_file(args.config).get("grid"))
            out = Path(cfg.out_dir) / f"sweep-{args.target}"
            report = run_sweep(args.target, cfg, grid, out)
        else:
            out = Path(cfg.out_dir) / args.subcommand
            report = RUNNERS.get(args.subcommand, run_all)(cfg, out)
    except ROUGHFLOW_ERRORS as err:
        usage = isinstance(err, (ParameterError, InputError))
        print(f"error: {err}", file=sys.stderr)
        return 2 if usage else 1

    report.write(out / "report.json")
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        for check in report.checks:
            print(check.line())
        print(f"report: {out / 'report.json'}")
    if not report.passed:
        print("failing checks: " + ", ".join(report.failing_checks),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
