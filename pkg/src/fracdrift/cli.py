"""Command line entry point: ``fracdrift {sweep,checks,mc,kernel-series,first-integrals}``.

Exit codes: 0 success, 1 a check failed, 2 configuration error, 3 numerical
failure (the message names the stage).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .drift import (DriftOperator, Profile, VectorField, assemble_drift, check_peclet,
                    compressible_field, constant_field, field_from_stream_table,
                    rotational_field)
from .first_integrals import first_integral_space, min_rayleigh
from .fractional import (DiffusionOperator, StableParams, assemble_fraclap,
                         lattice_symbol)
from .geometry import Domain, Grid, GridTooCoarse, build_grid
from .kernel_series import QuadratureError, SeriesConfig, kernel_sum, write_probe_csv
from .montecarlo import EstimatorError, PathConfig, estimate_lambda
from .spectral import (CombinedOperator, ConvergenceError, boundary_decay_check,
                       duality_check, eigen_sweep, principal_eigenpair,
                       recursion_identity_residual)

__all__ = ["main", "Problem", "build_problem", "run_sweep", "run_checks", "run_mc",
           "run_kernel_series", "run_first_integrals"]


class NumericalFailure(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage


@dataclass
class Problem:
    config: RunConfig
    domain: Domain
    grid: Grid
    params: StableParams
    diffusion: DiffusionOperator
    field: VectorField | None
    drift: DriftOperator | None


def make_domain(cfg: RunConfig) -> Domain:
    try:
        if cfg.domain_kind == "disk":
            return Domain.disk(cfg.domain_radius)
        if cfg.domain_kind == "annulus":
            return Domain.annulus(cfg.domain_inner_radius, cfg.domain_radius)
        return Domain.rect(cfg.domain_half_widths, cfg.domain_corner_radius)
    except ValueError as exc:
        raise ConfigError(f"domain: {exc}") from None


def make_field(cfg: RunConfig, grid: Grid | None = None) -> VectorField | None:
    kind = cfg.field_kind
    if kind == "none":
        return None
    if kind == "rotational":
        return rotational_field(Profile.parse(cfg.field_profile))
    if kind == "constant":
        return constant_field(cfg.field_direction)
    if kind == "compressible":
        return compressible_field()
    try:
        return field_from_stream_table(cfg.field_table, grid)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"field.table: {exc}") from None


def build_problem(cfg: RunConfig, h: float | None = None) -> Problem:
    domain = make_domain(cfg)
    params = StableParams(cfg.alpha)
    try:
        grid = build_grid(domain, cfg.grid_h if h is None else h)
    except GridTooCoarse as exc:
        raise ConfigError(f"grid.h: {exc}") from None
    diffusion = assemble_fraclap(grid, params)
    vf = make_field(cfg, grid)
    drift = None if vf is None else assemble_drift(grid, vf, 1.0, cfg.field_order)
    return Problem(cfg, domain, grid, params, diffusion, vf, drift)


# ---------------------------------------------------------------- outputs

class Outputs:
    """Writes files into the output directory, each with a manifest."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.dir = Path(cfg.out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.t0 = time.perf_counter()
        self.written: list[Path] = []

    def _manifest(self, path: Path) -> None:
        info = {
            "file": path.name,
            "command": self.command,
            "config_hash": self.cfg.digest,
            "version": __version__,
            "wall_time_seconds": time.perf_counter() - self.t0,
        }
        with open(path.with_name(path.name + ".manifest.json"), "w") as fh:
            json.dump(info, fh, indent=2)

    def json(self, name: str, data) -> Path:
        path = self.dir / name
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2)
            fh.write("\n")
        self._manifest(path)
        self.written.append(path)
        return path

    def csv(self, name: str, header, rows) -> Path:
        path = self.dir / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_num(v) for v in row])
        self._manifest(path)
        self.written.append(path)
        return path

    def via(self, name: str, writer) -> Path:
        path = self.dir / name
        writer(path)
        self._manifest(path)
        self.written.append(path)
        return path


def _num(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return v


def _jnum(v):
    """JSON-safe number with the infinite sentinel spelled out."""
    if v is None:
        return None
    v = float(v)
    if math.isinf(v):
        return "inf"
    return v


def _tag(a: float) -> str:
    return f"A{a:g}"


# ---------------------------------------------------------------- commands

def _first_integral_summary(problem: Problem, lam_max: float | None):
    if problem.drift is None:
        k = problem.grid.n_interior
        w = principal_eigenpair(CombinedOperator(problem.diffusion))
        return {"k": k, "e_star": w.lam, "lambda_limit_gap": None}, None, None
    try:
        space = first_integral_space(problem.drift, problem.config.tol_svd)
    except ValueError as exc:
        return {"k": None, "e_star": None, "lambda_limit_gap": None,
                "note": str(exc)}, None, None
    res = min_rayleigh(problem.diffusion, space)
    gap = None
    if lam_max is not None and math.isfinite(res.e_star):
        gap = abs(lam_max - res.e_star) / res.e_star
    summary = {"k": res.k, "e_star": _jnum(res.e_star), "lambda_limit_gap": gap,
               "svd_threshold": problem.config.tol_svd}
    return summary, space, res


def run_sweep(cfg: RunConfig) -> int:
    problem = build_problem(cfg)
    out = Outputs(cfg, "sweep")
    if problem.drift is not None:
        for a in cfg.sweep_A:
            check_peclet(a, problem.drift, problem.params)
    try:
        sweep = eigen_sweep(problem.diffusion, problem.drift, cfg.sweep_A, cfg.tol_eigen)
    except ConvergenceError as exc:
        raise NumericalFailure("eigen sweep", exc) from None
    out.via("sweep.csv", sweep.write_csv)
    pts = problem.grid.points
    for row, pair in zip(sweep.rows, sweep.pairs):
        out.csv(f"eigenfunction_{_tag(row.A)}.csv", ["x1", "x2", "phi"],
                zip(pts[:, 0], pts[:, 1], pair.phi))
    a_max = int(np.argmax(np.abs(sweep.amplitudes)))
    summary, space, _ = _first_integral_summary(problem, sweep.rows[a_max].lam)
    lam = sweep.eigenvalues
    summary.update({
        "A": [float(a) for a in sweep.amplitudes],
        "lambda": [float(v) for v in lam],
        "lambda_imag": [float(r.imag) for r in sweep.rows],
        "ratio_max_to_zero": float(lam[a_max] / lam[0]),
    })
    out.json("first_integrals.json", summary)
    if space is not None:
        out.csv("singular_values.csv", ["index", "sigma"], enumerate(space.singular_values))
    return 0


def run_first_integrals(cfg: RunConfig) -> int:
    problem = build_problem(cfg)
    out = Outputs(cfg, "first-integrals")
    summary, space, res = _first_integral_summary(problem, None)
    out.json("first_integrals.json", summary)
    if space is not None:
        out.csv("singular_values.csv", ["index", "sigma"], enumerate(space.singular_values))
        pts = problem.grid.points
        out.csv("minimizer.csv", ["x1", "x2", "w"], zip(pts[:, 0], pts[:, 1], res.w_star))
    return 0


def _check(value, threshold, passed) -> dict:
    return {"value": _jnum(value), "threshold": threshold, "pass": bool(passed)}


def run_checks(cfg: RunConfig) -> int:
    problem = build_problem(cfg)
    out = Outputs(cfg, "checks")
    a_max = max(cfg.sweep_A, key=abs)
    op = CombinedOperator(problem.diffusion, problem.drift, a_max)
    checks = {}
    res = recursion_identity_residual(op)
    checks["recursion_residual"] = _check(res, 1e-10, res < 1e-10)
    scale = float(np.max(np.abs(op.matrix)))
    dual = duality_check(op)
    checks["duality"] = _check(dual, 1e-14 * scale, dual <= 1e-14 * scale)
    if problem.drift is None:
        skew = 0.0
    else:
        rng = np.random.default_rng(cfg.seed)
        B = problem.drift.unit
        skew = 0.0
        for _ in range(10):
            f = rng.standard_normal(problem.grid.n_interior)
            bf = B @ f
            denom = np.linalg.norm(bf) * np.linalg.norm(f)
            if denom > 0:
                skew = max(skew, abs(float(f @ bf)) / denom)
    checks["skewness"] = _check(skew, 1e-12, skew <= 1e-12)
    try:
        pair = principal_eigenpair(CombinedOperator(problem.diffusion), cfg.tol_eigen)
    except ConvergenceError as exc:
        raise NumericalFailure("principal eigenpair", exc) from None
    target = cfg.alpha / 2
    try:
        slope = boundary_decay_check(pair.phi, problem.grid)
    except ValueError as exc:
        checks["boundary_decay_slope"] = {"value": None, "threshold": [target - 0.1, target + 0.1],
                                          "pass": False, "note": str(exc)}
    else:
        checks["boundary_decay_slope"] = _check(slope, [target - 0.1, target + 0.1],
                                                abs(slope - target) <= 0.1)
    sym = lattice_symbol((2.0, 0.0), cfg.grid_h, problem.params)
    err = abs(sym / 2.0 ** cfg.alpha - 1.0)
    checks["symbol_accuracy"] = _check(err, 0.05, err < 0.05)
    all_pass = all(c["pass"] for c in checks.values())
    out.json("checks.json", {"checks": checks, "all_pass": all_pass, "A": a_max})
    for name, c in checks.items():
        print(f"{name}: {'pass' if c['pass'] else 'FAIL'} ({c['value']})")
    return 0 if all_pass else 1


def run_mc(cfg: RunConfig) -> int:
    domain = make_domain(cfg)
    params = StableParams(cfg.alpha)
    vf = make_field(cfg, None) if cfg.field_kind != "table" else None
    if cfg.field_kind == "table":
        problem = build_problem(cfg)
        vf = problem.field
    out = Outputs(cfg, "mc")
    pcfg = PathConfig(dt=cfg.mc_dt, t_max=cfg.mc_t_max, n_paths=cfg.mc_n_paths,
                      seed=cfg.seed, h_eff=cfg.grid_h)
    grid_lam0 = None
    for a in cfg.mc_A:
        try:
            curve = estimate_lambda(domain, vf, a, params, pcfg)
        except (EstimatorError, ValueError) as exc:
            raise NumericalFailure(f"Monte Carlo at A={a:g}", exc) from None
        summary = curve.summary()
        if a == 0.0:
            if grid_lam0 is None:
                base = build_problem(cfg)
                grid_lam0 = principal_eigenpair(CombinedOperator(base.diffusion),
                                                cfg.tol_eigen).lam
            summary["grid_lambda0"] = grid_lam0
            summary["grid_h"] = cfg.grid_h
            summary["consistent_with_grid"] = bool(
                abs(curve.lambda_hat - grid_lam0) <= 3 * curve.stderr)
        out.via(f"survival_{_tag(a)}.csv", curve.write_csv)
        out.json(f"mc_summary_{_tag(a)}.json", summary)
    return 0


def run_kernel_series(cfg: RunConfig) -> int:
    params = StableParams(cfg.alpha)
    vf = make_field(cfg, None)
    if vf is None:
        vf = constant_field((0.0, 0.0))
    out = Outputs(cfg, "kernel-series")
    scfg = SeriesConfig(spacing=cfg.series_spacing, n_time=cfg.series_n_time,
                        check_tol=cfg.tol_quadrature)
    evaluations = []
    pts = [np.asarray(p) for p in cfg.series_points]
    for i, x in enumerate(pts):
        others = [p for j, p in enumerate(pts) if j != i]
        try:
            evaluations += kernel_sum(cfg.series_order, cfg.series_t, x, others, vf,
                                      params, scfg)
        except QuadratureError as exc:
            raise NumericalFailure("kernel series quadrature", exc) from None
    out.via("kernel_series.csv", lambda p: write_probe_csv(p, evaluations))
    return 0


COMMANDS = {
    "sweep": run_sweep,
    "checks": run_checks,
    "mc": run_mc,
    "kernel-series": run_kernel_series,
    "first-integrals": run_first_integrals,
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracdrift", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=str, default=None, help="flat key = value file")
        s.add_argument("--out", type=str, default=None, help="output directory override")
        s.add_argument("--seed", type=int, default=None, help="seed override")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = cfg.with_overrides(out_dir=args.out, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure in {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
