"""Acceptance criteria 1 to 9, one test each, each printing a pass/fail line.

Run with ``pytest -v tests/test_acceptance.py``; the summary lines are
written straight to the terminal.
"""

from __future__ import annotations

import math
import time
from functools import lru_cache

import numpy as np
import pytest

from fracdrift.drift import assemble_drift, constant_field, rotational_field
from fracdrift.first_integrals import first_integral_space, min_rayleigh
from fracdrift.fractional import StableParams, assemble_fraclap, dirichlet_form, free_kernel
from fracdrift.geometry import Domain, build_grid
from fracdrift.kernel_series import SeriesConfig, kernel_sum, lattice_values, series_field
from fracdrift.montecarlo import PathConfig, estimate_lambda
from fracdrift.spectral import (CombinedOperator, boundary_decay_check, duality_check,
                                eigen_sweep, principal_eigenpair,
                                recursion_identity_residual)

from oracles import DISK_EIGENVALUE

AMPLITUDES = (0.0, 10.0, 40.0, 160.0)
H = 0.05
DISK = Domain.disk()


def report(capsys, number: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")


@lru_cache(maxsize=None)
def diffusion(h: float, alpha: float = 1.5):
    grid = build_grid(DISK, h)
    return assemble_fraclap(grid, StableParams(alpha))


@lru_cache(maxsize=None)
def ground_state(h: float, alpha: float = 1.5):
    return principal_eigenpair(CombinedOperator(diffusion(h, alpha)))


@lru_cache(maxsize=None)
def rotational_sweep():
    t0 = time.perf_counter()
    K = diffusion(H)
    drift = assemble_drift(K.grid, rotational_field())
    sweep = eigen_sweep(K, drift, AMPLITUDES)
    return drift, sweep, time.perf_counter() - t0


@lru_cache(maxsize=None)
def rotational_space():
    drift, _, _ = rotational_sweep()
    space = first_integral_space(drift)
    return space, min_rayleigh(diffusion(H), space)


def test_criterion_1_rotational_sweep_is_flat(capsys):
    _, sweep, seconds = rotational_sweep()
    spread = sweep.spread()
    ok = spread < 1e-4 and seconds < 120
    lam = ", ".join(f"{v:.10f}" for v in sweep.eigenvalues)
    report(capsys, 1, ok, f"lambda = [{lam}], spread {spread:.2e} (< 1e-4), "
                          f"{seconds:.1f} s (< 120 s)")
    assert ok


def test_criterion_2_limit_equals_first_integral_minimum(capsys):
    _, sweep, _ = rotational_sweep()
    space, res = rotational_space()
    lam_max = sweep.rows[-1].lam
    gap = abs(lam_max - res.e_star) / res.e_star
    phi0 = sweep.pairs[0].phi
    grid = space.grid
    err = min(grid.norm(res.w_star - phi0), grid.norm(res.w_star + phi0))
    ok = gap < 1e-3 and err < 1e-3
    report(capsys, 2, ok, f"k = {res.k}, e* = {res.e_star:.10f}, lambda(160) = {lam_max:.10f}, "
                          f"gap {gap:.2e} (< 1e-3), |w* - phi0| = {err:.2e} (< 1e-3)")
    assert ok


def test_criterion_3_no_first_integrals_blow_up(capsys):
    K = diffusion(H)
    drift = assemble_drift(K.grid, constant_field((1.0, 0.0)))
    space = first_integral_space(drift)
    sweep = eigen_sweep(K, drift, AMPLITUDES)
    lam = sweep.eigenvalues
    ratio = lam[-1] / lam[0]
    increasing = bool(np.all(np.diff(lam) > 0))
    e_star = min_rayleigh(K, space).e_star
    ok = space.k == 0 and math.isinf(e_star) and ratio > 5 and increasing
    imag = ", ".join(f"{r.imag:.3g}" for r in sweep.rows)
    report(capsys, 3, ok, f"k = {space.k}, lambda = [{', '.join(f'{v:.4f}' for v in lam)}] "
                          f"(imaginary parts [{imag}]), ratio {ratio:.1f} (> 5), "
                          f"strictly increasing {increasing}")
    assert ok


def test_criterion_4_upper_bound_by_first_integrals(capsys):
    _, sweep, _ = rotational_sweep()
    space, _ = rotational_space()
    K = diffusion(H)
    h2 = K.grid.h ** 2
    Z = space.basis
    norms = np.sqrt(np.sum(Z**2, axis=0) * h2)
    energies = np.einsum("ik,ik->k", Z, K.matrix @ Z) * h2 / norms**2
    # cross-check one energy through the bilinear form helper
    assert energies[0] == pytest.approx(dirichlet_form(Z[:, 0], Z[:, 0], K) / norms[0] ** 2)
    bound = energies * (1 + 1e-6) + 1e-8
    worst = max(float(np.max(row.lam - bound)) for row in sweep.rows)
    # the same bound for the best unit first integral in the whole space
    e_star = rotational_space()[1].e_star
    worst_span = max(row.lam - (e_star * (1 + 1e-6) + 1e-8) for row in sweep.rows)
    ok = worst <= 0 and worst_span <= 0
    report(capsys, 4, ok, f"{space.k} basis functions x {len(sweep.rows)} amplitudes, "
                          f"max(lambda_A - bound) = {worst:.3e} (<= 0); over the span "
                          f"e* = {e_star:.10f}, max(lambda_A - bound) = {worst_span:.3e} (<= 0)")
    assert ok


def test_criterion_5_structural_identities(capsys):
    drift, _, _ = rotational_sweep()
    op = CombinedOperator(diffusion(H), drift, AMPLITUDES[-1])
    residual = recursion_identity_residual(op)
    dual = duality_check(op)
    rng = np.random.default_rng(0)
    skew = 0.0
    for _ in range(20):
        f = rng.standard_normal(op.grid.n_interior)
        bf = drift.unit @ f
        skew = max(skew, abs(float(f @ bf)) / (np.linalg.norm(bf) * np.linalg.norm(f)))
    ok = residual < 1e-10 and dual == 0.0 and skew < 1e-12
    report(capsys, 5, ok, f"recursion residual {residual:.2e} (< 1e-10), "
                          f"duality defect {dual:.1e} (exact 0), skewness {skew:.1e} (< 1e-12)")
    assert ok


def _slopes(h: float, alpha: float) -> tuple[float, float]:
    K = diffusion(h, alpha)
    phi = ground_state(h, alpha).phi
    g1 = np.linalg.solve(K.matrix, np.ones(K.grid.n_interior))
    return boundary_decay_check(phi, K.grid), boundary_decay_check(g1, K.grid)


def test_criterion_6_boundary_decay(capsys):
    lines = []
    ok = True
    for alpha in (1.5, 1.2):
        target = alpha / 2
        s_phi, s_g = _slopes(H, alpha)
        good = abs(s_phi - target) <= 0.1 and abs(s_g - target) <= 0.1
        ok &= good
        fine_phi, fine_g = _slopes(0.025, alpha)
        lines.append(f"alpha {alpha}: phi0 {s_phi:.3f}, G1 {s_g:.3f} "
                     f"(target {target:.2f} +- 0.1; h = 0.025 gives {fine_phi:.3f}, {fine_g:.3f})")
    report(capsys, 6, ok, "; ".join(lines))
    assert ok


def _lattice_mass(lat, coeffs) -> float:
    return float(np.sum(lattice_values(lat, coeffs)) * lat.spacing**2)


def _free_mass(t: float, params: StableParams, radius: float) -> float:
    total = 0.0
    edges = np.concatenate([[0.0], np.geomspace(0.5, radius, 8)])
    x, w = np.polynomial.legendre.leggauss(200)
    for lo, hi in zip(edges[:-1], edges[1:]):
        r = 0.5 * (hi - lo) * (x + 1) + lo
        pts = np.stack([r, np.zeros_like(r)], axis=1)
        total += 0.5 * (hi - lo) * np.sum(w * 2 * math.pi * r * free_kernel(t, pts, params))
    return total


def test_criterion_7_kernel_series_structure(capsys):
    t0 = time.perf_counter()
    params = StableParams(1.5)
    vf = rotational_field()
    cfg = SeriesConfig()
    t = 0.5
    points = [np.array(p) for p in ((0.2, 0.0), (0.0, 0.3), (-0.25, 0.1), (0.1, -0.2))]
    table = {}
    for i, x in enumerate(points):
        others = [p for j, p in enumerate(points) if j != i]
        for j, ev in zip([j for j in range(4) if j != i], kernel_sum(2, t, x, others, vf, params, cfg)):
            table[i, j] = ev.terms
    worst = {1: 0.0, 2: 0.0}
    for i in range(4):
        for j in range(i + 1, 4):
            for n in (1, 2):
                a, b = table[i, j][n], table[j, i][n]
                worst[n] = max(worst[n], abs(a - (-1) ** n * b) / max(abs(a), abs(b)))
    # mass of the partial sum in y, and in x through the reversed field
    masses = []
    for field in (vf, vf.negated()):
        m = _free_mass(t, params, 30.0)
        for n in (1, 2):
            lat, coeffs = series_field(n, t, points[0], field, params, cfg)
            m += _lattice_mass(lat, coeffs)
        masses.append(m)
    seconds = time.perf_counter() - t0
    ok = (worst[1] < 2e-2 and worst[2] < 2e-2 and all(abs(m - 1) < 2e-2 for m in masses)
          and seconds < 300)
    report(capsys, 7, ok, f"6 pairs: p1 antisymmetry {worst[1]:.2e}, p2 symmetry {worst[2]:.2e} "
                          f"(< 2e-2); mass {masses[0]:.5f}, dual mass {masses[1]:.5f} "
                          f"(1 +- 2e-2); {seconds:.0f} s (< 300 s)")
    assert ok


def test_criterion_8_monte_carlo(capsys):
    t0 = time.perf_counter()
    params = StableParams(1.5)
    cfg = PathConfig(dt=1e-3, t_max=4.0, n_paths=200_000, seed=2024)
    free = estimate_lambda(DISK, None, 0.0, params, cfg)
    rot = estimate_lambda(DISK, rotational_field(), 40.0, params, cfg)
    const = estimate_lambda(DISK, constant_field((1.0, 0.0)), 40.0, params, cfg)
    seconds = time.perf_counter() - t0
    lam_fine = ground_state(0.025).lam
    lam_mid = ground_state(H).lam
    z_fine = abs(free.lambda_hat - lam_fine) / free.stderr
    z_mid = abs(free.lambda_hat - lam_mid) / free.stderr
    z_rot = abs(rot.lambda_hat - free.lambda_hat) / math.hypot(rot.stderr, free.stderr)
    ratio = const.lambda_hat / free.lambda_hat
    ok = z_fine < 3 and z_rot < 3 and ratio > 3 and seconds < 600
    report(capsys, 8, ok,
           f"lambda_hat(0) = {free.lambda_hat:.4f} +- {free.stderr:.4f}; grid h=0.025 "
           f"{lam_fine:.4f} ({z_fine:.2f} SE), h=0.05 {lam_mid:.4f} ({z_mid:.2f} SE), "
           f"continuum {DISK_EIGENVALUE[1.5]:.4f}; rotational A=40 {rot.lambda_hat:.4f} "
           f"({z_rot:.2f} SE); constant A=40 ratio {ratio:.1f} (> 3); {seconds:.0f} s (< 600 s)")
    assert ok


def test_criterion_9_grid_convergence(capsys):
    hs = (0.1, 0.05, 0.025)
    lam = np.array([ground_state(h).lam for h in hs])
    inc = np.diff(lam)
    monotone = bool(np.all(inc > 0) or np.all(inc < 0))
    ratio = inc[0] / inc[1]
    order = math.log2(ratio) if ratio > 0 else float("nan")
    extrap = lam[-1] + inc[1] / (ratio - 1) if ratio > 1 else float("nan")
    err = DISK_EIGENVALUE[1.5] - lam
    ok = monotone and ratio >= 1.5
    report(capsys, 9, ok, f"lambda0 = [{', '.join(f'{v:.6f}' for v in lam)}], increments "
                          f"[{inc[0]:.5f}, {inc[1]:.5f}], ratio {ratio:.2f} (>= 1.5), observed "
                          f"order {order:.2f}, extrapolated {extrap:.4f}; continuum "
                          f"{DISK_EIGENVALUE[1.5]:.4f}, errors [{', '.join(f'{e:.4f}' for e in err)}]"
                          f" shrink by {err[0] / err[1]:.2f}, {err[1] / err[2]:.2f}")
    assert ok
