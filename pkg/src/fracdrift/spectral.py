"""Green operators and the principal eigenpair of ``L_A = Δ^{α/2} + A b·∇``.

Everything is expressed through the dense matrix ``M_A = K - A B`` of
``-L_A``, where ``K`` is the lattice matrix of ``-Δ^{α/2}`` and ``B`` the
transport matrix at unit amplitude.  The killed Green operator is ``M_A^{-1}``.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .drift import DriftOperator
from .fractional import DiffusionOperator
from .geometry import Grid

__all__ = [
    "ConvergenceError",
    "CombinedOperator",
    "EigenPair",
    "SweepRow",
    "SweepResult",
    "green_apply",
    "principal_eigenpair",
    "recursion_identity_residual",
    "perturbation_norm",
    "duality_check",
    "eigen_sweep",
    "boundary_decay_check",
    "c4_orbit_deviation",
]


class ConvergenceError(RuntimeError):
    """Inverse iteration stopped before meeting its tolerances."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


@dataclass
class CombinedOperator:
    """``-L_A`` on the interior nodes, with a cached LU factorisation."""

    diffusion: DiffusionOperator
    drift: DriftOperator | None = None
    amplitude: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.diffusion.grid

    @cached_property
    def transport(self) -> np.ndarray:
        """Dense ``A B``."""
        if self.drift is None or self.amplitude == 0.0:
            return np.zeros_like(self.diffusion.matrix)
        return self.amplitude * self.drift.unit.toarray()

    @cached_property
    def matrix(self) -> np.ndarray:
        return self.diffusion.matrix - self.transport

    @cached_property
    def lu(self):
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("operator has non-finite entries")
        return sla.lu_factor(self.matrix, check_finite=False)

    def apply(self, f) -> np.ndarray:
        """``L_A f``."""
        return -(self.matrix @ np.asarray(f, dtype=float))

    def solve(self, f, trans: bool = False) -> np.ndarray:
        return sla.lu_solve(self.lu, np.asarray(f, dtype=float), trans=int(trans))

    def with_amplitude(self, amplitude: float) -> "CombinedOperator":
        return CombinedOperator(self.diffusion, self.drift, float(amplitude))


def green_apply(op: CombinedOperator, f) -> np.ndarray:
    """``u = G̃_D f``, the solution of ``-L_A u = f`` with zero exterior data."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] != op.grid.n_interior:
        raise ValueError("right-hand side does not match the grid")
    u = op.solve(f)
    if not np.all(np.isfinite(u)):
        raise np.linalg.LinAlgError("singular operator")
    return u


@dataclass
class EigenPair:
    """Principal eigenvalue ``λ`` and eigenfunction ``φ`` with unit L2 norm.

    When the eigenvalues of smallest real part form a complex pair, ``lam`` is
    their common real part (the decay rate), ``imag`` is non-zero and ``phi``
    is the real part of the eigenvector, scaled to unit norm.
    """

    lam: float
    phi: np.ndarray = field(repr=False)
    residual: float
    iterations: int
    imag: float = 0.0
    positive: bool = True

    @property
    def is_real(self) -> bool:
        return self.imag == 0.0


def _start_block(grid: Grid, start) -> np.ndarray:
    n = grid.n_interior
    first = np.ones(n) if start is None else np.asarray(start, dtype=float).copy()
    if first.shape != (n,):
        raise ValueError("start vector does not match the grid")
    c = np.asarray(grid.domain.center)
    q = grid.points - c
    second = q[:, 0] + 0.37 * q[:, 1] + 0.11 * (q[:, 0] ** 2 - q[:, 1] ** 2)
    Q, _ = np.linalg.qr(np.stack([first, second], axis=1))
    return Q


def principal_eigenpair(op: CombinedOperator, tol: float = 1e-9, max_iter: int = 5000,
                        start=None) -> EigenPair:
    """Inverse subspace iteration with shift zero and a two-vector block.

    The block follows the smallest-modulus eigenvalues of ``-L_A``.  A single
    real mode is the usual Perron case; the second vector also lets the
    iteration lock onto a complex-conjugate pair when the centred transport
    produces one.  Stops when the eigenvalue increment is below ``tol`` and
    the residual is below ``10 tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    M = op.matrix
    h = op.grid.h
    Q = _start_block(op.grid, start)
    prev = np.inf
    residual = np.inf
    for it in range(1, max_iter + 1):
        Q, _ = np.linalg.qr(op.solve(Q))
        MQ = M @ Q
        T = Q.T @ MQ
        theta, Y = np.linalg.eig(T)
        k = int(np.argmin(theta.real))
        lam = float(theta[k].real)
        imag = float(abs(theta[k].imag))
        if imag > 1e-12 * max(1.0, abs(lam)):
            residual = float(np.linalg.norm(MQ - Q @ T, 2))
            vec = (Q @ Y[:, k]).real
        else:
            imag = 0.0
            y = Y[:, k].real
            vec = Q @ (y / np.linalg.norm(y))
            residual = float(np.linalg.norm(M @ vec - lam * vec))
        if abs(lam - prev) < tol and residual < 10 * tol:
            break
        prev = lam
    else:
        raise ConvergenceError("inverse iteration did not converge", residual, max_iter)
    if vec.sum() < 0:
        vec = -vec
    phi = vec / (np.linalg.norm(vec) * h)
    return EigenPair(lam, phi, residual, it, imag, bool(imag == 0.0 and phi.min() > 0))


def recursion_identity_residual(op: CombinedOperator, n_probes: int = 20,
                                seed: int = 0) -> float:
    """Largest relative defect of ``G̃_D (I - H) = G_D`` over random probes.

    Here ``G_D = K^{-1}`` is the Green operator without drift, ``G̃_D`` the one
    with drift and ``H = A B G_D``.
    """
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((op.grid.n_interior, n_probes))
    GV = sla.lu_solve(sla.lu_factor(op.diffusion.matrix), V)
    lhs = op.solve(V - op.transport @ GV)
    return float(np.max(np.linalg.norm(lhs - GV, axis=0) / np.linalg.norm(GV, axis=0)))


def perturbation_norm(op: CombinedOperator, iters: int = 60, seed: int = 0) -> float:
    """Power-iteration estimate of the L2 operator norm of ``H = A B G_D``."""
    chol = sla.cho_factor(op.diffusion.matrix)
    T = op.transport
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.grid.n_interior)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = T @ sla.cho_solve(chol, v)
        w = sla.cho_solve(chol, T.T @ w)
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return 0.0
        v = w / est
    return float(np.sqrt(est))


def duality_check(op: CombinedOperator) -> float:
    """Largest entry of ``(L_A)ᵀ - L_{-A}``."""
    return float(np.max(np.abs(op.matrix.T - op.with_amplitude(-op.amplitude).matrix)))


@dataclass
class SweepRow:
    A: float
    lam: float
    iters: int
    residual: float
    seconds: float
    imag: float = 0.0
    positive: bool = True


@dataclass
class SweepResult:
    rows: list[SweepRow]
    pairs: list[EigenPair] = field(repr=False)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([r.A for r in self.rows])

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([r.lam for r in self.rows])

    def spread(self) -> float:
        lam = self.eigenvalues
        return float((lam.max() - lam.min()) / abs(lam[0]))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["A", "lambda", "iters", "residual", "seconds"])
            for r in self.rows:
                w.writerow([f"{r.A:.17g}", f"{r.lam:.17g}", r.iters,
                            f"{r.residual:.17g}", f"{r.seconds:.17g}"])


def eigen_sweep(diffusion: DiffusionOperator, drift: DriftOperator | None,
                amplitudes, tol: float = 1e-9, warm_start: bool = True,
                max_iter: int = 5000) -> SweepResult:
    """Principal eigenpairs along a list of amplitudes, warm started in order."""
    amps = [float(a) for a in amplitudes]
    if not amps:
        raise ValueError("empty amplitude list")
    rows, pairs = [], []
    start = None
    for A in amps:
        t0 = time.perf_counter()
        op = CombinedOperator(diffusion, drift, A)
        pair = principal_eigenpair(op, tol=tol, max_iter=max_iter, start=start)
        rows.append(SweepRow(A, pair.lam, pair.iterations, pair.residual,
                             time.perf_counter() - t0, pair.imag, pair.positive))
        pairs.append(pair)
        if warm_start and pair.is_real:
            start = pair.phi
    return SweepResult(rows, pairs)


def boundary_decay_check(values, grid: Grid, delta_max: float = 0.2,
                         delta_min: float | None = None) -> float:
    """Least-squares slope of ``log u`` against ``log δ`` near the boundary.

    Nodes closer to the boundary than ``delta_min`` (default one spacing) are
    left out: within one cell the lattice solution is set by where the
    exterior nodes fall, not by the boundary profile.
    """
    u = np.asarray(values, dtype=float)
    if delta_min is None:
        delta_min = grid.h
    sel = (grid.delta < delta_max) & (grid.delta >= delta_min)
    if sel.sum() < 3:
        raise ValueError("too few nodes in the boundary layer")
    if np.any(u[sel] <= 0):
        raise ValueError("values must be positive in the boundary layer")
    slope, _ = np.polyfit(np.log(grid.delta[sel]), np.log(u[sel]), 1)
    return float(slope)


def c4_orbit_deviation(values, grid: Grid) -> float:
    """Largest change of a lattice function under quarter turns about the centre."""
    box = grid.to_box(np.asarray(values, dtype=float))
    if grid.nx != grid.ny:
        raise ValueError("quarter turns need a square box")
    return float(max(np.max(np.abs(np.rot90(box, k) - box)) for k in (1, 2, 3)))
