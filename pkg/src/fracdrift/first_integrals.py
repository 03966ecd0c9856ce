"""First integrals of the flow and the constrained Rayleigh minimum.

A first integral is a function constant along the streamlines of b.  On the
lattice it is a (near) null vector of the transport matrix B.  The numerical
kernel is taken from the SVD of B with a relative threshold: singular values
of genuine first integrals sit at the truncation level of the stencil, while
the remaining spectrum starts at the scale of the slowest resolved transport.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.interpolate import RegularGridInterpolator

from .drift import DriftOperator, VectorField
from .fractional import DiffusionOperator
from .geometry import Grid

__all__ = [
    "FirstIntegralSpace",
    "MinimizerResult",
    "FlowExit",
    "first_integral_space",
    "min_rayleigh",
    "integrate_flow",
    "invariance_check",
    "truncation_closure",
    "conditioning_identity_check",
    "pair_identity",
]

DEFAULT_THRESHOLD = 1e-3


@dataclass
class FirstIntegralSpace:
    """Orthonormal basis (h^2-weighted) of the numerical kernel of B."""

    grid: Grid
    basis: np.ndarray = field(repr=False)
    singular_values: np.ndarray = field(repr=False)
    threshold: float

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    def project(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        h2 = self.grid.h ** 2
        return self.basis @ (self.basis.T @ f * h2)

    def distance(self, f) -> float:
        """L2 distance from ``f`` to the space."""
        f = np.asarray(f, dtype=float)
        return self.grid.norm(f - self.project(f))


@dataclass
class MinimizerResult:
    e_star: float
    w_star: np.ndarray = field(repr=False)
    k: int


class FlowExit(RuntimeError):
    """A trajectory left the bounding box before the final time."""

    def __init__(self, exit_time: float, point: np.ndarray):
        super().__init__(f"trajectory left the box at t={exit_time:.6g}")
        self.exit_time = exit_time
        self.point = point


def first_integral_space(drift: DriftOperator,
                         svd_threshold: float = DEFAULT_THRESHOLD) -> FirstIntegralSpace:
    """Numerical kernel of the unit-amplitude transport matrix.

    Right singular vectors with ``σ ≤ svd_threshold · σ_max`` span the space.
    A vanishing field makes every lattice function a first integral.
    """
    if not 0 < svd_threshold < 1:
        raise ValueError("svd_threshold must lie in (0, 1)")
    B = drift.unit
    scale = abs(B).max() if B.nnz else 0.0
    sym = B + B.T
    if sym.nnz and abs(sym).max() > 1e-12 * max(scale, 1.0):
        raise ValueError("the transport matrix is not skew; first integrals need div b = 0")
    grid = drift.grid
    n = grid.n_interior
    if scale == 0.0:
        return FirstIntegralSpace(grid, np.eye(n) / grid.h, np.zeros(n), svd_threshold)
    _, s, vt = sla.svd(B.toarray(), lapack_driver="gesdd")
    keep = s <= svd_threshold * s[0]
    return FirstIntegralSpace(grid, vt[keep].T / grid.h, s, svd_threshold)


def min_rayleigh(diffusion: DiffusionOperator, space: FirstIntegralSpace) -> MinimizerResult:
    """``min E(w, w)`` over unit-norm ``w`` in the space; ``+inf`` when it is trivial."""
    if space.k == 0:
        return MinimizerResult(math.inf, np.zeros(space.grid.n_interior), 0)
    Z = space.basis
    h2 = space.grid.h ** 2
    P = Z.T @ (diffusion.matrix @ Z) * h2
    P = 0.5 * (P + P.T)
    vals, vecs = sla.eigh(P, subset_by_index=[0, 0])
    w = Z @ vecs[:, 0]
    if w.sum() < 0:
        w = -w
    return MinimizerResult(float(vals[0]), w, space.k)


def _rk4(vf: VectorField, x: np.ndarray, t: float, dt: float, box):
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = max(1, math.ceil(abs(t) / dt - 1e-9))
    step = t / n
    x = np.array(x, dtype=float)
    for k in range(n):
        k1 = vf(x)
        k2 = vf(x + 0.5 * step * k1)
        k3 = vf(x + 0.5 * step * k2)
        k4 = vf(x + step * k3)
        x = x + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if box is not None:
            lo, hi = box
            out = np.any((x < lo) | (x > hi), axis=-1)
            if np.any(out):
                raise FlowExit((k + 1) * step, x)
    return x


def integrate_flow(vf: VectorField, x0, t: float, dt: float = 1e-3, box=None) -> np.ndarray:
    """Classical RK4 solution of ``ẋ = b(x)`` from ``x0`` over time ``t``.

    ``x0`` may be a single point or an array of points.  Negative ``t`` runs
    the flow backwards.  With ``box = (lo, hi)`` a trajectory leaving the box
    raises :class:`FlowExit` carrying the exit time.
    """
    if box is not None:
        box = (np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float))
    return _rk4(vf, np.asarray(x0, dtype=float), float(t), float(dt), box)


def _interpolator(grid: Grid, values):
    return RegularGridInterpolator((grid.x, grid.y), grid.to_box(values),
                                   method="linear", bounds_error=False, fill_value=0.0)


def invariance_check(values, grid: Grid, vf: VectorField, sample_count: int = 100,
                     t: float = 1.0, dt: float = 1e-3, rho: float = 0.1,
                     seed: int = 0) -> float:
    """Largest change of a lattice function along the flow over time ``t``.

    Starting points are drawn uniformly from interior nodes at distance more
    than ``rho`` from the boundary; values off the lattice use bilinear
    interpolation.
    """
    rng = np.random.default_rng(seed)
    pool = np.nonzero(grid.delta > rho)[0]
    if pool.size == 0:
        raise ValueError("no nodes deeper than rho")
    idx = rng.choice(pool, size=min(sample_count, pool.size), replace=False)
    x0 = grid.points[idx]
    x1 = integrate_flow(vf, x0, t, dt)
    f = _interpolator(grid, values)
    return float(np.max(np.abs(f(x1) - f(x0))))


def truncation_closure(values, level: float, space: FirstIntegralSpace,
                       span_tol: float = 1e-8) -> float:
    """L2 distance from the truncation ``max(-N, min(w, N))`` to the space.

    ``values`` must already lie in the space up to ``span_tol`` (relative).
    """
    w = np.asarray(values, dtype=float)
    norm = space.grid.norm(w)
    if norm == 0.0:
        return 0.0
    if space.distance(w) > span_tol * norm:
        raise ValueError("w does not lie in the first-integral space")
    if not level > 0:
        raise ValueError("truncation level must be positive")
    return space.distance(np.clip(w, -level, level))


def pair_identity(ux, uy, vx, vy) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the two-point identity behind the conditioned form.

    ``[u(x)-u(y)]² + u(x)²(v(y)-v(x))/v(x) + u(y)²(v(x)-v(y))/v(y)``
    equals ``v(x)v(y)[u(x)/v(x) - u(y)/v(y)]²`` for positive v.
    """
    ux, uy, vx, vy = (np.asarray(a, dtype=float) for a in (ux, uy, vx, vy))
    if np.any(vx <= 0) or np.any(vy <= 0):
        raise ValueError("v must be positive")
    lhs = (ux - uy) ** 2 + ux**2 * (vy - vx) / vx + uy**2 * (vx - vy) / vy
    rhs = vx * vy * (ux / vx - uy / vy) ** 2
    return lhs, rhs


def conditioning_identity_check(w, phi, eps: float, lam: float,
                                diffusion: DiffusionOperator) -> tuple[float, float]:
    """Both sides of ``λ ∫ φ w²/(φ+ε) = E(φ, w²/(φ+ε))``.

    The right side is the pairwise-difference form of the lattice operator,
    including the killing term; the identity is exact for eigenfunctions of
    the symmetric part and deviates by the transport pairing otherwise.
    """
    w = np.asarray(w, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if not eps > 0:
        raise ValueError("eps must be positive")
    if np.any(phi < 0):
        raise ValueError("phi must be non-negative")
    h2 = diffusion.grid.h ** 2
    psi = w**2 / (phi + eps)
    lhs = lam * float(np.sum(phi * psi)) * h2
    K = diffusion.matrix
    W = -K.copy()
    np.fill_diagonal(W, 0.0)
    dphi = phi[:, None] - phi[None, :]
    dpsi = psi[:, None] - psi[None, :]
    pair = 0.5 * float(np.sum(W * dphi * dpsi))
    rhs = (pair + float(np.sum(diffusion.killing * phi * psi))) * h2
    return lhs, rhs
