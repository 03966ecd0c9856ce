"""Discrete fractional Laplacian on a cell-centred lattice with zero exterior data.

The operator is the lattice version of

    Δ^{α/2} f(x) = ∫ (f(x + y) - f(x) - y·∇f(x) 1{|y|<1}) ν(y) dy,
    ν(y) = A_{d,α} |y|^{-d-α}.

Cells two or more lattice steps away contribute a midpoint weight
``ν(x_j - x_i) h^2``.  The singular 3x3 patch around each node is replaced by
``c_h`` times the five-point Laplacian, where ``c_h`` matches the second
moment of ν over the patch.  Mass beyond the lattice box is integrated in
polar coordinates and only enters the killing term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import io as spio
from scipy import special

from .geometry import Grid

__all__ = [
    "StableParams",
    "DiffusionOperator",
    "levy_constant",
    "levy_density",
    "patch_coefficient",
    "assemble_fraclap",
    "dirichlet_form",
    "free_kernel",
    "free_kernel_radial_derivative",
    "lattice_symbol",
]


def levy_constant(alpha: float, d: int = 2) -> float:
    """Normalising constant ``A_{d,α}`` of the isotropic α-stable Lévy density."""
    return (alpha * 2.0 ** (alpha - 1.0) * special.gamma(0.5 * (d + alpha))
            / (math.pi ** (0.5 * d) * special.gamma(1.0 - 0.5 * alpha)))


@dataclass(frozen=True)
class StableParams:
    """Stability index and dimension of the jump process."""

    alpha: float
    d: int = 2

    def __post_init__(self) -> None:
        if not (isinstance(self.alpha, (int, float, np.floating))
                and 1.0 < float(self.alpha) < 2.0):
            raise ValueError(f"alpha must lie in (1, 2), got {self.alpha!r}")
        if self.d != 2:
            raise ValueError("only d = 2 is supported")

    @property
    def constant(self) -> float:
        return levy_constant(float(self.alpha), self.d)


def levy_density(y, params: StableParams) -> np.ndarray:
    """Lévy density ν(y) for an array of shape ``(..., 2)``."""
    y = np.asarray(y, dtype=float)
    r = np.hypot(y[..., 0], y[..., 1])
    if np.any(r == 0):
        raise ValueError("the Lévy density is singular at y = 0")
    return params.constant * r ** (-params.d - params.alpha)


def patch_coefficient(h: float, params: StableParams) -> float:
    """Five-point coefficient ``c_h`` standing in for the 3x3 near-field patch.

    Equals the second moment of ν over the square ``|y|_∞ ≤ 3h/2`` divided
    by ``2d``, so the patch reproduces the quadratic part of the symbol.
    """
    a = 1.5 * h
    alpha = params.alpha
    # ∫_0^1 (1 + t²)^{-α/2} dt
    shape = special.hyp2f1(0.5 * alpha, 0.5, 1.5, -1.0)
    return params.constant * 8.0 * a ** (2.0 - alpha) / (2.0 - alpha) * shape / 4.0


_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def _edge_integral(dist, q0, q1, alpha):
    """∫ (cos φ / dist)^α dφ over the angles subtended by one box edge."""
    lo = -np.arctan2(q0, dist)
    hi = np.arctan2(q1, dist)
    mid = 0.5 * (hi + lo)
    half = 0.5 * (hi - lo)
    phi = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = (np.cos(phi) / dist[:, None]) ** alpha
    return half * (vals @ _GL_W)


def _box_tail(points, bounds, params: StableParams) -> np.ndarray:
    """Mass of ν(· - x) outside the rectangle ``bounds`` for each point x."""
    xl, xr, yb, yt = bounds
    dl = points[:, 0] - xl
    dr = xr - points[:, 0]
    db = points[:, 1] - yb
    dt = yt - points[:, 1]
    alpha = params.alpha
    total = (_edge_integral(dr, db, dt, alpha) + _edge_integral(dt, dr, dl, alpha)
             + _edge_integral(dl, dt, db, alpha) + _edge_integral(db, dl, dr, alpha))
    return params.constant / alpha * total


@dataclass
class DiffusionOperator:
    """Dense matrix ``K`` representing ``-Δ^{α/2}`` on the interior nodes.

    ``K`` is symmetric with non-positive off-diagonal entries.  ``killing``
    holds the row sums of ``K``, the rate of jumping out of the domain.
    """

    grid: Grid
    params: StableParams
    matrix: np.ndarray = field(repr=False)
    killing: np.ndarray = field(repr=False)
    patch: float
    offset_table: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, f) -> np.ndarray:
        """Δ^{α/2} f on the interior nodes."""
        return -(self.matrix @ np.asarray(f, dtype=float))

    def form(self, f, g) -> float:
        return dirichlet_form(f, g, self)

    def export_matrix_market(self, path) -> None:
        spio.mmwrite(str(path), self.matrix, precision=17,
                     comment="lattice matrix of the negative fractional Laplacian")


def _offset_table(grid: Grid, params: StableParams, c_h: float):
    h = grid.h
    ox, oy = grid.nx - 1, grid.ny - 1
    dx = np.arange(-ox, ox + 1)
    dy = np.arange(-oy, oy + 1)
    DX, DY = np.meshgrid(dx, dy, indexing="ij")
    far = np.maximum(np.abs(DX), np.abs(DY)) >= 2
    r = np.hypot(DX * h, DY * h)
    table = np.zeros(DX.shape)
    table[far] = params.constant * r[far] ** (-2.0 - params.alpha) * h * h
    face = c_h / (h * h)
    for a, b in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        table[ox + a, oy + b] = face
    return table, ox, oy


def assemble_fraclap(grid: Grid, params: StableParams,
                     chunk: int = 512) -> DiffusionOperator:
    """Assemble ``-Δ^{α/2}`` with zero exterior condition on ``grid``."""
    h = grid.h
    if grid.margin < 2 * h - 1e-12:
        raise ValueError("the grid box must extend at least 2h past the domain")
    c_h = patch_coefficient(h, params)
    table, ox, oy = _offset_table(grid, params, c_h)

    # Window sums of the offset table give the total rate to every box node.
    cs = np.zeros((table.shape[0] + 1, table.shape[1] + 1))
    cs[1:, 1:] = table.cumsum(0).cumsum(1)
    ii, jj = grid.ii, grid.jj
    x0 = ox - ii
    x1 = ox - ii + grid.nx
    y0 = oy - jj
    y1 = oy - jj + grid.ny
    box_rate = cs[x1, y1] - cs[x0, y1] - cs[x1, y0] + cs[x0, y0]

    hx, hy = grid.box_half_widths
    cx, cy = 0.5 * (grid.x[0] + grid.x[-1]), 0.5 * (grid.y[0] + grid.y[-1])
    tail = _box_tail(grid.points, (cx - hx, cx + hx, cy - hy, cy + hy), params)

    n = grid.n_interior
    K = np.empty((n, n))
    for s in range(0, n, chunk):
        e = min(s + chunk, n)
        K[s:e] = -table[ii[None, :] - ii[s:e, None] + ox,
                        jj[None, :] - jj[s:e, None] + oy]
    diag = box_rate + tail
    K[np.arange(n), np.arange(n)] = diag
    killing = K.sum(axis=1)
    return DiffusionOperator(grid, params, K, killing, c_h, table)


def dirichlet_form(f, g, op: DiffusionOperator) -> float:
    """Bilinear form ``E(f, g) = (-Δ^{α/2} f, g)`` in the h^2-weighted pairing."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    return float(g @ (op.matrix @ f)) * op.grid.h ** 2


@lru_cache(maxsize=8)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return special.roots_legendre(n)


def _hankel_nodes(t: float, params: StableParams, n_nodes: int, cutoff: float):
    rho_max = cutoff * t ** (-1.0 / params.alpha)
    x, w = _legendre(n_nodes)
    rho = 0.5 * rho_max * (x + 1.0)
    return rho, 0.5 * rho_max * w


def _hankel(t, r, params, n_nodes, cutoff, order):
    if not (np.isscalar(t) and t > 0):
        raise ValueError("t must be a positive scalar")
    flat = np.atleast_1d(r).ravel()
    rho, w = _hankel_nodes(float(t), params, n_nodes, cutoff)
    weight = w * np.exp(-t * rho ** params.alpha) * rho ** (order + 1)
    out = np.empty(flat.size)
    step = max(1, 2_000_000 // n_nodes)
    for s in range(0, flat.size, step):
        arg = np.outer(flat[s:s + step], rho)
        basis = special.j0(arg) if order == 0 else -special.j1(arg)
        out[s:s + step] = basis @ weight
    out /= 2.0 * math.pi
    return out.reshape(np.shape(r))


def free_kernel(t: float, x, params: StableParams, n_nodes: int = 4096,
                cutoff: float = 50.0) -> np.ndarray:
    """Transition density p_t(x) of the isotropic α-stable process in the plane.

    Evaluated as the Hankel transform of ``exp(-t ρ^α)`` truncated at
    ``ρ = cutoff · t^{-1/α}``.  ``x`` is an array of points ``(..., 2)``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (2,):
        raise ValueError("points must have a trailing axis of length 2")
    return _hankel(t, np.hypot(x[..., 0], x[..., 1]), params, n_nodes, cutoff, 0)


def free_kernel_radial_derivative(t: float, r, params: StableParams,
                                  n_nodes: int = 4096, cutoff: float = 50.0) -> np.ndarray:
    """∂p_t/∂r as a function of the radius ``r`` (scalar or array)."""
    return _hankel(t, np.abs(np.asarray(r, dtype=float)), params, n_nodes, cutoff, 1)


def lattice_symbol(xi, h: float, params: StableParams, radius: float = 30.0) -> float:
    """Symbol of the lattice operator on the unbounded lattice at frequency ``xi``.

    Sums ``Σ_j w_j (1 - cos ξ·y_j)`` over lattice offsets within ``radius``
    and adds the averaged remainder ``∫_{|y|>radius} ν``.
    """
    xi = np.asarray(xi, dtype=float)
    n = int(radius / h)
    j = np.arange(-n, n + 1)
    J1, J2 = np.meshgrid(j, j, indexing="ij")
    y1, y2 = J1 * h, J2 * h
    r = np.hypot(y1, y2)
    far = (np.maximum(np.abs(J1), np.abs(J2)) >= 2) & (r <= radius)
    w = np.zeros_like(r)
    w[far] = params.constant * r[far] ** (-2.0 - params.alpha) * h * h
    total = float(np.sum(w * (1.0 - np.cos(xi[0] * y1 + xi[1] * y2))))
    c_h = patch_coefficient(h, params)
    total += c_h / h**2 * (4.0 - 2.0 * np.cos(xi[0] * h) - 2.0 * np.cos(xi[1] * h))
    total += params.constant * 2.0 * math.pi / (params.alpha * radius**params.alpha)
    return total
