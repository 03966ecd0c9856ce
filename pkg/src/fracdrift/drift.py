"""Divergence-free vector fields and the skew lattice transport operator.

Fields that come with a stream function ψ are sampled on the lattice as the
discrete curl of ψ, ``b = (D₂ψ, -D₁ψ)``, using the same centred difference D
as the transport operator.  The discrete divergence of such a sample vanishes
identically, which makes the assembled matrix exactly antisymmetric.

The transport operator is written in flux form.  With centred coefficients
``c_m`` the coupling between node ``i`` and ``i ± m e_k`` is
``± c_m (b_k(x_i) + b_k(x_{i ± m e_k})) / (2h)``, and the diagonal collects
the negated row sum, equal to ``-(D·b)_i / 2``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import interpolate, sparse

from .fractional import StableParams, patch_coefficient
from .geometry import Grid

__all__ = [
    "Profile",
    "VectorField",
    "DriftOperator",
    "PecletWarning",
    "centered_coefficients",
    "rotational_field",
    "constant_field",
    "compressible_field",
    "stream_field",
    "read_stream_table",
    "write_stream_table",
    "sample_on_lattice",
    "assemble_drift",
    "divergence_certificate",
    "pointwise_divergence",
    "grid_peclet",
]


class PecletWarning(UserWarning):
    """The grid cannot resolve the transport at the requested amplitude."""


def centered_coefficients(order: int) -> np.ndarray:
    """Coefficients ``c_m`` of the centred first derivative of the given order.

    ``f'(x) ≈ Σ_m c_m (f(x + m h) - f(x - m h)) / h``.
    """
    if order < 2 or order % 2:
        raise ValueError("order must be a positive even integer")
    p = order // 2
    m = np.arange(1, p + 1, dtype=float)
    M = np.array([2.0 * m ** (2 * r + 1) for r in range(p)])
    rhs = np.zeros(p)
    rhs[0] = 1.0
    return np.linalg.solve(M, rhs)


@dataclass(frozen=True)
class Profile:
    """Angular speed ``p(s)`` of a rotational field as a function of ``s = |x|²``.

    ``kind="taper"`` is ``(1 - s/R²)_+^k``; ``kind="constant"`` is ``≡ 1``.
    """

    kind: str = "taper"
    radius: float = 0.8
    power: int = 6

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.kind == "constant":
            return np.ones_like(s)
        return np.clip(1.0 - s / self.radius**2, 0.0, None) ** self.power

    def primitive(self, s) -> np.ndarray:
        """``∫_0^s p(u) du``."""
        s = np.asarray(s, dtype=float)
        if self.kind == "constant":
            return s
        r2, k = self.radius**2, self.power
        u = np.clip(1.0 - s / r2, 0.0, None)
        return r2 / (k + 1) * (1.0 - u ** (k + 1))

    @classmethod
    def parse(cls, text: str) -> "Profile":
        """Parse ``"constant"``, ``"taper"`` or ``"taper:R:k"``."""
        parts = text.strip().split(":")
        if parts[0] == "constant" and len(parts) == 1:
            return cls("constant")
        if parts[0] == "taper" and len(parts) in (1, 3):
            if len(parts) == 1:
                return cls()
            radius, power = float(parts[1]), int(parts[2])
            if radius <= 0 or power < 1:
                raise ValueError(f"bad taper parameters in {text!r}")
            return cls("taper", radius, power)
        raise ValueError(f"unknown profile {text!r}")


@dataclass
class VectorField:
    """A planar vector field, optionally backed by a stream function."""

    name: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    stream: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    divergence_free: bool = True

    def __call__(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return self.func(p.reshape(-1, 2)).reshape(p.shape)

    def negated(self) -> "VectorField":
        stream = None if self.stream is None else (lambda p, s=self.stream: -s(p))
        return VectorField(f"-{self.name}", lambda p, f=self.func: -f(p), stream,
                           self.divergence_free)

    def sup_norm(self, points) -> float:
        v = self(points)
        return float(np.max(np.hypot(v[..., 0], v[..., 1]), initial=0.0))


def rotational_field(profile: Profile | None = None, center=(0.0, 0.0)) -> VectorField:
    """``b(x) = p(|x - c|²) (-(x₂ - c₂), x₁ - c₁)`` with stream ``-P(|x - c|²)/2``."""
    profile = Profile() if profile is None else profile
    c = np.asarray(center, dtype=float)

    def func(p):
        q = p - c
        w = profile(np.einsum("ij,ij->i", q, q))
        return np.stack([-w * q[:, 1], w * q[:, 0]], axis=1)

    def stream(p):
        q = np.asarray(p, dtype=float) - c
        return -0.5 * profile.primitive(q[..., 0] ** 2 + q[..., 1] ** 2)

    return VectorField(f"rotational[{profile.kind}]", func, stream, True)


def constant_field(direction=(1.0, 0.0)) -> VectorField:
    """Uniform field ``b ≡ e`` with stream ``e₁x₂ - e₂x₁``."""
    e = np.asarray(direction, dtype=float)
    if e.shape != (2,) or not np.all(np.isfinite(e)):
        raise ValueError("direction must be a finite 2-vector")

    def func(p):
        return np.broadcast_to(e, p.shape).copy()

    def stream(p):
        p = np.asarray(p, dtype=float)
        return e[0] * p[..., 1] - e[1] * p[..., 0]

    return VectorField("constant", func, stream, True)


def compressible_field(center=(0.0, 0.0)) -> VectorField:
    """The control field ``(x₁ - c₁, 0)``, with unit divergence."""
    c = np.asarray(center, dtype=float)

    def func(p):
        return np.stack([p[:, 0] - c[0], np.zeros(len(p))], axis=1)

    return VectorField("compressible", func, None, False)


def stream_field(grid: Grid, psi, name: str = "stream") -> VectorField:
    """Field generated by a tabulated stream function on ``grid``.

    ``psi`` is given either on the interior nodes or on the whole box; box
    values at exterior nodes must vanish.  Off-lattice evaluation uses the
    derivatives of the interpolating bicubic spline, which keeps the field
    divergence free pointwise.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.shape == (grid.n_interior,):
        box = grid.to_box(psi)
    elif psi.shape == grid.box_shape:
        box = psi
        outside = grid.index < 0
        scale = max(float(np.max(np.abs(box))), 1.0)
        if np.any(np.abs(box[outside]) > 1e-12 * scale):
            raise ValueError("the stream function must vanish outside the domain")
    else:
        raise ValueError("psi must be given on the interior nodes or on the box")
    if not np.all(np.isfinite(box)):
        raise ValueError("psi must be finite")
    return _table_field(grid.x, grid.y, box, name)


def _table_field(x, y, box, name):
    spline = interpolate.RectBivariateSpline(x, y, box, kx=3, ky=3, s=0)
    h = x[1] - x[0]
    lo = np.array([x[0], y[0]])
    hi = np.array([x[-1], y[-1]])

    def stream(p):
        p = np.asarray(p, dtype=float)
        flat = p.reshape(-1, 2)
        out = np.zeros(len(flat))
        inside = np.all((flat >= lo - 1e-9 * h) & (flat <= hi + 1e-9 * h), axis=1)
        if inside.any():
            out[inside] = spline.ev(flat[inside, 0], flat[inside, 1])
        return out.reshape(p.shape[:-1])

    def func(p):
        out = np.zeros_like(p)
        inside = np.all((p >= lo) & (p <= hi), axis=1)
        if inside.any():
            q = p[inside]
            out[inside, 0] = spline.ev(q[:, 0], q[:, 1], dx=0, dy=1)
            out[inside, 1] = -spline.ev(q[:, 0], q[:, 1], dx=1, dy=0)
        return out

    return VectorField(name, func, stream, True)


def read_stream_table(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read an ``x1,x2,psi`` CSV laid out on a full rectangular lattice."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["x1", "x2", "psi"]:
            raise ValueError("stream table header must be x1,x2,psi")
        for row in reader:
            rows.append((float(row["x1"]), float(row["x2"]), float(row["psi"])))
    data = np.array(rows)
    if data.size == 0:
        raise ValueError("empty stream table")
    x = np.unique(data[:, 0])
    y = np.unique(data[:, 1])
    if x.size * y.size != len(data):
        raise ValueError("stream table is not a full rectangular lattice")
    box = np.full((x.size, y.size), np.nan)
    box[np.searchsorted(x, data[:, 0]), np.searchsorted(y, data[:, 1])] = data[:, 2]
    if np.isnan(box).any():
        raise ValueError("stream table has duplicate or missing nodes")
    return x, y, box


def write_stream_table(path, grid: Grid, psi) -> None:
    """Write ψ on the full box as ``x1,x2,psi`` rows."""
    psi = np.asarray(psi, dtype=float)
    box = grid.to_box(psi) if psi.shape == (grid.n_interior,) else psi
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "psi"])
        for k, xv in enumerate(grid.x):
            for l, yv in enumerate(grid.y):
                w.writerow([f"{xv:.17g}", f"{yv:.17g}", f"{box[k, l]:.17g}"])


def field_from_stream_table(path, grid: Grid | None = None) -> VectorField:
    """Load a stream-function table; when ``grid`` is given it must match it."""
    x, y, box = read_stream_table(path)
    if grid is not None:
        if x.size != grid.nx or y.size != grid.ny or not (
                np.allclose(x, grid.x, atol=1e-12) and np.allclose(y, grid.y, atol=1e-12)):
            raise ValueError("stream table lattice does not match the grid")
        return stream_field(grid, box, name=Path(path).stem)
    return _table_field(x, y, box, Path(path).stem)


def _lattice_coords(grid: Grid, pad: int):
    h = grid.h
    kx = np.arange(-pad, grid.nx + pad)
    ky = np.arange(-pad, grid.ny + pad)
    x = grid.x[0] + kx * h
    y = grid.y[0] + ky * h
    return np.meshgrid(x, y, indexing="ij")


def sample_on_lattice(grid: Grid, vf: VectorField, order: int = 6) -> np.ndarray:
    """Field values on the box padded by ``order/2`` nodes on each side.

    Returns an array of shape ``(nx + order, ny + order, 2)``.  Stream-backed
    fields are sampled as the discrete curl of ψ.
    """
    c = centered_coefficients(order)
    p = c.size
    if vf.stream is None:
        X, Y = _lattice_coords(grid, p)
        pts = np.stack([X, Y], axis=-1)
        return vf(pts)
    X, Y = _lattice_coords(grid, 2 * p)
    psi = vf.stream(np.stack([X, Y], axis=-1))
    nx, ny = grid.nx + 2 * p, grid.ny + 2 * p
    b = np.zeros((nx, ny, 2))
    for m, cm in enumerate(c, start=1):
        b[..., 0] += cm * (psi[p:p + nx, p + m:p + m + ny] - psi[p:p + nx, p - m:p - m + ny])
        b[..., 1] -= cm * (psi[p + m:p + m + nx, p:p + ny] - psi[p - m:p - m + nx, p:p + ny])
    return b / grid.h


def _lattice_divergence(grid: Grid, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    p = c.size
    i = grid.ii + p
    j = grid.jj + p
    div = np.zeros(grid.n_interior)
    for m, cm in enumerate(c, start=1):
        div += cm * (b[i + m, j, 0] - b[i - m, j, 0] + b[i, j + m, 1] - b[i, j - m, 1])
    return div / grid.h


@dataclass
class DriftOperator:
    """Sparse lattice matrix of ``A b·∇`` on the interior nodes."""

    grid: Grid
    field: VectorField
    amplitude: float
    order: int
    unit: sparse.csr_matrix = field(repr=False)
    samples: np.ndarray = field(repr=False)

    @property
    def matrix(self) -> sparse.csr_matrix:
        return self.unit * self.amplitude

    def apply(self, f) -> np.ndarray:
        return self.amplitude * (self.unit @ np.asarray(f, dtype=float))

    def with_amplitude(self, amplitude: float) -> "DriftOperator":
        return DriftOperator(self.grid, self.field, float(amplitude), self.order,
                             self.unit, self.samples)

    def skew_defect(self) -> float:
        """Largest entry of ``B + Bᵀ``."""
        s = self.matrix + self.matrix.T
        return float(abs(s).max()) if s.nnz else 0.0

    def sup_norm(self) -> float:
        b = self.samples
        return float(np.max(np.hypot(b[..., 0], b[..., 1])))


def assemble_drift(grid: Grid, vf: VectorField, amplitude: float = 1.0,
                   order: int = 6) -> DriftOperator:
    """Assemble the flux-form centred transport matrix ``A b·∇``.

    Fields backed by a stream function have zero discrete divergence, so the
    diagonal is dropped and the matrix is antisymmetric to the last bit.
    """
    if not math.isfinite(amplitude):
        raise ValueError("amplitude must be finite")
    c = centered_coefficients(order)
    p = c.size
    b = sample_on_lattice(grid, vf, order)
    if not np.all(np.isfinite(b)):
        raise ValueError("the field is not finite on the lattice")
    h = grid.h
    n = grid.n_interior
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    src = np.arange(n)
    for axis in (0, 1):
        for m, cm in enumerate(c, start=1):
            di, dj = (m, 0) if axis == 0 else (0, m)
            ti = grid.ii + di
            tj = grid.jj + dj
            flux = 0.5 * (b[grid.ii + p, grid.jj + p, axis] + b[ti + p, tj + p, axis])
            w = cm * flux / h
            ok = (ti < grid.nx) & (tj < grid.ny)
            tgt = np.full(n, -1)
            tgt[ok] = grid.index[ti[ok], tj[ok]]
            inner = tgt >= 0
            # forward edge i -> i + m e_k and its mirror j -> j - m e_k
            rows += [src[inner], tgt[inner]]
            cols += [tgt[inner], src[inner]]
            vals += [w[inner], -w[inner]]
            diag -= w
            # backward edges whose partner is exterior still enter the diagonal
            si = grid.ii - di
            sj = grid.jj - dj
            back = 0.5 * (b[grid.ii + p, grid.jj + p, axis] + b[si + p, sj + p, axis])
            diag += cm * back / h
    if vf.stream is None:
        rows.append(src)
        cols.append(src)
        vals.append(diag)
    unit = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n))
    unit.sum_duplicates()
    unit.sort_indices()
    return DriftOperator(grid, vf, float(amplitude), order, unit, b)


def divergence_certificate(grid: Grid, vf: VectorField, order: int = 6) -> float:
    """Largest discrete divergence of the lattice sample over the interior nodes."""
    c = centered_coefficients(order)
    b = sample_on_lattice(grid, vf, order)
    return float(np.max(np.abs(_lattice_divergence(grid, b, c))))


def pointwise_divergence(vf: VectorField, points, h: float) -> np.ndarray:
    """Second-order centred divergence of ``vf`` evaluated directly at ``points``."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    e1 = np.array([h, 0.0])
    e2 = np.array([0.0, h])
    return ((vf(p + e1)[:, 0] - vf(p - e1)[:, 0])
            + (vf(p + e2)[:, 1] - vf(p - e2)[:, 1])) / (2.0 * h)


def grid_peclet(amplitude: float, sup_b: float, h: float, params: StableParams) -> float:
    """Ratio of the centred transport coupling to the nearest-neighbour diffusion.

    Values above one mean the combined matrix loses its M-matrix sign pattern.
    """
    return abs(amplitude) * sup_b * h / (2.0 * patch_coefficient(h, params))


def check_peclet(amplitude: float, drift: DriftOperator, params: StableParams) -> float:
    pe = grid_peclet(amplitude, drift.sup_norm(), drift.grid.h, params)
    if pe > 1.0:
        warnings.warn(f"grid Peclet number {pe:.3g} exceeds 1 at A={amplitude:g}; "
                      "the centred scheme is not monotone", PecletWarning, stacklevel=2)
    return pe
