"""Perturbation series for the transition density with drift.

With p the free α-stable density, the terms

    p_0(t, x, y) = p_t(y - x)
    p_n(t, x, y) = ∫_0^t ∫ p_{n-1}(t - s, x, z) b(z)·∇_z p(s, z, y) dz ds

sum to the density of ``Δ^{α/2} + b·∇``.  For a fixed root x, integrating by
parts turns each term into ``u_n(t) = -∫_0^t P_s div(b u_{n-1}(t - s)) ds``
acting on functions of y.  These are evaluated on a periodic lattice centred
at x: P_s and the divergence act through their Fourier multipliers
``exp(-s|ξ|^α)`` and ``iξ``, which stay exact however narrow the kernel is.
The time integral uses Gauss–Legendre nodes after the substitution
``s = (t/2)u²`` near each endpoint.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .drift import VectorField
from .fractional import StableParams, free_kernel

__all__ = [
    "SeriesConfig",
    "SeriesLattice",
    "SeriesEvaluation",
    "QuadratureError",
    "time_nodes",
    "series_lattice",
    "series_field",
    "series_term",
    "kernel_sum",
    "lattice_values",
    "write_probe_csv",
]

MAX_ORDER = 3


class QuadratureError(RuntimeError):
    """Halving the number of time nodes changed a term by more than the tolerance."""

    def __init__(self, n: int, estimate: float):
        super().__init__(f"time quadrature for term {n} unresolved (relative change {estimate:.3g})")
        self.estimate = estimate


@dataclass(frozen=True)
class SeriesConfig:
    """Discretisation of the series terms.

    ``half_width`` overrides the lattice half width, which defaults to
    ``8 t^{1/α}`` plus the distance from the root to the farthest probe.
    """

    spacing: float = 0.05
    n_time: int = 64
    half_width: float | None = None
    check_tol: float = 2e-2

    def __post_init__(self) -> None:
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if self.n_time < 4 or self.n_time % 4:
            raise ValueError("n_time must be a positive multiple of 4")


def time_nodes(t: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ``∫_0^t`` clustered quadratically at both ends."""
    u, w = np.polynomial.legendre.leggauss(n // 2)
    u = 0.5 * (u + 1.0)
    w = 0.5 * w
    half = 0.5 * t
    left = half * u**2
    jac = 2.0 * half * u * w
    s = np.concatenate([left, t - left[::-1]])
    weights = np.concatenate([jac, jac[::-1]])
    return s, weights


@dataclass
class SeriesLattice:
    """Periodic lattice with node ``(m/2, m/2)`` at the root point."""

    root: np.ndarray
    spacing: float
    m: int
    xi1: np.ndarray = field(repr=False)
    xi2: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    dxi1: np.ndarray = field(repr=False)
    dxi2: np.ndarray = field(repr=False)

    @property
    def coords(self) -> np.ndarray:
        return (np.arange(self.m) - self.m // 2) * self.spacing

    def interpolate(self, coeffs: np.ndarray, y) -> float:
        """Trigonometric interpolation of a lattice function at ``y``."""
        d = np.asarray(y, dtype=float) - self.root + self.m // 2 * self.spacing
        phase = np.exp(1j * (self.xi1 * d[0] + self.xi2 * d[1]))
        weight = np.full(self.xi2.shape[1], 2.0)
        weight[0] = 1.0
        if self.m % 2 == 0:
            weight[-1] = 1.0
        total = np.real(np.sum(coeffs * phase, axis=0)) @ weight
        return float(total / (self.m * self.spacing) ** 2)


def series_lattice(root, spacing: float, half_width: float) -> SeriesLattice:
    """Lattice of even, FFT-friendly size covering ``[-half_width, half_width]²``."""
    m = fft.next_fast_len(2 * math.ceil(half_width / spacing), real=True)
    m += m % 2
    xi1 = 2.0 * np.pi * fft.fftfreq(m, spacing)
    xi2 = 2.0 * np.pi * fft.rfftfreq(m, spacing)
    d1, d2 = xi1.copy(), xi2.copy()
    d1[m // 2] = 0.0  # the Nyquist mode has no odd derivative
    d2[-1] = 0.0
    root = np.asarray(root, dtype=float)
    c = (np.arange(m) - m // 2) * spacing
    X, Y = np.meshgrid(root[0] + c, root[1] + c, indexing="ij")
    XI1, XI2 = np.meshgrid(xi1, xi2, indexing="ij")
    D1, D2 = np.meshgrid(d1, d2, indexing="ij")
    return SeriesLattice(root, spacing, m, XI1, XI2, np.stack([X, Y], axis=-1), D1, D2)


class _Evaluator:
    def __init__(self, lattice: SeriesLattice, vf: VectorField, params: StableParams,
                 n_time: int):
        self.lat = lattice
        self.alpha = params.alpha
        b = vf(lattice.points)
        self.b1 = b[..., 0]
        self.b2 = b[..., 1]
        self.n_time = n_time
        h = lattice.spacing
        m = lattice.m
        # Fourier coefficients of the delta at the root (node m/2, m/2).
        shift = m // 2 * h
        self.delta_hat = np.exp(-1j * (lattice.xi1 * shift + lattice.xi2 * shift))
        self.mod = np.hypot(lattice.xi1, lattice.xi2) ** self.alpha

    def free(self, tau: float) -> np.ndarray:
        return np.exp(-tau * self.mod) * self.delta_hat

    def transport(self, coeffs: np.ndarray) -> np.ndarray:
        """Fourier coefficients of ``-div(b u)``."""
        shape = (self.lat.m, self.lat.m)
        u = fft.irfft2(coeffs, s=shape)
        g1 = fft.rfft2(self.b1 * u)
        g2 = fft.rfft2(self.b2 * u)
        return -1j * (self.lat.dxi1 * g1 + self.lat.dxi2 * g2)

    def term(self, n: int, tau: float, n_time: int) -> np.ndarray:
        if n == 0:
            return self.free(tau)
        s, w = time_nodes(tau, n_time)
        acc = np.zeros_like(self.delta_hat)
        for sj, wj in zip(s, w):
            acc += wj * np.exp(-sj * self.mod) * self.transport(self.term(n - 1, tau - sj, n_time))
        return acc


@dataclass
class SeriesEvaluation:
    """Terms ``p_0 … p_N`` at one pair of points, and their partial sum."""

    t: float
    x: np.ndarray
    y: np.ndarray
    terms: list[float]

    @property
    def partial_sum(self) -> float:
        return float(sum(self.terms))

    @property
    def ratio(self) -> float:
        """Partial sum relative to the free density."""
        return self.partial_sum / self.terms[0]


def _check(n, t, x, y, vf, params, cfg):
    if not (isinstance(n, (int, np.integer)) and 0 <= n <= MAX_ORDER):
        raise ValueError(f"order must be an integer in [0, {MAX_ORDER}]")
    if not (np.isscalar(t) and t > 0 and math.isfinite(t)):
        raise ValueError("t must be positive")


def series_field(n: int, t: float, x, vf: VectorField, params: StableParams,
                 cfg: SeriesConfig = SeriesConfig(), reach: float = 0.0,
                 check: bool = True) -> tuple[SeriesLattice, np.ndarray]:
    """Lattice values of ``y ↦ p_n(t, x, y)`` and the lattice they live on.

    With ``check`` the term is recomputed with half the time nodes and a
    relative change beyond ``cfg.check_tol`` raises :class:`QuadratureError`.
    """
    _check(n, t, x, x, vf, params, cfg)
    x = np.asarray(x, dtype=float)
    hw = cfg.half_width if cfg.half_width is not None else (
        8.0 * t ** (1.0 / params.alpha) + reach + 4 * cfg.spacing)
    lat = series_lattice(x, cfg.spacing, hw)
    ev = _Evaluator(lat, vf, params, cfg.n_time)
    coeffs = ev.term(n, t, cfg.n_time)
    if check and n > 0:
        coarse = ev.term(n, t, cfg.n_time // 2)
        scale = np.max(np.abs(coeffs))
        est = float(np.max(np.abs(coeffs - coarse)) / scale) if scale > 0 else 0.0
        if est > cfg.check_tol:
            raise QuadratureError(n, est)
    return lat, coeffs


def series_term(n: int, t: float, x, y, vf: VectorField, params: StableParams,
                cfg: SeriesConfig = SeriesConfig(), check: bool = True) -> float:
    """``p_n(t, x, y)``; the zeroth term is the free density itself."""
    _check(n, t, x, y, vf, params, cfg)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if n == 0:
        return float(free_kernel(t, y - x, params))
    lat, coeffs = series_field(n, t, x, vf, params, cfg, float(np.hypot(*(y - x))), check)
    return lat.interpolate(coeffs, y)


def kernel_sum(order: int, t: float, x, ys, vf: VectorField, params: StableParams,
               cfg: SeriesConfig = SeriesConfig(), check: bool = True) -> list[SeriesEvaluation]:
    """Terms up to ``order`` from root ``x`` to each probe in ``ys``.

    One lattice computation per order serves all probes.
    """
    _check(order, t, x, x, vf, params, cfg)
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(y, dtype=float) for y in np.atleast_2d(ys)]
    terms = [[float(free_kernel(t, y - x, params))] for y in ys]
    reach = max(float(np.hypot(*(y - x))) for y in ys)
    for n in range(1, order + 1):
        lat, coeffs = series_field(n, t, x, vf, params, cfg, reach, check)
        for row, y in zip(terms, ys):
            row.append(lat.interpolate(coeffs, y))
    return [SeriesEvaluation(float(t), x, y, row) for row, y in zip(terms, ys)]


def lattice_values(lat: SeriesLattice, coeffs: np.ndarray) -> np.ndarray:
    """Real-space lattice samples of a term."""
    return fft.irfft2(coeffs, s=(lat.m, lat.m)) / lat.spacing**2


def write_probe_csv(path, evaluations: list[SeriesEvaluation]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "t", "x1", "x2", "y1", "y2", "value"])
        for ev in evaluations:
            for n, v in enumerate(ev.terms):
                w.writerow([n, f"{ev.t:.17g}", f"{ev.x[0]:.17g}", f"{ev.x[1]:.17g}",
                            f"{ev.y[0]:.17g}", f"{ev.y[1]:.17g}", f"{v:.17g}"])
