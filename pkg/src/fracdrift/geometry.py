"""Planar domains and the cell-centred lattices laid over them.

A grid covers a square (or rectangular) box of lattice nodes centred on the
domain.  Nodes sit at cell centres ``c + (k + 1/2) h`` so that the lattice is
symmetric under the reflections and quarter turns about the domain centre.
Nodes with positive signed distance are the unknowns; every other box node is
exterior and carries the zero Dirichlet value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Domain",
    "Grid",
    "GridTooCoarse",
    "build_grid",
    "boundary_distance",
]


class GridTooCoarse(ValueError):
    """Raised when the spacing cannot resolve the domain."""


@dataclass(frozen=True)
class Domain:
    """A bounded planar domain described by its signed distance.

    ``kind`` is one of ``"disk"``, ``"annulus"`` or ``"rect"`` (a rectangle
    with rounded corners).  The signed distance is positive inside.
    """

    kind: str = "disk"
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    inner_radius: float = 0.0
    half_widths: tuple[float, float] = (1.0, 1.0)
    corner_radius: float = 0.25

    def __post_init__(self) -> None:
        if self.kind not in ("disk", "annulus", "rect"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind in ("disk", "annulus") and not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.kind == "annulus" and not 0 < self.inner_radius < self.radius:
            raise ValueError("annulus needs 0 < inner_radius < radius")
        if self.kind == "rect":
            a, b = self.half_widths
            if not (a > 0 and b > 0):
                raise ValueError("half widths must be positive")
            if not 0 < self.corner_radius <= min(a, b):
                raise ValueError("corner radius must lie in (0, min half width]")

    @classmethod
    def disk(cls, radius: float = 1.0, center=(0.0, 0.0)) -> "Domain":
        return cls("disk", tuple(map(float, center)), float(radius))

    @classmethod
    def annulus(cls, inner: float, outer: float, center=(0.0, 0.0)) -> "Domain":
        return cls("annulus", tuple(map(float, center)), float(outer), float(inner))

    @classmethod
    def rect(cls, half_widths=(1.0, 1.0), corner_radius: float = 0.25,
             center=(0.0, 0.0)) -> "Domain":
        return cls("rect", tuple(map(float, center)),
                   half_widths=tuple(map(float, half_widths)),
                   corner_radius=float(corner_radius))

    def signed_distance(self, points) -> np.ndarray:
        """Signed distance to the boundary, positive inside.

        Accepts a single point or an ``(n, 2)`` array.
        """
        p = np.asarray(points, dtype=float)
        if not np.all(np.isfinite(p)):
            raise ValueError("points must be finite")
        q = p - np.asarray(self.center)
        if self.kind == "disk":
            return self.radius - np.hypot(q[..., 0], q[..., 1])
        if self.kind == "annulus":
            r = np.hypot(q[..., 0], q[..., 1])
            return np.minimum(r - self.inner_radius, self.radius - r)
        rho = self.corner_radius
        a, b = self.half_widths
        dx = np.abs(q[..., 0]) - (a - rho)
        dy = np.abs(q[..., 1]) - (b - rho)
        outside = np.hypot(np.maximum(dx, 0.0), np.maximum(dy, 0.0))
        inside = np.minimum(np.maximum(dx, dy), 0.0)
        return -(outside + inside - rho)

    def contains(self, points) -> np.ndarray:
        return self.signed_distance(points) > 0

    @property
    def half_extent(self) -> tuple[float, float]:
        """Half side lengths of the smallest centred box containing the closure."""
        if self.kind == "rect":
            return self.half_widths
        return (self.radius, self.radius)

    @property
    def inradius(self) -> float:
        if self.kind == "disk":
            return self.radius
        if self.kind == "annulus":
            return 0.5 * (self.radius - self.inner_radius)
        return min(self.half_widths)

    def boundary_polyline(self, n: int = 2000) -> np.ndarray:
        """Dense sample of the boundary, used as an independent distance oracle."""
        c = np.asarray(self.center)
        t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        circle = np.stack([np.cos(t), np.sin(t)], axis=1)
        if self.kind == "disk":
            return c + self.radius * circle
        if self.kind == "annulus":
            return np.vstack([c + self.radius * circle, c + self.inner_radius * circle])
        a, b = self.half_widths
        rho = self.corner_radius
        pts = []
        m = max(n // 8, 8)
        for sx, sy in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
            arc = np.linspace(0.0, 0.5 * np.pi, m)
            pts.append(np.stack([sx * (a - rho + rho * np.cos(arc)),
                                 sy * (b - rho + rho * np.sin(arc))], axis=1))
        s = np.linspace(-1.0, 1.0, m)
        pts.append(np.stack([np.full(m, a), s * (b - rho)], axis=1))
        pts.append(np.stack([np.full(m, -a), s * (b - rho)], axis=1))
        pts.append(np.stack([s * (a - rho), np.full(m, b)], axis=1))
        pts.append(np.stack([s * (a - rho), np.full(m, -b)], axis=1))
        return c + np.vstack(pts)


@dataclass
class Grid:
    """Cell-centred lattice over the bounding box of a domain.

    ``index[k, l]`` maps box node ``(k, l)`` to its position among the
    interior unknowns, or ``-1`` for exterior nodes.  ``ii`` and ``jj`` are the
    box indices of the interior nodes in that order.
    """

    domain: Domain
    h: float
    nx: int
    ny: int
    margin: float
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    index: np.ndarray = field(repr=False)
    ii: np.ndarray = field(repr=False)
    jj: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    delta: np.ndarray = field(repr=False)

    @property
    def n_interior(self) -> int:
        return int(self.ii.size)

    @property
    def box_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def box_half_widths(self) -> tuple[float, float]:
        """Half side lengths of the union of box cells."""
        return (0.5 * self.nx * self.h, 0.5 * self.ny * self.h)

    def to_box(self, values) -> np.ndarray:
        """Scatter interior values onto the full box, zero outside."""
        v = np.asarray(values)
        out = np.zeros(self.box_shape + v.shape[1:], dtype=v.dtype)
        out[self.ii, self.jj] = v
        return out

    def box_points(self) -> np.ndarray:
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def inner(self, f, g) -> float:
        """Discrete L2 inner product with cell weight h^2."""
        return float(np.dot(f, g) * self.h**2)

    def norm(self, f) -> float:
        return math.sqrt(self.inner(f, f))

    def locate(self, point, atol: float = 1e-9) -> int:
        """Interior index of the node at ``point``; raises if there is none."""
        p = np.asarray(point, dtype=float)
        k = int(round((p[0] - self.x[0]) / self.h))
        l = int(round((p[1] - self.y[0]) / self.h))
        if not (0 <= k < self.nx and 0 <= l < self.ny):
            raise ValueError("point lies outside the grid box")
        if abs(self.x[k] - p[0]) > atol or abs(self.y[l] - p[1]) > atol:
            raise ValueError("point is not a lattice node")
        idx = int(self.index[k, l])
        if idx < 0:
            raise ValueError("point is an exterior node")
        return idx


def _axis(center: float, half: float, h: float) -> np.ndarray:
    n = math.ceil(half / h + 0.5 - 1e-12)
    return center + (np.arange(-n, n) + 0.5) * h


def build_grid(domain: Domain, h: float, margin: float | None = None) -> Grid:
    """Lay a cell-centred lattice of spacing ``h`` over ``domain``.

    The box extends at least ``margin`` (default ``2h``) beyond the domain so
    that every interior node has a full layer of exterior neighbours.
    """
    if not (isinstance(h, (int, float, np.floating)) and math.isfinite(h) and h > 0):
        raise ValueError("h must be a positive finite number")
    h = float(h)
    if margin is None:
        margin = 2.0 * h
    if margin < 2.0 * h - 1e-12:
        raise ValueError("margin must be at least 2h")
    if h > 0.5 * domain.inradius:
        raise GridTooCoarse(f"h={h} exceeds half the inradius {domain.inradius}")
    ax, ay = domain.half_extent
    x = _axis(domain.center[0], ax + margin, h)
    y = _axis(domain.center[1], ay + margin, h)
    X, Y = np.meshgrid(x, y, indexing="ij")
    sd = domain.signed_distance(np.stack([X, Y], axis=-1))
    inside = sd > 0
    ii, jj = np.nonzero(inside)
    index = np.full(X.shape, -1, dtype=np.int64)
    index[ii, jj] = np.arange(ii.size)
    if ii.size == 0:
        raise GridTooCoarse("no interior nodes")
    points = np.stack([x[ii], y[jj]], axis=1)
    return Grid(domain, h, x.size, y.size, float(margin), x, y, index,
                ii, jj, points, sd[ii, jj])


def boundary_distance(grid: Grid, node) -> float:
    """Distance from an interior node to the boundary.

    ``node`` is either an interior index or the coordinates of a lattice node.
    """
    if isinstance(node, (int, np.integer)):
        if not 0 <= node < grid.n_interior:
            raise ValueError("node index out of range")
        return float(grid.delta[node])
    return float(grid.delta[grid.locate(node)])
