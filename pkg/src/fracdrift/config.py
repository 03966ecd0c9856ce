"""Flat ``key = value`` run configuration.

Lines starting with ``#`` are comments.  Lists are comma separated and points
are written ``x:y``, separated by ``;``.  Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .drift import Profile

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(v) for v in text.split(","))


def _points(text: str) -> tuple[tuple[float, float], ...]:
    out = []
    for item in text.split(";"):
        item = item.strip()
        if item:
            a, b = item.split(":")
            out.append((float(a), float(b)))
    return tuple(out)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(f"{a:.17g}:{b:.17g}" for a, b in value)
        return ", ".join(f"{v:.17g}" for v in value)
    return str(value)


# key -> (attribute, parser)
_KEYS = {
    "domain.kind": ("domain_kind", str),
    "domain.radius": ("domain_radius", float),
    "domain.inner_radius": ("domain_inner_radius", float),
    "domain.half_widths": ("domain_half_widths", _floats),
    "domain.corner_radius": ("domain_corner_radius", float),
    "alpha": ("alpha", float),
    "grid.h": ("grid_h", float),
    "field.kind": ("field_kind", str),
    "field.profile": ("field_profile", str),
    "field.direction": ("field_direction", _floats),
    "field.table": ("field_table", str),
    "field.order": ("field_order", int),
    "sweep.A": ("sweep_A", _floats),
    "tol.eigen": ("tol_eigen", float),
    "tol.svd": ("tol_svd", float),
    "tol.quadrature": ("tol_quadrature", float),
    "mc.n_paths": ("mc_n_paths", int),
    "mc.dt": ("mc_dt", float),
    "mc.t_max": ("mc_t_max", float),
    "mc.A": ("mc_A", _floats),
    "series.t": ("series_t", float),
    "series.order": ("series_order", int),
    "series.points": ("series_points", _points),
    "series.spacing": ("series_spacing", float),
    "series.n_time": ("series_n_time", int),
    "seed": ("seed", int),
    "out.dir": ("out_dir", str),
}


@dataclass(frozen=True)
class RunConfig:
    domain_kind: str = "disk"
    domain_radius: float = 1.0
    domain_inner_radius: float = 0.5
    domain_half_widths: tuple[float, ...] = (1.0, 1.0)
    domain_corner_radius: float = 0.25
    alpha: float = 1.5
    grid_h: float = 0.05
    field_kind: str = "rotational"
    field_profile: str = "taper:0.8:6"
    field_direction: tuple[float, ...] = (1.0, 0.0)
    field_table: str = ""
    field_order: int = 6
    sweep_A: tuple[float, ...] = (0.0, 10.0, 40.0, 160.0)
    tol_eigen: float = 1e-9
    tol_svd: float = 1e-3
    tol_quadrature: float = 2e-2
    mc_n_paths: int = 200_000
    mc_dt: float = 1e-3
    mc_t_max: float = 4.0
    mc_A: tuple[float, ...] = (0.0, 40.0)
    series_t: float = 0.5
    series_order: int = 2
    series_points: tuple[tuple[float, float], ...] = field(
        default=((0.2, 0.0), (0.0, 0.3), (-0.25, 0.1), (0.1, -0.2)))
    series_spacing: float = 0.05
    series_n_time: int = 64
    seed: int = 0
    out_dir: str = "out"

    def __post_init__(self) -> None:
        def bad(key, why):
            raise ConfigError(f"{key}: {why}")

        if self.domain_kind not in ("disk", "annulus", "rect"):
            bad("domain.kind", f"unknown kind {self.domain_kind!r}")
        if not 1.0 < self.alpha < 2.0:
            bad("alpha", "must lie in (1, 2)")
        if not (self.grid_h > 0 and math.isfinite(self.grid_h)):
            bad("grid.h", "must be positive")
        if self.field_kind not in ("rotational", "constant", "compressible", "none", "table"):
            bad("field.kind", f"unknown kind {self.field_kind!r}")
        if self.field_kind == "table" and not self.field_table:
            bad("field.table", "required when field.kind = table")
        if self.field_kind == "rotational":
            try:
                Profile.parse(self.field_profile)
            except ValueError as exc:
                bad("field.profile", str(exc))
        if len(self.field_direction) != 2:
            bad("field.direction", "needs two components")
        if self.field_order not in (2, 4, 6, 8):
            bad("field.order", "must be 2, 4, 6 or 8")
        if not self.sweep_A:
            bad("sweep.A", "empty amplitude list")
        if not all(math.isfinite(a) for a in self.sweep_A):
            bad("sweep.A", "amplitudes must be finite")
        if not all(math.isfinite(a) for a in self.mc_A) or not self.mc_A:
            bad("mc.A", "amplitudes must be finite and non-empty")
        for key, v in (("tol.eigen", self.tol_eigen), ("tol.svd", self.tol_svd),
                       ("tol.quadrature", self.tol_quadrature)):
            if not 0 < v < 1:
                bad(key, "must lie in (0, 1)")
        if self.mc_n_paths <= 0:
            bad("mc.n_paths", "must be positive")
        if not self.mc_dt > 0:
            bad("mc.dt", "must be positive")
        if not self.mc_t_max > self.mc_dt:
            bad("mc.t_max", "must exceed mc.dt")
        if not self.series_t > 0:
            bad("series.t", "must be positive")
        if not 0 <= self.series_order <= 3:
            bad("series.order", "must lie in [0, 3]")
        if len(self.series_points) < 2:
            bad("series.points", "need at least two points")
        if not self.series_spacing > 0:
            bad("series.spacing", "must be positive")
        if self.series_n_time < 4 or self.series_n_time % 4:
            bad("series.n_time", "must be a positive multiple of 4")
        if not 0 <= self.seed < 2**64:
            bad("seed", "must be a 64-bit unsigned integer")

    def to_text(self) -> str:
        lines = []
        for key, (attr, _) in _KEYS.items():
            lines.append(f"{key} = {_fmt(getattr(self, attr))}")
        return "\n".join(lines) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{key}: unknown key")
        attr, parse = _KEYS[key]
        try:
            values[attr] = parse(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{key}: cannot parse {value!r} ({exc})") from None
    names = {f.name for f in fields(RunConfig)}
    assert set(values) <= names
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"--config: cannot read {path} ({exc.strerror})") from None
    return parse_config(text)
