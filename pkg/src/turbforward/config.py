"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, get_args, get_origin, get_type_hints

from .turbulence import CorrelationModel, OpticsConfig, load_variance_table

EXPERIMENTS = ("point_grid", "natural", "matrix_oracle", "difference_scaling")
REQUIRED_KEYS = ("experiment", "output_dir")


class ConfigError(ValueError):
    """Raised for unreadable, incomplete or invalid configuration files."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    output_dir: str
    seed: int = 0
    input_image: Optional[str] = None
    # optics
    aperture_diameter: float = 0.2034
    wavelength: float = 0.525e-6
    path_length: float = 7000.0
    cn2: float = 5e-6
    focal_length: float = 1.2
    r0: Optional[float] = None
    max_d_over_r0: float = 50.0
    height: int = 256
    width: int = 256
    n_modes: int = 36
    variance_table: Optional[str] = None
    # turbulence field
    correlation: str = "smoothed"
    length_scale: float = 16.0
    # sampling
    pupil_resolution: int = 128
    anchors: int = 16
    kernel_size: int = 33
    pad: int = 4
    binning: int = 15
    interpolation: str = "nearest"
    # experiments
    spot_spacing: int = 64
    point_length_scale: float = 3.0
    point_d_over_r0: float = 2.0
    point_binning: int = 1
    psnr_threshold: float = 30.0
    oracle_size: int = 16
    oracle_trials: int = 100
    scales: str = "1,0.5,0.25,0.125"
    scaling_tilt_rms: float = 0.5

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}, got {self.experiment!r}")
        try:
            self.optics()
            self.correlation_model()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for name in ("anchors", "pupil_resolution", "spot_spacing", "oracle_size", "oracle_trials"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("kernel_size", "binning", "point_binning"):
            value = getattr(self, name)
            if value < 1 or value % 2 == 0:
                raise ConfigError(f"{name} must be a positive odd integer, got {value}")
        if self.pad < 2:
            raise ConfigError(f"pad must be >= 2, got {self.pad}")
        if self.interpolation not in ("nearest", "bilinear"):
            raise ConfigError(f"interpolation must be nearest or bilinear, got {self.interpolation!r}")
        if self.kernel_size * self.binning > self.pad * self.pupil_resolution:
            raise ConfigError(
                f"kernel_size * binning = {self.kernel_size * self.binning} exceeds "
                f"pad * pupil_resolution = {self.pad * self.pupil_resolution}"
            )
        if self.experiment == "natural" and self.input_image is None:
            raise ConfigError("the natural experiment needs input_image")
        for name in ("point_length_scale", "point_d_over_r0", "scaling_tilt_rms"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        self.scale_values()

    def point_grid_config(self) -> "ExperimentConfig":
        """Copy with the well-sampled optics used for point sources."""
        return self.replace(
            r0=self.aperture_diameter / self.point_d_over_r0,
            binning=self.point_binning,
            length_scale=self.point_length_scale,
        )

    def optics(self, shape: tuple[int, int] | None = None) -> OpticsConfig:
        h, w = shape if shape is not None else (self.height, self.width)
        return OpticsConfig(
            aperture_diameter=self.aperture_diameter,
            wavelength=self.wavelength,
            path_length=self.path_length,
            cn2=self.cn2,
            focal_length=self.focal_length,
            height=h,
            width=w,
            n_modes=self.n_modes,
            seed=self.seed,
            r0=self.r0,
            max_d_over_r0=self.max_d_over_r0,
        )

    def correlation_model(self, length_scale: float | None = None) -> CorrelationModel:
        return CorrelationModel(self.correlation, self.length_scale if length_scale is None else length_scale)

    def variances(self) -> dict[int, float] | None:
        return None if self.variance_table is None else load_variance_table(self.variance_table)

    def scale_values(self) -> list[float]:
        try:
            values = [float(v) for v in self.scales.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"scales must be comma-separated numbers: {self.scales!r}") from exc
        if len(values) < 2 or any(not v > 0 for v in values):
            raise ConfigError("scales needs at least two positive values")
        return values

    def items(self) -> list[tuple[str, str]]:
        return [(f.name, format_value(getattr(self, f.name))) for f in fields(self)]

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(name: str, raw: str, annotation):
    optional = get_origin(annotation) is not None and type(None) in get_args(annotation)
    base = next(a for a in get_args(annotation) if a is not type(None)) if optional else annotation
    if optional and raw.lower() in ("none", ""):
        return None
    try:
        if base is int:
            return int(raw)
        if base is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return value
    except ValueError:
        raise ConfigError(f"{name}: expected {base.__name__}, got {raw!r}") from None
    return raw


def parse_config(text: str) -> ExperimentConfig:
    hints = get_type_hints(ExperimentConfig)
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in hints:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, raw.strip(), hints[key])
    missing = [k for k in REQUIRED_KEYS if k not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    return ExperimentConfig(**values)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text)


def dump_config(config: ExperimentConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in config.items())
