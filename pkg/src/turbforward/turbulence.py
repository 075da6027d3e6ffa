"""Random Zernike coefficient fields and the tilt maps derived from them."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import ndimage

from ._rng import substream


@dataclass(frozen=True)
class OpticsConfig:
    """Optical path and sampling parameters.

    Lengths are in meters and ``cn2`` in m^(-2/3).  ``r0`` overrides the
    Fried parameter computed from the path; ``max_d_over_r0`` caps the
    implied turbulence strength.
    """

    aperture_diameter: float = 0.2034
    wavelength: float = 0.525e-6
    path_length: float = 7000.0
    cn2: float = 5e-6
    focal_length: float = 1.2
    height: int = 256
    width: int = 256
    n_modes: int = 36
    seed: int = 0
    r0: float | None = None
    max_d_over_r0: float = 50.0

    def __post_init__(self):
        for name in ("aperture_diameter", "wavelength", "path_length", "cn2", "focal_length", "max_d_over_r0"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be strictly positive, got {value}")
        if self.r0 is not None and not self.r0 > 0:
            raise ValueError(f"r0 must be strictly positive, got {self.r0}")
        if self.height < 1 or self.width < 1:
            raise ValueError("image size must be positive")
        if self.n_modes < 3:
            raise ValueError(f"need at least 3 Zernike modes, got {self.n_modes}")


def fried_parameter(config: OpticsConfig) -> float:
    """Plane-wave Fried parameter for constant ``C_n^2`` along the path."""
    if config.r0 is not None:
        return float(config.r0)
    k = 2 * math.pi / config.wavelength
    return (0.423 * k**2 * config.cn2 * config.path_length) ** (-3 / 5)


def d_over_r0(config: OpticsConfig) -> float:
    """Turbulence strength ``D / r0``, clamped to ``config.max_d_over_r0``."""
    ratio = config.aperture_diameter / fried_parameter(config)
    if ratio > config.max_d_over_r0:
        warnings.warn(
            f"D/r0 = {ratio:.4g} exceeds the cap {config.max_d_over_r0:g}; clamping",
            RuntimeWarning,
            stacklevel=2,
        )
        return float(config.max_d_over_r0)
    return float(ratio)


def parse_variance_table(text: str) -> dict[int, float]:
    table = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'mode = variance'")
        mode = int(key)
        var = float(value)
        if mode < 1 or var < 0 or not math.isfinite(var):
            raise ValueError(f"line {lineno}: invalid entry {raw!r}")
        if mode in table:
            raise ValueError(f"line {lineno}: duplicate mode {mode}")
        table[mode] = var
    return table


def load_variance_table(path: str | Path) -> dict[int, float]:
    """Read ``mode = multiplier`` lines (rad^2 per unit ``(D/r0)^(5/3)``)."""
    return parse_variance_table(Path(path).read_text())


def default_variance_table() -> dict[int, float]:
    """Noll's Kolmogorov diagonal variances for modes 1..66."""
    text = resources.files("turbforward").joinpath("data/noll_kolmogorov.txt").read_text()
    return parse_variance_table(text)


@dataclass(frozen=True)
class CorrelationModel:
    """Spatial correlation between pixels of one mode.

    ``independent`` draws every pixel separately.  ``smoothed`` filters white
    noise with a Gaussian so the correlation between pixels at distance
    ``d`` is ``exp(-d**2 / (2 * length_scale**2))``.
    """

    kind: str = "smoothed"
    length_scale: float = 16.0

    def __post_init__(self):
        if self.kind not in ("independent", "smoothed"):
            raise ValueError(f"unknown correlation model {self.kind!r}")
        if self.kind == "smoothed" and not self.length_scale > 0:
            raise ValueError(f"length scale must be positive, got {self.length_scale}")

    def describe(self) -> str:
        if self.kind == "independent":
            return "independent"
        return f"smoothed(length_scale={self.length_scale:g})"


@dataclass(frozen=True)
class CoefficientField:
    """``H x W x M`` Zernike coefficients in waves, with their generating model."""

    values: np.ndarray
    correlation: CorrelationModel
    variances: np.ndarray = field(repr=False)
    d_over_r0: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[:2]

    @property
    def n_modes(self) -> int:
        return self.values.shape[2]


def modal_variances(
    config: OpticsConfig, table: dict[int, float] | None = None, ratio: float | None = None
) -> np.ndarray:
    """Per-mode coefficient variance in waves^2 for ``config`` (or an explicit ``D/r0``)."""
    table = default_variance_table() if table is None else table
    missing = [m for m in range(1, config.n_modes + 1) if m not in table]
    if missing:
        raise ValueError(f"variance table lacks modes {missing[:5]}{'...' if len(missing) > 5 else ''}")
    strength = (d_over_r0(config) if ratio is None else ratio) ** (5 / 3)
    rad2 = np.array([table[m] for m in range(1, config.n_modes + 1)]) * strength
    return rad2 / (2 * math.pi) ** 2


def _unit_variance_noise(rng: np.random.Generator, shape: tuple[int, int], correlation: CorrelationModel) -> np.ndarray:
    white = rng.standard_normal(shape)
    if correlation.kind == "independent":
        return white
    sigma = correlation.length_scale / math.sqrt(2)
    smooth = ndimage.gaussian_filter(white, sigma, mode="wrap")
    # exact marginal variance of the filter output for stationary white input
    delta = np.zeros(shape)
    delta[0, 0] = 1.0
    gain = np.sqrt((ndimage.gaussian_filter(delta, sigma, mode="wrap") ** 2).sum())
    return smooth / gain


def sample_coefficient_field(
    config: OpticsConfig,
    correlation: CorrelationModel | None = None,
    variance_table: dict[int, float] | None = None,
    stream: str = "coefficients",
) -> CoefficientField:
    """Gaussian coefficient field, deterministic in ``(config.seed, stream)``.

    Each mode is an independent zero-mean field whose marginal variance is
    the mode's table entry times ``(D/r0)^(5/3)``, converted to waves^2.
    """
    correlation = CorrelationModel() if correlation is None else correlation
    ratio = d_over_r0(config)
    variances = modal_variances(config, variance_table, ratio)
    rng = substream(config.seed, stream)
    shape = (config.height, config.width)
    values = np.zeros(shape + (config.n_modes,))
    for m in range(1, config.n_modes):
        noise = _unit_variance_noise(rng, shape, correlation)
        values[..., m] = math.sqrt(variances[m]) * noise
    values.setflags(write=False)
    variances.setflags(write=False)
    return CoefficientField(
        values=values,
        correlation=correlation,
        variances=variances,
        d_over_r0=ratio,
    )


@dataclass(frozen=True)
class TiltField:
    """Per-pixel displacement ``(d_row, d_col)`` in image pixels."""

    values: np.ndarray
    gain: float = 1.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[:2]

    def scaled(self, factor: float) -> "TiltField":
        return TiltField(values=self.values * factor, gain=self.gain * factor)


def tilt_field_from_coefficients(field_: CoefficientField | np.ndarray, gain: float) -> TiltField:
    """Displacements ``gain * (a_2, a_3)``; ``gain`` comes from ``calibrate_tilt_gain``."""
    values = field_.values if isinstance(field_, CoefficientField) else np.asarray(field_, dtype=float)
    if values.ndim != 3 or values.shape[2] < 3:
        raise ValueError("coefficient field must be H x W x M with M >= 3")
    return TiltField(values=gain * values[..., 1:3], gain=float(gain))
