"""One sampled turbulence realization: coefficients, tilt map and PSF field."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .psf import PsfField, build_psf_field, calibrate_tilt_gain
from .pupil import PupilGrid, ZernikeStack, build_pupil, build_zernike_stack
from .turbulence import (
    CoefficientField,
    CorrelationModel,
    OpticsConfig,
    TiltField,
    sample_coefficient_field,
    tilt_field_from_coefficients,
)


@dataclass(frozen=True)
class Scene:
    grid: PupilGrid
    stack: ZernikeStack
    coefficients: CoefficientField
    gain: float
    tilts: TiltField
    psfs: PsfField

def tilt_rms(config: ExperimentConfig, gain: float, variances: np.ndarray) -> float:
    """Per-axis RMS tilt in pixels implied by the mode-2 variance."""
    return abs(gain) * math.sqrt(variances[1])


def sample_scene(
    optics: OpticsConfig,
    correlation: CorrelationModel,
    variances: dict[int, float] | None = None,
    pupil_resolution: int = 128,
    anchors: int = 16,
    kernel_size: int = 33,
    pad: int = 4,
    binning: int = 1,
    interpolation: str = "nearest",
    stream: str = "coefficients",
    invariant_blur: bool = False,
) -> Scene:
    """Sample coefficients for the optics' frame and derive tilts and tilt-free PSFs.

    With ``invariant_blur`` every pixel shares the high-order coefficients of
    the image center, and the PSF field has a single kernel.
    """
    shape = (optics.height, optics.width)
    grid = build_pupil(pupil_resolution)
    stack = build_zernike_stack(grid, optics.n_modes)
    coeffs = sample_coefficient_field(optics, correlation, variances, stream=stream)
    values = coeffs.values
    if invariant_blur:
        center = values[shape[0] // 2, shape[1] // 2]
        values = values.copy()
        values[..., 3:] = center[3:]
        values.setflags(write=False)
        coeffs = CoefficientField(values, coeffs.correlation, coeffs.variances, coeffs.d_over_r0)
    gain = calibrate_tilt_gain(stack, pad, binning)
    tilts = tilt_field_from_coefficients(coeffs, gain)
    psfs = build_psf_field(
        values,
        grid,
        stack,
        n_anchors=1 if invariant_blur else min(anchors, *shape),
        kernel_size=kernel_size,
        pad=pad,
        binning=binning,
        interpolation=interpolation,
    )
    return Scene(grid=grid, stack=stack, coefficients=coeffs, gain=gain, tilts=tilts, psfs=psfs)


def build_scene(
    config: ExperimentConfig,
    shape: tuple[int, int],
    stream: str,
    invariant_blur: bool = False,
    length_scale: float | None = None,
) -> Scene:
    """:func:`sample_scene` with every setting taken from ``config``."""
    return sample_scene(
        config.optics(shape),
        config.correlation_model(length_scale),
        config.variances(),
        pupil_resolution=config.pupil_resolution,
        anchors=config.anchors,
        kernel_size=config.kernel_size,
        pad=config.pad,
        binning=config.binning,
        interpolation=config.interpolation,
        stream=stream,
        invariant_blur=invariant_blur,
    )
