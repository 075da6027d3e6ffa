"""Forward simulation of imaging through atmospheric turbulence.

The phase over the aperture is expanded in Zernike modes.  Modes 2 and 3
(tilt) become a per-pixel displacement and the rest become a spatially
varying, tilt-free blur.  The package implements both orders of applying
the two operators, the full per-source PSF model they approximate, dense
matrix versions for small grids, and the experiments that compare them.
"""

__version__ = "0.1.0"

from .analysis import (
    DifferenceReport,
    difference_exact,
    difference_first_order,
    difference_report,
    natural_image_experiment,
    point_source_grid_experiment,
    psnr,
)
from .config import ConfigError, ExperimentConfig, load_config
from .estimator import TurbulenceSimulator
from .operators import (
    OperatorMatrix,
    apply_blur,
    apply_tilt,
    blur_then_tilt,
    build_blur_matrix,
    build_tilt_matrix,
    commutator_report,
    full_model,
    tilt_then_blur,
)
from .psf import PsfField, build_psf_field, calibrate_tilt_gain, synthesize_psf
from .pupil import ZernikeStack, build_pupil, build_zernike_stack, noll_to_nm
from .turbulence import CoefficientField, CorrelationModel, OpticsConfig, sample_coefficient_field

__all__ = [
    "CoefficientField",
    "ConfigError",
    "CorrelationModel",
    "DifferenceReport",
    "ExperimentConfig",
    "OperatorMatrix",
    "OpticsConfig",
    "PsfField",
    "TurbulenceSimulator",
    "ZernikeStack",
    "apply_blur",
    "apply_tilt",
    "blur_then_tilt",
    "build_blur_matrix",
    "build_psf_field",
    "build_pupil",
    "build_tilt_matrix",
    "build_zernike_stack",
    "calibrate_tilt_gain",
    "commutator_report",
    "difference_exact",
    "difference_first_order",
    "difference_report",
    "full_model",
    "load_config",
    "natural_image_experiment",
    "noll_to_nm",
    "point_source_grid_experiment",
    "psnr",
    "sample_coefficient_field",
    "synthesize_psf",
    "tilt_then_blur",
]
