"""scikit-learn style front end: fit samples a turbulence realization, transform images it."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .operators import blur_then_tilt, full_model, tilt_then_blur
from .scene import sample_scene
from .turbulence import CorrelationModel, OpticsConfig

ORDERS = ("tilt_then_blur", "blur_then_tilt", "full")


class TurbulenceSimulator(TransformerMixin, BaseEstimator):
    """Simulate imaging through turbulence with a frozen realization.

    ``fit`` draws one coefficient field sized to the training image, with
    its tilt map and tilt-free PSF field.  ``transform`` then applies the
    chosen ordering to any image of the same size, so repeated calls see the
    same atmosphere.

    Parameters
    ----------
    order : {"tilt_then_blur", "blur_then_tilt", "full"}
        Which composition ``transform`` applies.  ``full`` synthesizes one
        PSF per anchor from all modes and is slow on dense images.
    method : {"scatter", "gather"}
        Evaluation form for the two split orderings.
    random_state : int
        Seed of the named random streams.
    r0 : float, optional
        Fried parameter in meters; computed from ``cn2`` and the path when
        omitted.

    Attributes
    ----------
    scene_ : Scene
        The sampled realization.
    tilts_ : ndarray of shape (H, W, 2)
        Per-pixel displacement in pixels.
    d_over_r0_ : float
        Turbulence strength actually used (after the cap).
    image_shape_ : tuple of int
    """

    def __init__(
        self,
        order="tilt_then_blur",
        method="scatter",
        aperture_diameter=0.2034,
        wavelength=0.525e-6,
        path_length=7000.0,
        cn2=5e-6,
        focal_length=1.2,
        r0=None,
        max_d_over_r0=50.0,
        n_modes=36,
        correlation="smoothed",
        length_scale=16.0,
        pupil_resolution=128,
        anchors=16,
        kernel_size=33,
        pad=4,
        binning=15,
        interpolation="nearest",
        random_state=0,
    ):
        self.order = order
        self.method = method
        self.aperture_diameter = aperture_diameter
        self.wavelength = wavelength
        self.path_length = path_length
        self.cn2 = cn2
        self.focal_length = focal_length
        self.r0 = r0
        self.max_d_over_r0 = max_d_over_r0
        self.n_modes = n_modes
        self.correlation = correlation
        self.length_scale = length_scale
        self.pupil_resolution = pupil_resolution
        self.anchors = anchors
        self.kernel_size = kernel_size
        self.pad = pad
        self.binning = binning
        self.interpolation = interpolation
        self.random_state = random_state

    def _check_params(self):
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}, got {self.order!r}")
        if self.method not in ("scatter", "gather"):
            raise ValueError(f"method must be scatter or gather, got {self.method!r}")
        if not isinstance(self.random_state, (int, np.integer)):
            raise ValueError("random_state must be an integer seed")

    def fit(self, X, y=None):
        """Sample the realization for images shaped like ``X``."""
        self._check_params()
        X = check_array(X, dtype=np.float64)
        optics = OpticsConfig(
            aperture_diameter=self.aperture_diameter,
            wavelength=self.wavelength,
            path_length=self.path_length,
            cn2=self.cn2,
            focal_length=self.focal_length,
            height=X.shape[0],
            width=X.shape[1],
            n_modes=self.n_modes,
            seed=int(self.random_state),
            r0=self.r0,
            max_d_over_r0=self.max_d_over_r0,
        )
        self.scene_ = sample_scene(
            optics,
            CorrelationModel(self.correlation, self.length_scale),
            pupil_resolution=self.pupil_resolution,
            anchors=self.anchors,
            kernel_size=self.kernel_size,
            pad=self.pad,
            binning=self.binning,
            interpolation=self.interpolation,
        )
        self.tilts_ = self.scene_.tilts.values
        self.d_over_r0_ = self.scene_.coefficients.d_over_r0
        self.image_shape_ = X.shape
        return self

    def transform(self, X):
        """Apply the fitted turbulence to ``X``."""
        check_is_fitted(self, "scene_")
        X = check_array(X, dtype=np.float64)
        if X.shape != self.image_shape_:
            raise ValueError(f"fitted for images of shape {self.image_shape_}, got {X.shape}")
        scene = self.scene_
        if self.order == "blur_then_tilt":
            return blur_then_tilt(X, scene.tilts, scene.psfs, method=self.method)
        if self.order == "tilt_then_blur":
            return tilt_then_blur(X, scene.tilts, scene.psfs, method=self.method)
        return full_model(
            X,
            scene.coefficients,
            scene.grid,
            scene.stack,
            self.kernel_size,
            self.pad,
            self.binning,
            n_anchors=scene.psfs.lattice[0],
            interpolation=self.interpolation,
            gain=scene.gain,
        )
