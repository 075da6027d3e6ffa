"""How far apart are blur-then-tilt and tilt-then-blur?

Difference maps always store ``blur_then_tilt - tilt_then_blur``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize

from ._validation import check_image, check_tilts
from .config import ExperimentConfig
from ._rng import substream
from .operators import (
    MAX_MATRIX_PIXELS,
    CommutatorReport,
    OperatorMatrix,
    _keys,
    apply_blur,
    blur_then_tilt,
    build_blur_matrix,
    build_tilt_matrix,
    build_tilt_then_blur_matrix,
    commutator_report,
    full_model,
    shift_matrix,
    tilt_then_blur,
)
from .psf import PsfField
from .scene import Scene, build_scene, tilt_rms
from .turbulence import modal_variances

BT_SHAPE_MIN = 0.999
TB_SHAPE_MAX = 0.95
FULL_DISCREPANCY_MAX = 0.02
NATURAL_MARGIN_DB = 6.0


def psnr(reference: np.ndarray, test: np.ndarray, data_range: float | None = None) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical inputs."""
    reference = np.asarray(reference, dtype=float)
    test = np.asarray(test, dtype=float)
    if data_range is None:
        data_range = float(reference.max() - reference.min()) or float(abs(reference).max()) or 1.0
    mse = float(np.mean((reference - test) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range**2 / mse)


@dataclass
class DifferenceReport:
    diff_map: np.ndarray
    max_abs: float
    rms: float
    psnr: float
    first_order_map: np.ndarray | None = None
    residual_norm: float | None = None

    def summary(self) -> dict[str, float]:
        out = {"diff_max_abs": self.max_abs, "diff_rms": self.rms, "psnr_tb_bt": self.psnr}
        if self.residual_norm is not None:
            out["first_order_residual_norm"] = self.residual_norm
        return out


def difference_exact(
    image,
    tilts,
    psfs: PsfField,
    method: str = "gather",
    allow_varying: bool = False,
    data_range: float | None = None,
) -> DifferenceReport:
    """Exact difference of the two orderings on ``image``.

    ``gather`` evaluates both orderings as ``sum_u g(x-u) J(u - t)`` with the
    output tilt (blur-then-tilt) or the source tilt (tilt-then-blur); this
    is the form the first-order expansion is taken from.  A spatially
    varying PSF field is rejected unless ``allow_varying`` is set.
    """
    img, _ = check_image(image)
    if not psfs.is_invariant and not allow_varying:
        raise ValueError("difference analysis assumes a single kernel; pass allow_varying=True")
    tb = blur_then_tilt(img, tilts, psfs, method=method)
    bt = tilt_then_blur(img, tilts, psfs, method=method)
    diff = tb - bt
    ref_range = data_range if data_range is not None else (float(img.max() - img.min()) or 1.0)
    return DifferenceReport(
        diff_map=diff,
        max_abs=float(np.abs(diff).max()),
        rms=float(np.sqrt(np.mean(diff**2))),
        psnr=psnr(tb, bt, ref_range),
    )


GRADIENTS = ("central", "spline")


def image_gradient(image: np.ndarray, method: str = "central") -> np.ndarray:
    """Image gradient at the pixel centers, stacked as ``(..., 2)``.

    ``central`` uses central differences with replicated borders.
    ``spline`` differentiates the edge-replicated cubic spline interpolant
    the gather warp samples from, so a first-order map built on it is the
    exact derivative of the discrete operators.
    """
    if method not in GRADIENTS:
        raise ValueError(f"gradient must be one of {GRADIENTS}, got {method!r}")
    img, _ = check_image(image)
    if method == "spline":
        img = ndimage.spline_filter(img, order=3, mode="nearest")
    p = np.pad(img, 1, mode="edge")
    d_row = 0.5 * (p[2:, 1:-1] - p[:-2, 1:-1])
    d_col = 0.5 * (p[1:-1, 2:] - p[1:-1, :-2])
    return np.stack([d_row, d_col], axis=-1)


def difference_first_order(image, tilts, kernel: np.ndarray, gradient: str = "central") -> np.ndarray:
    """First-order approximation of ``blur_then_tilt - tilt_then_blur``.

    ``sum_j g(x_i - u_j) grad J(u_j) . (t_j - t_i)``: expanding
    ``J(u - t_i) - J(u - t_j)`` to first order gives ``grad J . (t_j - t_i)``.
    """
    img, _ = check_image(image)
    t = check_tilts(tilts, img.shape)
    grad = image_gradient(img, gradient)
    field_ = PsfField.invariant(kernel, img.shape)
    projected = apply_blur((grad * t).sum(axis=-1), field_)
    smoothed = np.stack([apply_blur(grad[..., k], field_) for k in range(2)], axis=-1)
    return projected - (smoothed * t).sum(axis=-1)


def difference_report(
    image, tilts, psfs: PsfField, method: str = "gather", data_range: float | None = None
) -> DifferenceReport:
    """Exact difference plus first-order map and their residual norm.

    For a spatially varying field the first-order map uses the mean kernel.
    """
    report = difference_exact(image, tilts, psfs, method, allow_varying=True, data_range=data_range)
    kernel = psfs.kernels.mean(axis=(0, 1))
    report.first_order_map = difference_first_order(image, tilts, kernel)
    report.residual_norm = float(np.linalg.norm(report.diff_map - report.first_order_map))
    return report


def residual_scaling(
    image,
    tilts,
    kernel: np.ndarray,
    scales=(1.0, 0.5, 0.25, 0.125),
    margin: int | None = None,
    gradient: str = "spline",
) -> tuple[float, np.ndarray]:
    """Fit ``||exact - first order|| ~ eps**p`` over tilt scales ``eps``.

    Norms are taken over the interior, ``margin`` pixels away from the
    frame (default: kernel radius plus the largest tilt plus two), because
    the zero-padded blur and the edge-replicated warp disagree at the
    border at first order.  The spline gradient is the default since the
    central-difference one leaves an O(eps) discretization residue that
    flattens the fit on anything but very smooth images.  Returns the
    exponent ``p`` and the norms.
    """
    img, _ = check_image(image)
    t = check_tilts(tilts, img.shape)
    kernel = np.asarray(kernel, dtype=float)
    if margin is None:
        margin = max(kernel.shape) // 2 + int(math.ceil(np.abs(t).max() * max(scales))) + 2
    if 2 * margin >= min(img.shape):
        raise ValueError(f"margin {margin} leaves no interior in a {img.shape} image")
    inner = (slice(margin, img.shape[0] - margin), slice(margin, img.shape[1] - margin))
    psfs = PsfField.invariant(kernel, img.shape)
    base = difference_first_order(img, t, kernel, gradient)
    norms = []
    for eps in scales:
        exact = difference_exact(img, eps * t, psfs).diff_map
        norms.append(np.linalg.norm((exact - eps * base)[inner]))
    norms = np.array(norms)
    slope = np.polyfit(np.log(scales), np.log(norms), 1)[0]
    return float(slope), norms


def band_energy_fraction(diff_map: np.ndarray, band: np.ndarray) -> float:
    """Share of ``sum(diff**2)`` inside the boolean ``band``."""
    energy = np.asarray(diff_map, dtype=float) ** 2
    total = energy.sum()
    return float(energy[band].sum() / total) if total > 0 else 1.0


# -- shape metric -------------------------------------------------------------------


def _ncc(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = math.sqrt(float((a * a).sum() * (b * b).sum()))
    return float((a * b).sum() / denom) if denom > 0 else 0.0


def _shift_axis(arr: np.ndarray, frac: float, axis: int) -> np.ndarray:
    # out[i] = sum_k keys(k - frac) * arr[i - k], k in -1..2
    out = np.zeros_like(arr)
    n = arr.shape[axis]
    for k in (-1, 0, 1, 2):
        w = float(_keys(np.array(k - frac)))
        if w == 0.0:
            continue
        src = [slice(None)] * arr.ndim
        dst = [slice(None)] * arr.ndim
        src[axis] = slice(max(0, -k), n - max(0, k))
        dst[axis] = slice(max(0, k), n - max(0, -k))
        out[tuple(dst)] += w * arr[tuple(src)]
    return out


def _placed(kernel: np.ndarray, shape: tuple[int, int], shift) -> np.ndarray:
    """Kernel centered at the window middle plus ``shift`` (Keys cubic for fractions).

    Parts of the kernel pushed outside the window are dropped.
    """
    shift = np.asarray(shift, dtype=float)
    whole = np.floor(shift).astype(int)
    kr, kc = kernel.shape
    canvas = np.zeros((shape[0] + kr + 4, shape[1] + kc + 4))
    r0 = canvas.shape[0] // 2 - kr // 2 + whole[0]
    c0 = canvas.shape[1] // 2 - kc // 2 + whole[1]
    canvas[r0 : r0 + kr, c0 : c0 + kc] = kernel
    canvas = _shift_axis(_shift_axis(canvas, shift[0] - whole[0], 0), shift[1] - whole[1], 1)
    top = canvas.shape[0] // 2 - shape[0] // 2
    left = canvas.shape[1] // 2 - shape[1] // 2
    return canvas[top : top + shape[0], left : left + shape[1]]


def shape_correlation(patch: np.ndarray, kernel: np.ndarray, max_shift: int) -> tuple[float, np.ndarray]:
    """Best normalized cross-correlation between ``patch`` and a translate of ``kernel``.

    Integer translations within ``max_shift`` are searched first; the best
    one is then refined to sub-pixel precision with a Nelder-Mead search
    confined to a one-pixel neighbourhood.
    """
    patch = np.asarray(patch, dtype=float)
    best = (-2.0, np.zeros(2))
    for dr in range(-max_shift, max_shift + 1):
        for dc in range(-max_shift, max_shift + 1):
            score = _ncc(patch, _placed(kernel, patch.shape, (dr, dc)))
            if score > best[0]:
                best = (score, np.array([dr, dc], dtype=float))
    start = best[1]

    def cost(x):
        if np.abs(x - start).max() > 1.0:
            return 2.0
        return -_ncc(patch, _placed(kernel, patch.shape, x))

    res = optimize.minimize(
        cost, start, method="Nelder-Mead", options={"xatol": 1e-3, "fatol": 1e-9, "initial_simplex": [start, start + [0.3, 0], start + [0, 0.3]]}
    )
    if -res.fun > best[0]:
        best = (float(-res.fun), np.asarray(res.x, dtype=float))
    return best


# -- experiments --------------------------------------------------------------------


@dataclass
class PointGridResult:
    blur_then_tilt: np.ndarray
    tilt_then_blur: np.ndarray
    full: np.ndarray
    clean: np.ndarray
    spots: list[dict] = field(default_factory=list)
    excluded: int = 0
    tilt_rms: float = 0.0
    scene: Scene | None = field(default=None, repr=False)

    def _values(self, key: str) -> np.ndarray:
        return np.array([s[key] for s in self.spots])

    def summary(self) -> dict[str, float]:
        if not self.spots:
            return {"spots": 0, "excluded": self.excluded}
        bt = self._values("corr_bt")
        tb = self._values("corr_tb")
        return {
            "spots": len(self.spots),
            "excluded": self.excluded,
            "tilt_rms_px": self.tilt_rms,
            "corr_bt_min": float(bt.min()),
            "corr_tb_max": float(tb.max()),
            "corr_gap_min": float((bt - tb).min()),
            "full_vs_bt_max": float(self._values("full_vs_bt").max()),
        }

    def checks(self) -> dict[str, bool]:
        if not self.spots:
            return {"spots_present": False}
        return {
            "bt_shape_preserved": bool(self._values("corr_bt").min() >= BT_SHAPE_MIN),
            "tb_shape_destroyed": bool(self._values("corr_tb").max() < TB_SHAPE_MAX),
            "full_matches_bt": bool(self._values("full_vs_bt").max() < FULL_DISCREPANCY_MAX),
        }


def point_grid_positions(shape: tuple[int, int], spacing: int) -> list[tuple[int, int]]:
    rows = np.arange(spacing // 2, shape[0], spacing)
    cols = np.arange(spacing // 2, shape[1], spacing)
    return [(int(r), int(c)) for r in rows for c in cols]


def point_source_grid_experiment(config: ExperimentConfig, scene: Scene | None = None) -> PointGridResult:
    """Point sources under one invariant blur and a dense tilt map.

    Renders both orderings and the full model, then scores each spot by its
    best correlation with a translated copy of the blur kernel.  Spots whose
    window, or whose tilted kernel, would leave the frame are excluded.
    """
    config = config.point_grid_config()
    shape = (config.height, config.width)
    spacing = config.spot_spacing
    if spacing <= config.kernel_size:
        raise ValueError("spot spacing must exceed the kernel size")
    if scene is None:
        scene = build_scene(config, shape, "point_grid", invariant_blur=True)
    clean = np.zeros(shape)
    positions = point_grid_positions(shape, spacing)
    for r, c in positions:
        clean[r, c] = 1.0
    t = scene.tilts.values
    psfs = scene.psfs
    tb = blur_then_tilt(clean, t, psfs)
    bt = tilt_then_blur(clean, t, psfs)
    full = full_model(
        clean,
        scene.coefficients,
        scene.grid,
        scene.stack,
        config.kernel_size,
        config.pad,
        config.binning,
        gain=scene.gain,
    )
    kernel = psfs.kernels[0, 0]
    half_window = spacing // 2 - 1
    kh = config.kernel_size // 2
    max_shift = int(math.ceil(np.abs(t).max())) + 1
    result = PointGridResult(blur_then_tilt=tb, tilt_then_blur=bt, full=full, clean=clean, scene=scene)
    result.tilt_rms = float(np.sqrt(np.mean(t**2)))
    for r, c in positions:
        land = np.array([r, c]) + t[r, c]
        reach = np.abs(t[r, c]).max() + kh + 1
        inside_window = reach <= half_window
        inside_frame = (
            r - half_window >= 0
            and c - half_window >= 0
            and r + half_window < shape[0]
            and c + half_window < shape[1]
            and land.min() - kh - 1 >= 0
            and land[0] + kh + 1 < shape[0]
            and land[1] + kh + 1 < shape[1]
        )
        if not (inside_window and inside_frame):
            result.excluded += 1
            continue
        window = (slice(r - half_window, r + half_window + 1), slice(c - half_window, c + half_window + 1))
        corr_bt, shift_bt = shape_correlation(bt[window], kernel, max_shift)
        corr_tb, _ = shape_correlation(tb[window], kernel, max_shift)
        peak = bt[window].max()
        result.spots.append(
            {
                "row": r,
                "col": c,
                "tilt_row": float(t[r, c, 0]),
                "tilt_col": float(t[r, c, 1]),
                "corr_bt": corr_bt,
                "corr_tb": corr_tb,
                "fit_shift_row": float(shift_bt[0]),
                "fit_shift_col": float(shift_bt[1]),
                "full_vs_bt": float(np.abs(full[window] - bt[window]).max() / peak),
            }
        )
    return result


@dataclass
class NaturalImageResult:
    clean: np.ndarray
    blur_then_tilt: np.ndarray
    tilt_then_blur: np.ndarray
    report: DifferenceReport
    psnr_clean_bt: float
    psnr_clean_tb: float
    threshold: float
    tilt_rms: float
    d_over_r0: float
    scene: Scene | None = field(default=None, repr=False)

    def summary(self) -> dict[str, float]:
        out = self.report.summary()
        out.update(
            {
                "psnr_clean_bt": self.psnr_clean_bt,
                "psnr_clean_tb": self.psnr_clean_tb,
                "tilt_rms_px": self.tilt_rms,
                "d_over_r0": self.d_over_r0,
            }
        )
        return out

    def checks(self) -> dict[str, bool]:
        return {
            "orderings_close": bool(self.report.psnr > self.threshold),
            "orderings_closer_than_clean": bool(self.report.psnr > self.psnr_clean_bt + NATURAL_MARGIN_DB),
        }


def natural_image_experiment(image, config: ExperimentConfig, scene: Scene | None = None) -> NaturalImageResult:
    """Both orderings on a natural image, in gather form.

    The image is edge-padded by the kernel radius plus four tilt RMS so that
    the frame border does not leak into the comparison; outputs are cropped
    back to the input size.  PSNR uses the clean image's value range.
    """
    clean, _ = check_image(image)
    if min(clean.shape) < 128:
        raise ValueError("natural image experiment needs at least 128 x 128 pixels")
    if scene is None:
        from .psf import calibrate_tilt_gain
        from .pupil import build_pupil, build_zernike_stack

        stack = build_zernike_stack(build_pupil(config.pupil_resolution), config.n_modes)
        gain = calibrate_tilt_gain(stack, config.pad, config.binning)
        with warnings.catch_warnings():
            # the scene build below reports the clamp once
            warnings.simplefilter("ignore", RuntimeWarning)
            variances = modal_variances(config.optics(clean.shape), config.variances())
        rms = tilt_rms(config, gain, variances)
        margin = config.kernel_size // 2 + int(math.ceil(4 * rms)) + 2
        padded_shape = (clean.shape[0] + 2 * margin, clean.shape[1] + 2 * margin)
        scene = build_scene(config, padded_shape, "natural")
    margin = (scene.tilts.shape[0] - clean.shape[0]) // 2
    padded = np.pad(clean, margin, mode="edge")
    crop = (slice(margin, margin + clean.shape[0]), slice(margin, margin + clean.shape[1]))
    data_range = float(clean.max() - clean.min()) or float(abs(clean).max()) or 1.0
    full = difference_report(padded, scene.tilts.values, scene.psfs, data_range=data_range)
    tb = blur_then_tilt(padded, scene.tilts.values, scene.psfs, method="gather")[crop]
    bt = tilt_then_blur(padded, scene.tilts.values, scene.psfs, method="gather")[crop]
    diff = tb - bt
    report = DifferenceReport(
        diff_map=diff,
        max_abs=float(np.abs(diff).max()),
        rms=float(np.sqrt(np.mean(diff**2))),
        psnr=psnr(tb, bt, data_range),
        first_order_map=full.first_order_map[crop],
    )
    report.residual_norm = float(np.linalg.norm(diff - report.first_order_map))
    return NaturalImageResult(
        clean=clean,
        blur_then_tilt=tb,
        tilt_then_blur=bt,
        report=report,
        psnr_clean_bt=psnr(clean, bt, data_range),
        psnr_clean_tb=psnr(clean, tb, data_range),
        threshold=config.psnr_threshold,
        tilt_rms=float(np.sqrt(np.mean(scene.tilts.values[crop] ** 2))),
        d_over_r0=scene.coefficients.d_over_r0,
        scene=scene,
    )


@dataclass
class ScalingResult:
    image: np.ndarray
    tilts: np.ndarray
    scales: list[float]
    norms: np.ndarray
    exponent: float
    band: tuple[float, float] = (1.8, 2.2)
    scene: Scene | None = field(default=None, repr=False)

    def summary(self) -> dict[str, float]:
        out = {"exponent": self.exponent, "tilt_rms_px": float(np.sqrt(np.mean(self.tilts**2)))}
        for eps, norm in zip(self.scales, self.norms):
            out[f"residual_norm_eps_{eps:g}"] = float(norm)
        return out

    def checks(self) -> dict[str, bool]:
        return {"residual_second_order": bool(self.band[0] <= self.exponent <= self.band[1])}


def smooth_test_image(shape: tuple[int, int], seed: int, sigma: float = 4.0) -> np.ndarray:
    """Zero-mean, unit-variance Gaussian-filtered noise (periodic filter)."""
    rng = substream(seed, "scaling_image")
    img = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    return img / img.std()


def difference_scaling_experiment(config: ExperimentConfig, image=None, scene: Scene | None = None) -> ScalingResult:
    """Second-order remainder of the first-order difference map.

    Uses the well-sampled point-grid optics with one invariant kernel and
    a smooth tilt map rescaled to ``scaling_tilt_rms`` pixels.  Without an
    ``image`` a smooth random test image is drawn.
    """
    config = config.point_grid_config().replace(length_scale=config.length_scale)
    shape = (config.height, config.width)
    img = smooth_test_image(shape, config.seed) if image is None else check_image(image)[0]
    if scene is None:
        scene = build_scene(config, img.shape, "difference_scaling", invariant_blur=True)
    t = scene.tilts.values
    rms = float(np.sqrt(np.mean(t**2)))
    t = t * (config.scaling_tilt_rms / rms) if rms > 0 else t
    scales = config.scale_values()
    exponent, norms = residual_scaling(img, t, scene.psfs.kernels[0, 0], scales)
    return ScalingResult(image=img, tilts=t, scales=scales, norms=norms, exponent=exponent, scene=scene)


@dataclass
class MatrixOracleResult:
    trials: int
    max_error_tb: float
    max_error_bt: float
    commutator: CommutatorReport
    failures: list[str] = field(default_factory=list)
    tolerance: float = 1e-6
    shift: OperatorMatrix | None = field(default=None, repr=False)
    witness: OperatorMatrix | None = field(default=None, repr=False)

    def summary(self) -> dict[str, float]:
        return {
            "trials": self.trials,
            "max_error_TB": self.max_error_tb,
            "max_error_BT": self.max_error_bt,
            "commutator_max_abs": self.commutator.max_abs,
            "commutator_frobenius": self.commutator.frobenius,
            "BT_columns": self.commutator.bt_columns or "none",
            "TB_rows": self.commutator.tb_rows or "none",
        }

    def checks(self) -> dict[str, bool]:
        return {
            "TB_matches_matrix": self.max_error_tb <= self.tolerance,
            "BT_matches_matrix": self.max_error_bt <= self.tolerance,
            "TB_neq_BT": self.commutator.max_abs > 0,
            "shift_structure": self.commutator.tb_rows == "up" and self.commutator.bt_columns == "right",
        }


def _random_instance(rng: np.random.Generator, one_d: bool, size: int):
    if one_d:
        shape = (1, int(rng.integers(2, min(64, 4 * size) + 1)))
    else:
        shape = tuple(int(v) for v in rng.integers(2, size + 1, size=2))
    k = int(rng.choice([1, 3, 5]))
    lattice = tuple(int(rng.integers(1, min(3, s) + 1)) for s in shape)
    kshape = (1, k) if one_d else (k, k)
    kernels = rng.random(lattice + kshape)
    kernels /= kernels.sum(axis=(2, 3), keepdims=True)
    interp = "bilinear" if rng.random() < 0.5 else "nearest"
    psfs = PsfField(kernels=kernels, image_shape=shape, interpolation=interp)
    tilts = rng.integers(-3, 4, size=shape + (2,)).astype(float)
    if one_d:
        tilts[..., 0] = 0.0
    image = rng.standard_normal(shape)
    return image, tilts, psfs


def matrix_oracle_experiment(config: ExperimentConfig) -> MatrixOracleResult:
    """Image-space compositions against dense matrix products on random small cases.

    Even trials are 1-D signals (up to ``4 * oracle_size`` samples, at most
    64), odd trials 2-D images up to ``oracle_size`` on a side.  Tilts are
    integers in ``[-3, 3]``.  A non-Toeplitz blur with the one-step shift
    provides the commutator witness.
    """
    size = config.oracle_size
    if size < 2 or size * size > MAX_MATRIX_PIXELS:
        raise ValueError(f"oracle_size must lie in 2..{int(math.isqrt(MAX_MATRIX_PIXELS))}")
    rng = substream(config.seed, "matrix_oracle")
    err_tb = err_bt = 0.0
    failures = []
    for trial in range(config.oracle_trials):
        image, tilts, psfs = _random_instance(rng, trial % 2 == 0, size)
        tmat = build_tilt_matrix(tilts, image.shape)
        bmat = build_blur_matrix(psfs)
        tb = blur_then_tilt(image, tilts, psfs)
        bt = tilt_then_blur(image, tilts, psfs)
        e_tb = float(np.abs(tb - (tmat.matrix @ bmat.matrix @ image.ravel()).reshape(image.shape)).max())
        e_bt = float(np.abs(bt - build_tilt_then_blur_matrix(tilts, psfs).apply(image)).max())
        if psfs.is_invariant:
            e_bt = max(e_bt, float(np.abs(bt - (bmat.matrix @ tmat.matrix @ image.ravel()).reshape(image.shape)).max()))
        if max(e_tb, e_bt) > 1e-6:
            failures.append(f"trial {trial}: shape {image.shape} errors {e_tb:.3g} {e_bt:.3g}")
        err_tb = max(err_tb, e_tb)
        err_bt = max(err_bt, e_bt)
    n = min(64, 4 * size)
    # distinct rows, no Toeplitz structure
    witness = rng.random((n, n)) + np.arange(n)[:, None]
    shift = shift_matrix(n)
    blur = OperatorMatrix(witness, "BLUR", (1, n))
    return MatrixOracleResult(
        trials=config.oracle_trials,
        max_error_tb=err_tb,
        max_error_bt=err_bt,
        commutator=commutator_report(shift, blur),
        failures=failures,
        shift=shift,
        witness=blur,
    )
