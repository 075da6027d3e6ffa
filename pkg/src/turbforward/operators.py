"""Tilt and blur operators, their two compositions, and the dense matrix oracle.

Conventions: a tilt ``t`` at pixel ``u`` moves the value at ``u`` to
``u + t`` (row, column order).  Kernels are centered on their middle pixel.
Anything that would land outside the frame is dropped, in both the
image-space routines and the matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import ndimage, signal

from ._validation import check_image, check_tilts, restore_shape
from .psf import PsfField, anchor_pixels, calibrate_tilt_gain, synthesize_psf
from .pupil import PupilGrid, ZernikeStack


# -- tilt ---------------------------------------------------------------------------


def _keys(s: np.ndarray, a: float = -0.5) -> np.ndarray:
    s = np.abs(s)
    near = (a + 2) * s**3 - (a + 3) * s**2 + 1
    far = a * s**3 - 5 * a * s**2 + 8 * a * s - 4 * a
    return np.where(s <= 1, near, np.where(s < 2, far, 0.0))


_TAPS = {
    "bilinear": (0, 1),
    "cubic": (-1, 0, 1, 2),
}


def _tap_weights(frac: np.ndarray, offset: int, interp: str) -> np.ndarray:
    if interp == "bilinear":
        return 1 - frac if offset == 0 else frac
    return _keys(offset - frac)


def _splat(image: np.ndarray, tilts: np.ndarray, interp: str = "bilinear") -> np.ndarray:
    """Deposit each pixel at ``u + t`` with separable interpolation weights.

    ``bilinear`` uses 2x2 nonnegative weights; ``cubic`` uses 4x4 Keys
    weights, which sum to one but dip slightly negative.  Both are exact
    for integer displacements.
    """
    if interp not in _TAPS:
        raise ValueError(f"unknown interpolation {interp!r}")
    h, w = image.shape
    rows, cols = np.indices((h, w), dtype=float)
    pr = rows + tilts[..., 0]
    pc = cols + tilts[..., 1]
    r0 = np.floor(pr)
    c0 = np.floor(pc)
    fr = pr - r0
    fc = pc - c0
    r0 = r0.astype(np.int64)
    c0 = c0.astype(np.int64)
    out = np.zeros(h * w)
    for dr in _TAPS[interp]:
        wr = _tap_weights(fr, dr, interp)
        for dc in _TAPS[interp]:
            weight = wr * _tap_weights(fc, dc, interp)
            rr = r0 + dr
            cc = c0 + dc
            keep = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w) & (weight != 0)
            # bincount accumulates in index order, so ties resolve deterministically
            out += np.bincount((rr * w + cc)[keep], weights=(image * weight)[keep], minlength=h * w)
    return out.reshape(h, w)


def apply_tilt(image, tilts, return_mass_loss: bool = False):
    """Forward-warp ``image`` by bilinear splatting.

    Each source pixel deposits its value at ``u + t``, split over the four
    surrounding pixels.  Deposits outside the frame are dropped; with
    ``return_mass_loss`` the dropped total is returned as well.
    """
    img, was_1d = check_image(image)
    t = check_tilts(tilts, img.shape)
    out = _splat(img, t)
    result = restore_shape(out, was_1d)
    if return_mass_loss:
        return result, float(img.sum() - out.sum())
    return result


def inverse_warp(image, tilts, order: int = 3) -> np.ndarray:
    """Gather-warp: output ``x`` samples ``image`` at ``x - t(x)`` (spline, edge-replicated)."""
    img, was_1d = check_image(image)
    t = check_tilts(tilts, img.shape)
    if not t.any():
        # spline resampling is not bit-exact even at zero displacement
        return restore_shape(img.copy(), was_1d)
    rows, cols = np.indices(img.shape, dtype=float)
    coords = np.stack([rows - t[..., 0], cols - t[..., 1]])
    out = ndimage.map_coordinates(img, coords, order=order, mode="nearest")
    return restore_shape(out, was_1d)


# -- blur ---------------------------------------------------------------------------


def _bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return rows[0], rows[-1] + 1, cols[0], cols[-1] + 1


def _convolve_region(padded: np.ndarray, kernel: np.ndarray, box: tuple[int, int, int, int]) -> np.ndarray:
    """Zero-padded convolution evaluated on output rows/cols ``box`` only."""
    r0, r1, c0, c1 = box
    kr, kc = kernel.shape
    patch = padded[r0 : r1 + kr - 1, c0 : c1 + kc - 1]
    return signal.convolve(patch, kernel, mode="valid")


def _check_field(psfs: PsfField, shape: tuple[int, int]) -> None:
    if tuple(psfs.image_shape) != tuple(shape):
        raise ValueError(f"PSF field built for {psfs.image_shape}, image is {shape}")


def apply_blur(image, psfs: PsfField) -> np.ndarray:
    """Spatially varying convolution with output-anchored kernels.

    Output pixel ``x`` is ``sum_a w_a(x) (k_a * J)(x)``, where ``w_a`` are the
    field's anchor weights.  A single-anchor field is an ordinary
    zero-padded convolution.
    """
    img, was_1d = check_image(image)
    _check_field(psfs, img.shape)
    kr, kc = psfs.kernel_shape
    padded = np.pad(img, ((kr // 2, kr // 2), (kc // 2, kc // 2)))
    out = np.zeros_like(img)
    for (a, b), weight in psfs.anchor_weights():
        r0, r1, c0, c1 = box = _bbox(weight > 0)
        out[r0:r1, c0:c1] += weight[r0:r1, c0:c1] * _convolve_region(padded, psfs.kernels[a, b], box)
    return restore_shape(out, was_1d)


def _deposit(out: np.ndarray, source: np.ndarray, kernel: np.ndarray, offset=(0, 0)) -> None:
    """Add ``kernel * source`` (full support, shifted by ``offset``) into ``out``, cropping to the frame."""
    if not source.any():
        return
    h, w = out.shape
    kr, kc = kernel.shape
    r0, r1, c0, c1 = _bbox(source != 0)
    full = signal.convolve(source[r0:r1, c0:c1], kernel, mode="full")
    top = r0 - kr // 2 + offset[0]
    left = c0 - kc // 2 + offset[1]
    fr0 = max(0, -top)
    fc0 = max(0, -left)
    fr1 = min(full.shape[0], h - top)
    fc1 = min(full.shape[1], w - left)
    if fr1 <= fr0 or fc1 <= fc0:
        return
    out[top + fr0 : top + fr1, left + fc0 : left + fc1] += full[fr0:fr1, fc0:fc1]


def _scatter_blur(img: np.ndarray, t: np.ndarray, psfs: PsfField, kernel_shift: str) -> np.ndarray:
    out = np.zeros_like(img)
    for (a, b), weight in psfs.anchor_weights():
        _deposit(out, _splat(img * weight, t, kernel_shift), psfs.kernels[a, b])
    return out


# -- compositions -------------------------------------------------------------------


def blur_then_tilt(image, tilts, psfs: PsfField, method: str = "scatter") -> np.ndarray:
    """Blur first, then tilt the blurred image.

    ``scatter`` splats the blurred image forward by ``t`` (the matrix product
    ``T @ B``).  ``gather`` samples the blurred image at ``x - t(x)``, which
    assigns the output pixel's own tilt to every contribution.
    """
    img, was_1d = check_image(image)
    t = check_tilts(tilts, img.shape)
    blurred = apply_blur(img, psfs)
    if method == "scatter":
        out = _splat(blurred, t)
    elif method == "gather":
        out = inverse_warp(blurred, t)
    else:
        raise ValueError(f"unknown method {method!r}")
    return restore_shape(out, was_1d)


def tilt_then_blur(
    image, tilts, psfs: PsfField, method: str = "scatter", kernel_shift: str = "cubic"
) -> np.ndarray:
    """Tilt first, then blur: each source keeps its whole kernel.

    ``scatter`` deposits ``J(u) * g_u(x - u - t_u)`` for every source ``u``,
    using the kernel of the anchor nearest the source (weights from the
    field's interpolation rule).  Fractional ``t_u`` translate the kernel by
    ``kernel_shift`` resampling (``cubic`` Keys or ``bilinear``); integer
    tilts are exact either way, and for a single-anchor field the result is
    ``B @ T``.  ``gather`` blurs ``J(u - t(u))`` with the output-anchored
    field.
    """
    img, was_1d = check_image(image)
    t = check_tilts(tilts, img.shape)
    _check_field(psfs, img.shape)
    if method == "scatter":
        out = _scatter_blur(img, t, psfs, kernel_shift)
    elif method == "gather":
        out = apply_blur(inverse_warp(img, t), psfs)
    else:
        raise ValueError(f"unknown method {method!r}")
    return restore_shape(out, was_1d)


def full_model(
    image,
    coefficients,
    grid: PupilGrid,
    stack: ZernikeStack,
    kernel_size: int = 33,
    pad: int = 4,
    binning: int = 1,
    n_anchors: int | None = None,
    interpolation: str = "nearest",
    gain: float | None = None,
) -> np.ndarray:
    """Blur every source with the PSF of all its Zernike modes at once.

    With ``n_anchors=None`` each nonzero source pixel gets its own PSF
    synthesized from its coefficient vector, which is exact but only
    practical for sparse inputs.  Otherwise the PSF of the anchor nearest
    each source is used.  Each kernel is cropped around its tilt-predicted
    position (``gain`` image pixels per wave), so tilts larger than the
    kernel radius are not clipped.
    """
    img, was_1d = check_image(image)
    coeffs = np.asarray(getattr(coefficients, "values", coefficients), dtype=float)
    if coeffs.shape[:2] != img.shape:
        raise ValueError(f"coefficient field {coeffs.shape[:2]} does not match image {img.shape}")
    m = coeffs.shape[2]
    gain = calibrate_tilt_gain(stack, pad, binning) if gain is None else gain
    out = np.zeros_like(img)

    def kernel_for(vector: np.ndarray) -> tuple[np.ndarray, tuple[int, int]]:
        center = (int(np.round(gain * vector[1])), int(np.round(gain * vector[2])))
        phase = np.tensordot(vector, stack.planes[:m], axes=1)
        return synthesize_psf(phase, grid, kernel_size, pad, binning, center=center), center

    if n_anchors is None:
        for r, c in zip(*np.nonzero(img)):
            kernel, center = kernel_for(coeffs[r, c])
            source = np.zeros_like(img)
            source[r, c] = img[r, c]
            _deposit(out, source, kernel, center)
    else:
        lattice = PsfField(
            kernels=np.zeros((n_anchors, n_anchors, 1, 1)), image_shape=img.shape, interpolation=interpolation
        )
        rows, cols = anchor_pixels(n_anchors, img.shape)
        for (a, b), weight in lattice.anchor_weights():
            kernel, center = kernel_for(coeffs[rows[a], cols[b]])
            _deposit(out, img * weight, kernel, center)
    return restore_shape(out, was_1d)


# -- dense matrices -----------------------------------------------------------------


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense ``N x N`` operator on row-major flattened images.

    Row ``i`` is the response at output pixel ``i``; column ``j`` the weight
    on input pixel ``j``.  ``kind`` is ``TILT``, ``BLUR`` or ``FULL``.
    """

    matrix: np.ndarray
    kind: str
    image_shape: tuple[int, int]

    def apply(self, image) -> np.ndarray:
        img, was_1d = check_image(image)
        if img.shape != tuple(self.image_shape):
            raise ValueError(f"matrix acts on {self.image_shape}, got {img.shape}")
        return restore_shape((self.matrix @ img.ravel()).reshape(img.shape), was_1d)

    def to_text(self) -> str:
        return "\n".join(" ".join(repr(float(v)) for v in row) for row in self.matrix) + "\n"

    def save_text(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_text())
        return path


def load_matrix_text(path: str | Path) -> np.ndarray:
    return np.loadtxt(path, ndmin=2)


MAX_MATRIX_PIXELS = 4096


def _check_size(shape: tuple[int, int]) -> int:
    n = shape[0] * shape[1]
    if n > MAX_MATRIX_PIXELS:
        raise ValueError(f"dense matrices are limited to {MAX_MATRIX_PIXELS} pixels, got {n}")
    return n


def build_tilt_matrix(tilts, shape: tuple[int, int] | None = None) -> OperatorMatrix:
    """0/1 matrix with ``T[i, j] = 1`` iff ``u_j + t_j`` lands on ``x_i``.

    ``tilts`` must be integer valued.  A 1-D displacement vector describes a
    ``1 x N`` signal.  Sources landing outside the frame leave zero columns,
    and pixels nobody lands on leave zero rows.
    """
    values = np.asarray(getattr(tilts, "values", tilts), dtype=float)
    if shape is None:
        shape = (1, values.shape[0]) if values.ndim == 1 else values.shape[:2]
    t = check_tilts(values, shape)
    if not np.array_equal(t, np.round(t)):
        raise ValueError("matrix backend supports integer tilts only")
    n = _check_size(shape)
    h, w = shape
    rows, cols = np.indices(shape)
    dest_r = (rows + t[..., 0]).astype(int).ravel()
    dest_c = (cols + t[..., 1]).astype(int).ravel()
    keep = (dest_r >= 0) & (dest_r < h) & (dest_c >= 0) & (dest_c < w)
    mat = np.zeros((n, n))
    src = np.arange(n)
    np.add.at(mat, ((dest_r * w + dest_c)[keep], src[keep]), 1.0)
    return OperatorMatrix(mat, "TILT", tuple(shape))


def _convolution_matrix(kernel: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Matrix of zero-padded convolution with ``kernel`` on ``shape``."""
    n = _check_size(shape)
    h, w = shape
    kr, kc = kernel.shape
    rows, cols = np.indices(shape)
    xr = rows.ravel()[:, None]
    xc = cols.ravel()[:, None]
    ur = rows.ravel()[None, :]
    uc = cols.ravel()[None, :]
    dr = xr - ur + kr // 2
    dc = xc - uc + kc // 2
    inside = (dr >= 0) & (dr < kr) & (dc >= 0) & (dc < kc)
    mat = np.zeros((n, n))
    mat[inside] = kernel[dr[inside], dc[inside]]
    return mat


def build_blur_matrix(psfs: PsfField) -> OperatorMatrix:
    """``B[i, j] = b_{x_i}(x_i - u_j)``: row ``i`` holds the kernel seen by output ``i``."""
    shape = tuple(psfs.image_shape)
    n = _check_size(shape)
    mat = np.zeros((n, n))
    for (a, b), weight in psfs.anchor_weights():
        mat += weight.ravel()[:, None] * _convolution_matrix(psfs.kernels[a, b], shape)
    return OperatorMatrix(mat, "BLUR", shape)


def build_tilt_then_blur_matrix(tilts, psfs: PsfField) -> OperatorMatrix:
    """Matrix of the source-anchored scatter ``tilt_then_blur``.

    Equals ``sum_a K_a @ T @ diag(w_a)`` with ``K_a`` the convolution by anchor
    ``a``'s kernel; for a single-anchor field this is ``B @ T``.
    """
    shape = tuple(psfs.image_shape)
    tilt = build_tilt_matrix(tilts, shape).matrix
    mat = np.zeros_like(tilt)
    for (a, b), weight in psfs.anchor_weights():
        mat += _convolution_matrix(psfs.kernels[a, b], shape) @ (tilt * weight.ravel()[None, :])
    return OperatorMatrix(mat, "FULL", shape)


def matrix_of(operator: Callable[[np.ndarray], np.ndarray], shape: tuple[int, int], kind: str = "FULL") -> OperatorMatrix:
    """Dense matrix of a linear image operator, one basis image per column."""
    n = _check_size(shape)
    mat = np.empty((n, n))
    basis = np.zeros(n)
    for j in range(n):
        basis[j] = 1.0
        mat[:, j] = np.asarray(operator(basis.reshape(shape))).ravel()
        basis[j] = 0.0
    return OperatorMatrix(mat, kind, tuple(shape))


def shift_matrix(n: int) -> OperatorMatrix:
    """Tilt matrix with ones on the superdiagonal: every sample moves one index down."""
    return build_tilt_matrix(-np.ones(n))


# -- commutator ---------------------------------------------------------------------


@dataclass(frozen=True)
class CommutatorReport:
    """Size of ``T @ B - B @ T`` plus, for a one-step shift, how each product moves ``B``.

    ``bt_columns`` is ``"left"`` (``(BT)_ij = B_i,j+1``, last column zero),
    ``"right"`` (``(BT)_ij = B_i,j-1``, first column zero) or ``None`` when
    neither holds; ``tb_rows`` is ``"up"``, ``"down"`` or ``None`` likewise.
    """

    max_abs: float
    frobenius: float
    bt_columns: str | None
    tb_rows: str | None

    @property
    def commute(self) -> bool:
        return self.max_abs == 0.0


def _moved(b: np.ndarray, axis: int, step: int) -> np.ndarray:
    # b moved by ``step`` along ``axis``, vacated entries zero
    out = np.zeros_like(b)
    n = b.shape[axis]
    src = [slice(None)] * 2
    dst = [slice(None)] * 2
    src[axis] = slice(max(0, -step), n - max(0, step))
    dst[axis] = slice(max(0, step), n - max(0, -step))
    out[tuple(dst)] = b[tuple(src)]
    return out


def commutator_report(tilt: OperatorMatrix, blur: OperatorMatrix) -> CommutatorReport:
    """Compare ``T @ B`` with ``B @ T`` entrywise.

    The shift descriptions are exact comparisons against ``B`` moved by one
    column or one row.  For the superdiagonal shift ``T[i, i+1] = 1``,
    ``T @ B`` moves rows up while ``B @ T`` moves columns right.
    """
    t = tilt.matrix
    b = blur.matrix
    if t.shape != b.shape:
        raise ValueError(f"matrices are not conformable: {t.shape} vs {b.shape}")
    tb = t @ b
    bt = b @ t
    diff = tb - bt
    columns = next(
        (name for name, step in (("left", -1), ("right", 1)) if np.array_equal(bt, _moved(b, 1, step))), None
    )
    rows = next((name for name, step in (("up", -1), ("down", 1)) if np.array_equal(tb, _moved(b, 0, step))), None)
    return CommutatorReport(
        max_abs=float(np.abs(diff).max()),
        frobenius=float(np.linalg.norm(diff)),
        bt_columns=columns,
        tb_rows=rows,
    )
