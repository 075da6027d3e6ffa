"""Incoherent PSFs from pupil phase, tilt splitting and anchored PSF fields.

Phase is measured in waves: the pupil field is ``mask * exp(-2j*pi*phase)``.
A PSF sample is ``lambda / (pad * D)`` wide; ``binning`` sums odd
``binning x binning`` blocks of samples into one image pixel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft

from .pupil import PupilGrid, ZernikeStack, project_onto_modes

TILT_MODES = (2, 3)


def _check_kernel_args(kernel_size: int, pad: int, binning: int) -> None:
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ValueError(f"kernel size must be a positive odd number, got {kernel_size}")
    if pad < 2:
        raise ValueError(f"pad factor must be >= 2, got {pad}")
    if binning < 1 or binning % 2 == 0:
        raise ValueError(f"binning must be a positive odd number, got {binning}")


def intensity_pattern(phase: np.ndarray, grid: PupilGrid, pad: int = 4) -> np.ndarray:
    """Unnormalized ``|FFT|^2`` on the ``pad * P`` grid, zero frequency at ``N // 2``."""
    phase = np.asarray(phase, dtype=float)
    if phase.shape != grid.mask.shape:
        raise ValueError(f"phase shape {phase.shape} does not match pupil {grid.mask.shape}")
    n = pad * grid.resolution
    field_ = np.zeros((n, n), dtype=complex)
    p = grid.resolution
    field_[:p, :p] = np.where(grid.mask, np.exp(-2j * np.pi * phase), 0.0)
    spectrum = fft.fft2(field_)
    return fft.fftshift(np.abs(spectrum) ** 2)


def synthesize_psf(
    phase: np.ndarray,
    grid: PupilGrid,
    kernel_size: int = 33,
    pad: int = 4,
    binning: int = 1,
    center: tuple[int, int] = (0, 0),
) -> np.ndarray:
    """Unit-sum PSF kernel of shape ``(kernel_size, kernel_size)``.

    ``center`` moves the crop window by whole image pixels, so a strongly
    tilted PSF can be captured without enlarging the kernel.  The kernel's
    middle pixel then corresponds to displacement ``center``.
    """
    _check_kernel_args(kernel_size, pad, binning)
    n = pad * grid.resolution
    span = kernel_size * binning
    if span > n:
        raise ValueError(
            f"kernel of {kernel_size} px x binning {binning} exceeds the padded transform ({n} samples)"
        )
    pattern = intensity_pattern(phase, grid, pad)
    half = span // 2
    rows = (n // 2 + center[0] * binning - half + np.arange(span)) % n
    cols = (n // 2 + center[1] * binning - half + np.arange(span)) % n
    crop = pattern[np.ix_(rows, cols)]
    if binning > 1:
        crop = crop.reshape(kernel_size, binning, kernel_size, binning).sum(axis=(1, 3))
    return crop / crop.sum()


def psf_centroid(kernel: np.ndarray) -> np.ndarray:
    """Intensity-weighted first moment relative to the kernel's middle pixel."""
    kernel = np.asarray(kernel, dtype=float)
    total = kernel.sum()
    offsets = [np.arange(s) - s // 2 for s in kernel.shape]
    return np.array(
        [
            (kernel.sum(axis=1) * offsets[0]).sum() / total,
            (kernel.sum(axis=0) * offsets[1]).sum() / total,
        ]
    )


def split_tilt(phase: np.ndarray, stack: ZernikeStack) -> tuple[np.ndarray, np.ndarray]:
    """Return the (mode 2, mode 3) coefficients and the tilt-free residual phase."""
    tilt = project_onto_modes(phase, stack, TILT_MODES)
    residual = np.asarray(phase, dtype=float) - stack.assemble(tilt, TILT_MODES)
    return tilt, np.where(stack.grid.mask, residual, 0.0)


def calibrate_tilt_gain(stack: ZernikeStack, pad: int = 4, binning: int = 1) -> float:
    """Image-pixel displacement produced by one wave of mode-2 tilt.

    Measured by regressing the centroid of the full periodic intensity pattern
    against small multiples of the stack's own mode-2 plane.  The same gain
    applies to mode 3 along columns by symmetry of the disk.
    """
    amplitudes = np.array([-0.1, -0.05, 0.05, 0.1])
    ramp = stack.plane(2)
    shifts = [circular_centroid(intensity_pattern(a * ramp, stack.grid, pad))[0] for a in amplitudes]
    slope = np.polyfit(amplitudes, shifts, 1)[0]
    return float(slope / binning)


def circular_centroid(pattern: np.ndarray) -> np.ndarray:
    """First moment of a periodic pattern, relative to index ``N // 2``.

    Computed from the phase of the first Fourier harmonic, so it is exactly
    equivariant under circular shifts and unaffected by halo truncation.
    """
    out = []
    for axis in (0, 1):
        n = pattern.shape[axis]
        profile = pattern.sum(axis=1 - axis)
        k = np.arange(n) - n // 2
        harmonic = (profile * np.exp(2j * np.pi * k / n)).sum()
        out.append(np.angle(harmonic) * n / (2 * np.pi))
    return np.array(out)


@dataclass(frozen=True)
class PsfField:
    """Kernels on a ``G_r x G_c`` anchor lattice covering an image.

    Anchor ``(a, b)`` sits at the center of cell ``(a, b)`` when the image is
    split into equal cells.  ``interpolation`` is ``"nearest"`` (each pixel
    takes its cell's kernel) or ``"bilinear"`` (tent-weighted blend of the
    surrounding anchors).
    """

    kernels: np.ndarray
    image_shape: tuple[int, int]
    interpolation: str = "nearest"
    coefficients: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        k = self.kernels
        if k.ndim != 4:
            raise ValueError("kernels must have shape (G_r, G_c, K_r, K_c)")
        if k.shape[2] % 2 == 0 or k.shape[3] % 2 == 0:
            raise ValueError("kernel dimensions must be odd")
        if k.shape[0] > self.image_shape[0] or k.shape[1] > self.image_shape[1]:
            raise ValueError("more anchors than pixels")
        if self.interpolation not in ("nearest", "bilinear"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")

    @classmethod
    def invariant(cls, kernel: np.ndarray, image_shape: tuple[int, int]) -> "PsfField":
        """Spatially invariant field with a single kernel."""
        kernel = np.asarray(kernel, dtype=float)
        return cls(kernels=kernel[None, None], image_shape=tuple(image_shape))

    @property
    def lattice(self) -> tuple[int, int]:
        return self.kernels.shape[0], self.kernels.shape[1]

    @property
    def kernel_shape(self) -> tuple[int, int]:
        return self.kernels.shape[2], self.kernels.shape[3]

    @property
    def is_invariant(self) -> bool:
        return self.lattice == (1, 1)

    def anchor_positions(self) -> tuple[np.ndarray, np.ndarray]:
        """Row and column coordinates of the anchors, in pixels."""
        return tuple(
            (np.arange(g) + 0.5) * size / g - 0.5 for g, size in zip(self.lattice, self.image_shape)
        )

    def anchor_weights(self) -> list[tuple[tuple[int, int], np.ndarray]]:
        """Per-anchor weight maps over the image; weights sum to one per pixel."""
        axes = [
            _axis_weights(g, size, self.interpolation) for g, size in zip(self.lattice, self.image_shape)
        ]
        out = []
        for a in range(self.lattice[0]):
            for b in range(self.lattice[1]):
                w = np.outer(axes[0][a], axes[1][b])
                if w.any():
                    out.append(((a, b), w))
        return out


def _axis_weights(g: int, size: int, interpolation: str) -> np.ndarray:
    pos = np.arange(size)
    if interpolation == "nearest" or g == 1:
        cell = np.minimum((pos * g) // size, g - 1)
        return (cell[None, :] == np.arange(g)[:, None]).astype(float)
    anchors = (np.arange(g) + 0.5) * size / g - 0.5
    u = np.clip(np.interp(pos, anchors, np.arange(g)), 0, g - 1)
    return np.clip(1.0 - np.abs(u[None, :] - np.arange(g)[:, None]), 0.0, None)


def anchor_pixels(n_anchors: int, image_shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Integer pixel nearest to each anchor along both axes."""
    return tuple(
        np.clip(np.round((np.arange(n_anchors) + 0.5) * s / n_anchors - 0.5).astype(int), 0, s - 1)
        for s in image_shape
    )


def build_psf_field(
    coefficients: np.ndarray,
    grid: PupilGrid,
    stack: ZernikeStack,
    n_anchors: int = 16,
    kernel_size: int = 33,
    pad: int = 4,
    binning: int = 1,
    interpolation: str = "nearest",
    remove_tilt: bool = True,
) -> PsfField:
    """Tilt-free kernels from the coefficient vectors at each anchor pixel.

    ``coefficients`` is the ``H x W x M`` field.  With ``remove_tilt`` the
    mode 2 and 3 coefficients are zeroed before synthesis.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    h, w, m = coefficients.shape
    if m > stack.n_modes:
        raise ValueError(f"field has {m} modes, stack only {stack.n_modes}")
    if not 1 <= n_anchors <= min(h, w):
        raise ValueError(f"anchor count {n_anchors} must lie in 1..{min(h, w)}")
    rows, cols = anchor_pixels(n_anchors, (h, w))
    local = coefficients[np.ix_(rows, cols)].copy()
    if remove_tilt:
        local[..., 1:3] = 0.0
    kernels = np.empty((n_anchors, n_anchors, kernel_size, kernel_size))
    for a in range(n_anchors):
        for b in range(n_anchors):
            phase = np.tensordot(local[a, b], stack.planes[:m], axes=1)
            kernels[a, b] = synthesize_psf(phase, grid, kernel_size, pad, binning)
    return PsfField(kernels=kernels, image_shape=(h, w), interpolation=interpolation, coefficients=local)


def save_kernels(path: str | Path, psfs: PsfField) -> tuple[Path, Path]:
    """Write kernels as little-endian float32 plus a ``.txt`` sidecar header."""
    path = Path(path)
    raw = np.ascontiguousarray(psfs.kernels, dtype="<f4")
    path.write_bytes(raw.tobytes())
    header = path.with_name(path.name + ".txt")
    gr, gc, kr, kc = raw.shape
    lines = [
        "dtype = float32",
        "byte_order = little",
        f"anchors_rows = {gr}",
        f"anchors_cols = {gc}",
        f"kernel_rows = {kr}",
        f"kernel_cols = {kc}",
        f"image_rows = {psfs.image_shape[0]}",
        f"image_cols = {psfs.image_shape[1]}",
        f"interpolation = {psfs.interpolation}",
        "layout = anchor_row, anchor_col, kernel_row, kernel_col (C order)",
    ]
    header.write_text("\n".join(lines) + "\n")
    return path, header


def load_kernels(path: str | Path) -> PsfField:
    path = Path(path)
    header = {}
    for line in path.with_name(path.name + ".txt").read_text().splitlines():
        key, _, value = line.partition("=")
        header[key.strip()] = value.strip()
    shape = tuple(int(header[k]) for k in ("anchors_rows", "anchors_cols", "kernel_rows", "kernel_cols"))
    kernels = np.frombuffer(path.read_bytes(), dtype="<f4").reshape(shape).astype(float)
    return PsfField(
        kernels=kernels,
        image_shape=(int(header["image_rows"]), int(header["image_cols"])),
        interpolation=header["interpolation"],
    )
