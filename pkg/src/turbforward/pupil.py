"""Discretized circular pupil and Noll-ordered Zernike basis.

Coordinates follow array axes: ``rho[..., 0]`` runs along axis 0 (rows) and
``rho[..., 1]`` along axis 1 (columns).  Noll's "x" is the axis-0 coordinate,
so mode 2 is a ramp along rows and mode 3 a ramp along columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial, sqrt
from typing import Iterable, Sequence

import numpy as np

MIN_RESOLUTION = 32


@dataclass(frozen=True)
class PupilGrid:
    """Unit-disk aperture sampled on a ``resolution`` x ``resolution`` grid.

    Samples sit at half-integer offsets from the grid center, so ``rho`` is
    exactly antisymmetric about the center and the disk has no sample at the
    origin.
    """

    resolution: int
    rho: np.ndarray
    mask: np.ndarray

    @property
    def area(self) -> int:
        """Number of samples inside the disk."""
        return int(self.mask.sum())

    @property
    def radius(self) -> np.ndarray:
        return np.hypot(self.rho[..., 0], self.rho[..., 1])


def build_pupil(resolution: int) -> PupilGrid:
    resolution = int(resolution)
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"pupil resolution must be >= {MIN_RESOLUTION}, got {resolution}")
    if resolution % 2:
        raise ValueError(f"pupil resolution must be even, got {resolution}")
    half = resolution / 2
    axis = (np.arange(resolution) - half + 0.5) / half
    r0, r1 = np.meshgrid(axis, axis, indexing="ij")
    rho = np.stack([r0, r1], axis=-1)
    mask = np.hypot(r0, r1) <= 1.0
    rho.setflags(write=False)
    mask.setflags(write=False)
    return PupilGrid(resolution=resolution, rho=rho, mask=mask)


def noll_to_nm(j: int) -> tuple[int, int]:
    """Map a Noll index to radial order ``n`` and signed azimuthal order ``m``.

    Even ``j`` carries the cosine term (``m > 0``), odd ``j`` the sine term.
    """
    if j < 1:
        raise ValueError(f"Noll index must be >= 1, got {j}")
    n = 0
    rem = j - 1
    while rem > n:
        n += 1
        rem -= n
    m = (n % 2) + 2 * ((rem + ((n + 1) % 2)) // 2)
    if m != 0 and j % 2:
        m = -m
    return n, m


def radial_polynomial(n: int, m: int, r: np.ndarray) -> np.ndarray:
    m = abs(m)
    out = np.zeros_like(r, dtype=float)
    for k in range((n - m) // 2 + 1):
        coef = (-1) ** k * factorial(n - k) / (
            factorial(k) * factorial((n + m) // 2 - k) * factorial((n - m) // 2 - k)
        )
        out += coef * r ** (n - 2 * k)
    return out


def zernike(j: int, x, y) -> np.ndarray:
    """Evaluate the orthonormal Noll polynomial ``Z_j`` at ``(x, y)``.

    Values are returned everywhere, including outside the unit disk.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = noll_to_nm(j)
    r = np.hypot(x, y)
    radial = radial_polynomial(n, m, r)
    if m == 0:
        return sqrt(n + 1) * radial
    theta = np.arctan2(y, x)
    if m > 0:
        return sqrt(2 * (n + 1)) * radial * np.cos(m * theta)
    return sqrt(2 * (n + 1)) * radial * np.sin(-m * theta)


@dataclass(frozen=True)
class ZernikeStack:
    """Noll modes 1..M sampled on a pupil grid, zero outside the disk.

    Planes are orthonormal under ``<a, b> = sum(a * b) / grid.area``.
    """

    grid: PupilGrid
    planes: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.planes.shape[0]

    def plane(self, j: int) -> np.ndarray:
        return self.planes[j - 1]

    def assemble(self, coefficients: Sequence[float], modes: Iterable[int] | None = None) -> np.ndarray:
        """Phase map ``sum_j c_j Z_j`` (modes default to 1..len(coefficients))."""
        coefficients = np.asarray(coefficients, dtype=float)
        idx = _mode_indices(self, range(1, len(coefficients) + 1) if modes is None else modes)
        if len(idx) != len(coefficients):
            raise ValueError("one coefficient per mode required")
        return np.tensordot(coefficients, self.planes[idx], axes=1)


def build_zernike_stack(grid: PupilGrid, n_modes: int) -> ZernikeStack:
    if n_modes < 3:
        raise ValueError(f"need at least 3 Zernike modes, got {n_modes}")
    x = grid.rho[..., 0]
    y = grid.rho[..., 1]
    analytic = np.stack([zernike(j, x[grid.mask], y[grid.mask]) for j in range(1, n_modes + 1)])
    # Gram-Schmidt in Noll order under the discrete disk inner product; the
    # pixelated edge otherwise leaves O(1e-2) cross terms at P=128.
    q, r = np.linalg.qr(analytic.T)
    q *= np.sign(np.diag(r)) * sqrt(grid.area)
    planes = np.zeros((n_modes, grid.resolution, grid.resolution))
    planes[:, grid.mask] = q.T
    planes.setflags(write=False)
    return ZernikeStack(grid=grid, planes=planes)


def _mode_indices(stack: ZernikeStack, modes: Iterable[int]) -> list[int]:
    modes = [int(m) for m in modes]
    if not modes:
        raise ValueError("mode set must not be empty")
    for m in modes:
        if not 1 <= m <= stack.n_modes:
            raise ValueError(f"mode {m} outside 1..{stack.n_modes}")
    return [m - 1 for m in modes]


def project_onto_modes(phase: np.ndarray, stack: ZernikeStack, modes: Iterable[int]) -> np.ndarray:
    """Least-squares coefficients of ``phase`` on the selected modes over the disk."""
    idx = _mode_indices(stack, modes)
    phase = np.asarray(phase, dtype=float)
    if phase.shape != stack.planes.shape[1:]:
        raise ValueError(f"phase shape {phase.shape} does not match pupil {stack.planes.shape[1:]}")
    mask = stack.grid.mask
    design = stack.planes[idx][:, mask].T
    coef, *_ = np.linalg.lstsq(design, phase[mask], rcond=None)
    return coef


def remove_modes(phase: np.ndarray, stack: ZernikeStack, modes: Iterable[int]) -> np.ndarray:
    """Subtract the least-squares fit on ``modes`` from ``phase`` (inside the disk)."""
    modes = list(modes)
    coef = project_onto_modes(phase, stack, modes)
    residual = np.asarray(phase, dtype=float) - stack.assemble(coef, modes)
    return np.where(stack.grid.mask, residual, 0.0)
