"""
Forward model for single-snapshot linear arrays.

Point targets in the far field produce a sum of complex exponentials across
the elements of a uniform linear array (ULA). A MIMO radar synthesizes a
virtual array whose element positions are the pairwise sums of transmit and
receive positions; when those sums leave holes on the half-wavelength grid
the virtual array is a sparse linear array (SLA), modelled here as a mask
over the full ULA grid.

All positions are integers in units of half a wavelength. Indices into
snapshots are 0-based; the virtual index set ``virtual_positions`` is 1-based
to match the usual array-element numbering {1, ..., M}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "TargetScene",
    "ArrayGeometry",
    "Snapshot",
    "steering_vector",
    "steering_matrix",
    "synthesize_snapshot",
    "noise_variance_from_snr",
    "virtual_array",
    "apply_mask",
]


def _check_angle(theta):
    theta = float(theta)
    if not np.isfinite(theta) or abs(theta) >= 90.0:
        raise DomainError(f"azimuth must lie strictly inside (-90, 90) degrees, got {theta}")
    return theta


@dataclass(frozen=True)
class TargetScene:
    """Far-field point targets seen by a linear array.

    Parameters
    ----------
    angles_deg : sequence of float
        Azimuths in degrees, each strictly inside (-90, 90).
    amplitudes : sequence of float, optional
        Positive real amplitudes, one per target. Defaults to all ones.
    phases_rad : sequence of float, optional
        Target phases in radians. Defaults to all zeros.
    spacing : float
        Element spacing in wavelengths (0.5 for a half-wavelength ULA).
    """

    angles_deg: tuple
    amplitudes: tuple = None
    phases_rad: tuple = None
    spacing: float = 0.5

    def __post_init__(self):
        angles = tuple(_check_angle(a) for a in self.angles_deg)
        if len(angles) < 1:
            raise DomainError("a scene needs at least one target")
        if len(set(angles)) != len(angles):
            raise DomainError(f"duplicate azimuths in scene: {angles}")
        amps = tuple(float(a) for a in (self.amplitudes if self.amplitudes is not None else [1.0] * len(angles)))
        phases = tuple(float(p) for p in (self.phases_rad if self.phases_rad is not None else [0.0] * len(angles)))
        if len(amps) != len(angles) or len(phases) != len(angles):
            raise DomainError("amplitudes and phases must have one entry per target")
        if any(not (a > 0 and np.isfinite(a)) for a in amps):
            raise DomainError(f"amplitudes must be positive and finite, got {amps}")
        if not self.spacing > 0:
            raise DomainError("element spacing must be positive")
        object.__setattr__(self, "angles_deg", angles)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "phases_rad", phases)
        object.__setattr__(self, "spacing", float(self.spacing))

    @property
    def n_targets(self):
        return len(self.angles_deg)

    @property
    def complex_amplitudes(self):
        return np.asarray(self.amplitudes) * np.exp(1j * np.asarray(self.phases_rad))


@dataclass(frozen=True)
class ArrayGeometry:
    """Physical MIMO layout and the virtual array it synthesizes.

    ``virtual_positions`` is the sorted set of distinct pairwise sums,
    shifted so the smallest is 1; ``M`` is the number of ULA grid points
    spanned by the virtual array.
    """

    tx_positions: tuple
    rx_positions: tuple
    virtual_positions: tuple
    M: int

    @property
    def n_virtual(self):
        return len(self.virtual_positions)

    @property
    def n_pairs(self):
        return len(self.tx_positions) * len(self.rx_positions)

    @property
    def mask(self):
        m = np.zeros(self.M, dtype=bool)
        m[np.asarray(self.virtual_positions) - 1] = True
        return m

    @property
    def aperture_wavelengths(self):
        return (self.M - 1) / 2.0


@dataclass(frozen=True)
class Snapshot:
    """One complex array snapshot on the ULA grid with its observation mask."""

    values: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.ndim != 1:
            raise DomainError("snapshot values must be a 1-D vector")
        mask = np.ones(values.shape, dtype=bool) if self.mask is None else np.array(self.mask, dtype=bool)
        if mask.shape != values.shape:
            raise DomainError(f"mask length {mask.shape} does not match values {values.shape}")
        values[~mask] = 0.0
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    def __len__(self):
        return self.values.shape[0]


def steering_vector(theta_deg, M, spacing=0.5):
    """ULA response ``exp(j 2 pi k d sin(theta))`` for k = 0..M-1.

    Parameters
    ----------
    theta_deg : float
        Azimuth in degrees, strictly inside (-90, 90).
    M : int
        Number of elements.
    spacing : float
        Element spacing in wavelengths.

    Returns
    -------
    ndarray of complex, shape (M,)
    """
    theta = _check_angle(theta_deg)
    if int(M) < 1:
        raise DomainError(f"M must be >= 1, got {M}")
    k = np.arange(int(M))
    return np.exp(2j * np.pi * k * spacing * np.sin(np.deg2rad(theta)))


def steering_matrix(angles_deg, M, spacing=0.5):
    """Stack steering vectors column-wise, shape (M, P)."""
    return np.column_stack([steering_vector(a, M, spacing) for a in angles_deg])


def noise_variance_from_snr(snr_db):
    """Per-entry complex noise power for a unit-amplitude source at ``snr_db``.

    ``None`` means noiseless.
    """
    if snr_db is None:
        return 0.0
    return float(10.0 ** (-float(snr_db) / 10.0))


def synthesize_snapshot(scene, M, noise_variance=0.0, rng_seed=None):
    """Noisy full-ULA snapshot ``x = A s + n``.

    The noise is circular complex Gaussian with total per-entry variance
    ``noise_variance`` (half in each of the real and imaginary parts).
    """
    if noise_variance < 0:
        raise DomainError("noise variance must be non-negative")
    x = steering_matrix(scene.angles_deg, M, scene.spacing) @ scene.complex_amplitudes
    if noise_variance > 0:
        rng = np.random.default_rng(rng_seed)
        n = rng.standard_normal((int(M), 2)) * np.sqrt(noise_variance / 2.0)
        x = x + (n[:, 0] + 1j * n[:, 1])
    return Snapshot(x)


def _as_grid_positions(positions, name):
    arr = np.asarray(list(positions), dtype=float)
    if arr.size == 0:
        raise DomainError(f"{name} positions must be non-empty")
    if np.any(arr != np.round(arr)):
        raise DomainError(f"{name} positions must be integers on the half-wavelength grid")
    if np.any(arr < 0):
        raise DomainError(f"{name} positions must be non-negative")
    return tuple(int(p) for p in arr)


def virtual_array(tx: Sequence[int], rx: Sequence[int]) -> ArrayGeometry:
    """Virtual array of a MIMO radar from its TX and RX element positions.

    >>> g = virtual_array([0], [0, 1, 2])
    >>> g.virtual_positions, g.M
    ((1, 2, 3), 3)
    """
    tx = _as_grid_positions(tx, "tx")
    rx = _as_grid_positions(rx, "rx")
    sums = np.unique(np.add.outer(np.asarray(tx), np.asarray(rx)).ravel())
    virtual = sums - sums.min() + 1
    return ArrayGeometry(
        tx_positions=tx,
        rx_positions=rx,
        virtual_positions=tuple(int(v) for v in virtual),
        M=int(virtual.max()),
    )


def apply_mask(x, geom):
    """Keep only the entries of ``x`` that the virtual array observes."""
    values = x.values if isinstance(x, Snapshot) else np.asarray(x, dtype=complex)
    prior = x.mask if isinstance(x, Snapshot) else np.ones(values.shape, dtype=bool)
    if values.shape[0] != geom.M:
        raise DomainError(f"snapshot length {values.shape[0]} != grid size {geom.M}")
    return Snapshot(values, prior & geom.mask)
