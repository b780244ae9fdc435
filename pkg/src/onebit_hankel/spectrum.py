"""
FFT angle spectra, peak picking and sidelobe metrics.

A ULA snapshot with phase progression ``2 pi d sin(theta)`` per element is
a sampled complex sinusoid at spatial frequency ``u = d sin(theta)``. The
zero-padded FFT evaluates its array factor on a uniform ``u`` grid, which is
mapped back to azimuth with ``theta = asin(u / d)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .array_model import Snapshot
from .errors import DegenerateInputError, DetectionError, DomainError

__all__ = [
    "AngleSpectrum",
    "PeakReport",
    "array_factor",
    "angle_spectrum",
    "find_peaks",
    "local_maxima",
    "write_spectrum_csv",
    "read_spectrum_csv",
    "DB_FLOOR",
    "DEFAULT_NFFT",
]

DB_FLOOR = -120.0
DEFAULT_NFFT = 4096


@dataclass(frozen=True)
class AngleSpectrum:
    angles_deg: np.ndarray
    magnitudes_db: np.ndarray
    label: str = ""

    def __len__(self):
        return self.angles_deg.shape[0]


@dataclass
class PeakReport:
    """Detected peaks (angle, level), strongest first, and the sidelobe ratio."""

    peaks: list = field(default_factory=list)
    pslr_db: float = float("nan")

    @property
    def angles(self):
        return [a for a, _ in self.peaks]

    def to_dict(self):
        return {
            "peaks": [{"angle_deg": float(a), "level_db": float(l)} for a, l in self.peaks],
            "pslr_db": float(self.pslr_db),
        }


def _values(x):
    if isinstance(x, Snapshot):
        return x.values
    v = np.asarray(x, dtype=complex)
    if v.ndim != 1:
        raise DomainError("expected a 1-D array response")
    return v


def array_factor(x, n_fft=DEFAULT_NFFT):
    """Zero-padded, fftshifted FFT of ``x`` and its spatial-frequency grid.

    Returns
    -------
    u : ndarray
        Cycles per element, ``[-1/2, 1/2)``.
    F : ndarray of complex
    """
    v = _values(x)
    n_fft = int(n_fft)
    if n_fft < v.shape[0]:
        raise DomainError(f"n_fft={n_fft} is shorter than the input length {v.shape[0]}")
    if n_fft < 1 or n_fft & (n_fft - 1):
        raise DomainError(f"n_fft must be a power of two, got {n_fft}")
    F = np.fft.fftshift(np.fft.fft(v, n_fft))
    u = np.fft.fftshift(np.fft.fftfreq(n_fft))
    return u, F


def angle_spectrum(x, n_fft=DEFAULT_NFFT, label="", spacing=0.5):
    """Peak-normalized dB angle spectrum of an array response.

    Bins with ``|u / spacing| >= 1`` have no physical azimuth and are dropped.

    Parameters
    ----------
    x : Snapshot or array_like
        Array response; for a masked snapshot the holes are already zero.
    n_fft : int
        Power of two, at least ``len(x)``.
    label : str
        Free-form tag such as ``"sparse"`` or ``"completed"``.
    spacing : float
        Element spacing in wavelengths.

    Returns
    -------
    AngleSpectrum
    """
    u, F = array_factor(x, n_fft)
    mag = np.abs(F)
    peak = mag.max()
    if not peak > 0:
        raise DegenerateInputError("all-zero array response has no spectrum")
    s = u / spacing
    keep = np.abs(s) < 1.0
    angles = np.rad2deg(np.arcsin(s[keep]))
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mag[keep] / peak)
    db = np.maximum(db, DB_FLOOR)
    angles.setflags(write=False)
    db.setflags(write=False)
    return AngleSpectrum(angles_deg=angles, magnitudes_db=db, label=label)


def local_maxima(values):
    """Indices of interior local maxima (strictly above the left neighbour, not below the right)."""
    m = np.asarray(values)
    if m.shape[0] < 3:
        return np.array([], dtype=int)
    inner = (m[1:-1] > m[:-2]) & (m[1:-1] >= m[2:])
    return np.nonzero(inner)[0] + 1


def find_peaks(spec, count, min_separation=5.0):
    """Pick the ``count`` strongest local maxima at least ``min_separation`` degrees apart.

    Selection is greedy by level. The peak-to-max-sidelobe ratio is the
    weakest selected peak minus the highest local maximum not selected
    (or minus the dB floor when no other maximum exists).

    Raises
    ------
    DetectionError
        Fewer than ``count`` admissible maxima; ``partial`` holds a
        :class:`PeakReport` with what was found.
    """
    if count < 1:
        raise DomainError("peak count must be >= 1")
    if min_separation < 0:
        raise DomainError("min_separation must be non-negative")
    idx = local_maxima(spec.magnitudes_db)
    order = idx[np.argsort(-spec.magnitudes_db[idx], kind="stable")]
    chosen = []
    for i in order:
        a = spec.angles_deg[i]
        if all(abs(a - spec.angles_deg[j]) >= min_separation for j in chosen):
            chosen.append(i)
            if len(chosen) == count:
                break
    peaks = [(float(spec.angles_deg[i]), float(spec.magnitudes_db[i])) for i in chosen]
    rest = [i for i in order if i not in set(chosen)]
    if chosen:
        top_side = spec.magnitudes_db[rest[0]] if rest else DB_FLOOR
        pslr = float(min(l for _, l in peaks) - top_side)
    else:
        pslr = float("nan")
    report = PeakReport(peaks=peaks, pslr_db=pslr)
    if len(chosen) < count:
        raise DetectionError(f"found {len(chosen)} of {count} requested peaks", partial=report)
    return report


def write_spectrum_csv(spec, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["angle_deg", "magnitude_db"])
        for a, m in zip(spec.angles_deg, spec.magnitudes_db):
            w.writerow([f"{a:.17g}", f"{m:.17g}"])


def read_spectrum_csv(path, label=""):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return AngleSpectrum(angles_deg=data[:, 0], magnitudes_db=data[:, 1], label=label)
