"""
Dithered uniform and one-bit quantization.

Two forms of the dithered quantizer appear in the literature: one adds the
dither before flooring, the comparator form tests ``x > tau``. Since the
dither law is symmetric they agree in distribution. This module uses the
comparator form ``sign(x - tau)`` throughout and writes the uniform
quantizer with dither ``-tau`` wherever the two are compared, so that the
one-bit reduction holds sample-by-sample:

    Q_Delta(x; -tau) == (Delta / 2) * sign(x - tau)   when |x|, |tau| <= Delta/2

``sign(0)`` is taken as +1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DomainError
from .hankel import ObservationSet

__all__ = [
    "DitherMatrix",
    "OneBitObservation",
    "uniform_quantize",
    "sign_pm1",
    "generate_dither",
    "one_bit_quantize",
    "verify_onebit_equivalence",
    "design_dither_scale",
    "DEFAULT_MARGIN",
]

DEFAULT_MARGIN = 0.05


def sign_pm1(x):
    """Elementwise sign with ties sent to +1."""
    return np.where(np.asarray(x) >= 0, 1.0, -1.0)


def uniform_quantize(x, delta, tau):
    """Dithered uniform quantizer ``delta * (floor((x + tau) / delta) + 1/2)``.

    Works elementwise on arrays.
    """
    if not delta > 0:
        raise DomainError(f"quantizer scale must be positive, got {delta}")
    x = np.asarray(x, dtype=float)
    out = delta * (np.floor((x + tau) / delta) + 0.5)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DitherMatrix:
    """Independent uniform dithers for the real and imaginary channels."""

    real: np.ndarray
    imag: np.ndarray
    scale: float
    seed: object = None

    @property
    def shape(self):
        return self.real.shape

    @property
    def values(self):
        return self.real + 1j * self.imag


def generate_dither(shape, scale, seed):
    """Draw a :class:`DitherMatrix` on ``[-scale/2, scale/2)``.

    A single generator is consumed in row-major entry order, the real and
    imaginary dither of each entry drawn back to back, so the matrix can be
    regenerated bit-exactly from ``(seed, scale, shape)``.
    """
    if not scale > 0:
        raise DomainError(f"dither scale must be positive, got {scale}")
    rng = np.random.default_rng(seed)
    u = rng.random(tuple(shape) + (2,)) - 0.5
    real = scale * u[..., 0]
    imag = scale * u[..., 1]
    real.setflags(write=False)
    imag.setflags(write=False)
    return DitherMatrix(real=real, imag=imag, scale=float(scale), seed=seed)


@dataclass(frozen=True)
class OneBitObservation:
    """Complex sign data ``R`` on the observed set, zero elsewhere."""

    signs: np.ndarray
    scale: float
    omega: ObservationSet

    @property
    def shape(self):
        return self.signs.shape

    @property
    def b(self):
        """Right-hand side ``(Delta/2) R`` read over the observed set, row-major."""
        return (self.scale / 2.0) * self.signs[self.omega.mask]

    def as_matrix(self):
        """``(Delta/2) R`` as a full matrix (zero off the observed set)."""
        return (self.scale / 2.0) * self.signs


def one_bit_quantize(H, omega, dither):
    """Compare each observed entry of ``H`` with its dither, channel by channel."""
    H = np.asarray(H)
    if H.shape != dither.shape or H.shape != omega.shape:
        raise DomainError(f"shape mismatch: H {H.shape}, dither {dither.shape}, omega {omega.shape}")
    re = sign_pm1(H.real - dither.real)
    im = sign_pm1(H.imag - dither.imag)
    signs = np.where(omega.mask, re + 1j * im, 0.0)
    signs.setflags(write=False)
    return OneBitObservation(signs=signs, scale=dither.scale, omega=omega)


def verify_onebit_equivalence(x, delta, tau):
    """Check ``Q(x; -tau) == (delta/2) sign(x - tau)`` on the dynamic-range condition.

    Vectorized: returns a boolean array for array input. The identity
    holds on the whole closed range except the single corner
    ``x = delta/2, tau = -delta/2``, where ``x - tau`` lands on a cell edge
    and the check reports False.
    """
    x = np.asarray(x, dtype=float)
    tau = np.asarray(tau, dtype=float)
    half = np.asarray(delta, dtype=float) / 2.0
    if np.any(half <= 0):
        raise DomainError("quantizer scale must be positive")
    if np.any(np.abs(x) > half) or np.any(np.abs(tau) > half):
        raise DomainError("one-bit equivalence needs |x| <= delta/2 and |tau| <= delta/2")
    lhs = 2.0 * half * (np.floor((x - tau) / (2.0 * half)) + 0.5)
    rhs = half * sign_pm1(x - tau)
    out = lhs == rhs
    return bool(out) if out.ndim == 0 else out


def design_dither_scale(H, omega, margin=DEFAULT_MARGIN):
    """Dither scale that covers the observed dynamic range with headroom.

    ``Delta = 2 (1 + margin) max_{Omega} max(|Re H|, |Im H|)``.
    """
    if margin < 0:
        raise DomainError("margin must be non-negative")
    H = np.asarray(H)
    if omega.m_prime == 0:
        raise DomainError("observation set is empty")
    obs = H[omega.mask]
    beta = float(np.max(np.maximum(np.abs(obs.real), np.abs(obs.imag))))
    if beta == 0:
        raise DegenerateInputError("all observed entries are zero")
    return 2.0 * (1.0 + margin) * beta
