"""
Hankel lifting and its inverse.

A length-M vector ``x`` is lifted to an ``n1 x n2`` matrix with
``H[i, j] = x[i + j]`` (0-based), ``n1 + n2 = M + 1``. Every element of
``x`` lives on one anti-diagonal, so a mask over array elements maps to a
set of observed matrix entries made of whole anti-diagonals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array_model import Snapshot, steering_vector
from .errors import DomainError

__all__ = [
    "ObservationSet",
    "hankel_dims",
    "build_hankel",
    "dehankel",
    "antidiagonal_lengths",
    "verify_vandermonde_rank",
    "RANK_TOL",
]

RANK_TOL = 1e-8


@dataclass(frozen=True)
class ObservationSet:
    """Observed entries of an ``n1 x n2`` matrix, stored as a boolean mask.

    ``pairs`` enumerates the observed (row, col) pairs, 0-based, in
    row-major order. That order is the vectorization order used by
    :class:`onebit_hankel.svt.SamplingOperator`.
    """

    mask: np.ndarray

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.ndim != 2:
            raise DomainError("observation mask must be 2-D")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_pairs(cls, pairs, shape):
        mask = np.zeros(shape, dtype=bool)
        for i, j in pairs:
            if not (0 <= i < shape[0] and 0 <= j < shape[1]):
                raise DomainError(f"pair {(i, j)} outside shape {shape}")
            mask[i, j] = True
        return cls(mask)

    @classmethod
    def full(cls, shape):
        return cls(np.ones(shape, dtype=bool))

    @classmethod
    def uniform(cls, shape, m_prime, rng):
        """``m_prime`` entries drawn uniformly without replacement."""
        n = shape[0] * shape[1]
        if not 0 < m_prime <= n:
            raise DomainError(f"m' must be in [1, {n}], got {m_prime}")
        flat = np.zeros(n, dtype=bool)
        flat[rng.choice(n, size=int(m_prime), replace=False)] = True
        return cls(flat.reshape(shape))

    @property
    def shape(self):
        return self.mask.shape

    @property
    def m_prime(self):
        return int(self.mask.sum())

    @property
    def pairs(self):
        rows, cols = np.nonzero(self.mask)
        return list(zip(rows.tolist(), cols.tolist()))

    def __len__(self):
        return self.m_prime


def hankel_dims(M, square=False):
    """Near-square Hankel shape for a length-``M`` vector.

    Odd ``M`` gives ``((M+1)/2, (M+1)/2)``; even ``M`` gives
    ``(M/2, M/2 + 1)``. With ``square=True`` the shape is forced to
    ``(n, n)`` with ``n = ceil(M/2)``, which for even ``M`` leaves the last
    element of the vector outside the matrix.
    """
    M = int(M)
    if M < 1:
        raise DomainError(f"M must be >= 1, got {M}")
    if M % 2:
        return (M + 1) // 2, (M + 1) // 2
    if square:
        return M // 2, M // 2
    return M // 2, M // 2 + 1


def _antidiag_index(n1, n2):
    return np.add.outer(np.arange(n1), np.arange(n2))


def build_hankel(x, dims=None):
    """Lift a snapshot to its Hankel matrix and observed-entry set.

    Parameters
    ----------
    x : Snapshot or array_like
        Length-M vector; a plain array is treated as fully observed.
    dims : (int, int), optional
        Matrix shape, defaults to :func:`hankel_dims`. Must satisfy
        ``n1 + n2 - 1 <= M``; trailing elements beyond that are dropped.

    Returns
    -------
    H : ndarray, shape (n1, n2)
        Zero on unobserved anti-diagonals.
    omega : ObservationSet
    """
    snap = x if isinstance(x, Snapshot) else Snapshot(x)
    M = len(snap)
    n1, n2 = hankel_dims(M) if dims is None else (int(dims[0]), int(dims[1]))
    if n1 < 1 or n2 < 1 or n1 + n2 - 1 > M:
        raise DomainError(f"Hankel shape {(n1, n2)} incompatible with M={M}")
    k = _antidiag_index(n1, n2)
    return snap.values[k], ObservationSet(snap.mask[k])


def dehankel(H):
    """Average each anti-diagonal of ``H`` back into a vector of length n1+n2-1."""
    H = np.asarray(H)
    if H.ndim != 2 or min(H.shape) < 1:
        raise DomainError("dehankel needs a non-empty 2-D matrix")
    n1, n2 = H.shape
    k = _antidiag_index(n1, n2).ravel()
    counts = np.bincount(k, minlength=n1 + n2 - 1)
    if np.iscomplexobj(H):
        re = np.bincount(k, weights=H.real.ravel(), minlength=n1 + n2 - 1)
        im = np.bincount(k, weights=H.imag.ravel(), minlength=n1 + n2 - 1)
        return (re + 1j * im) / counts
    return np.bincount(k, weights=H.ravel(), minlength=n1 + n2 - 1) / counts


def antidiagonal_lengths(n1, n2):
    """Number of entries on each anti-diagonal, index 0..n1+n2-2."""
    M = n1 + n2 - 1
    k = np.arange(1, M + 1)
    return np.minimum.reduce([k, np.full(M, n1), np.full(M, n2), M + 1 - k])


def verify_vandermonde_rank(scene, M, tol=RANK_TOL, dims=None):
    """Numerical rank of the noiseless Hankel matrix of ``scene``.

    Returns
    -------
    rank : int
        Count of singular values above ``tol * s[0]``.
    s : ndarray
        All singular values, descending.
    """
    n1, n2 = hankel_dims(M) if dims is None else dims
    if scene.n_targets > min(n1, n2):
        raise DomainError(f"{scene.n_targets} targets exceed min(n1, n2) = {min(n1, n2)}")
    x = sum(a * steering_vector(t, M, scene.spacing)
            for t, a in zip(scene.angles_deg, scene.complex_amplitudes))
    H, _ = build_hankel(x, (n1, n2))
    s = np.linalg.svd(H, compute_uv=False)
    rank = int(np.count_nonzero(s > tol * s[0])) if s[0] > 0 else 0
    return rank, s
