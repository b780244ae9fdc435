"""
Singular value thresholding (SVT) for matrix completion from one-bit data.

The iteration alternates singular value soft-thresholding with a dual
ascent step on the observed entries:

    X_k = shrink(A*(y_{k-1}), tau)
    y_k = y_{k-1} + delta_k (b - A(X_k))

where ``A`` reads the observed entries and ``A*`` scatters them back. With
one-bit data ``b = (Delta/2) R`` on the observed set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator, Union

import numpy as np

from .errors import DivergenceError, DomainError
from .hankel import ObservationSet
from .quantization import OneBitObservation

__all__ = [
    "SamplingOperator",
    "SvtState",
    "SvtResult",
    "shrink",
    "default_threshold",
    "default_step",
    "svt_iterate",
    "svt_complete",
    "complete_hankel_pipeline",
    "ONE_BIT_TOL",
]

log = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 10.0
DIVERGENCE_PATIENCE = 20

# Relative-residual stop for one-bit right-hand sides. Sign data are not
# exactly low rank, so driving the residual to zero fits the quantization
# noise; stopping at this level halts near the sign-noise floor instead.
ONE_BIT_TOL = 0.82


class SamplingOperator:
    """Entry-sampling map between ``n1 x n2`` matrices and length-m' vectors.

    Observed entries are read in row-major order. ``adjoint`` scatters a
    vector back with zeros elsewhere, so ``forward(adjoint(y)) == y`` exactly.
    """

    def __init__(self, omega):
        if not isinstance(omega, ObservationSet):
            omega = ObservationSet(omega)
        self.omega = omega
        self.shape = omega.shape
        self.rows, self.cols = np.nonzero(omega.mask)

    @property
    def m_prime(self):
        return self.rows.shape[0]

    def forward(self, X):
        return np.asarray(X)[self.rows, self.cols]

    def adjoint(self, y):
        y = np.asarray(y)
        out = np.zeros(self.shape, dtype=np.result_type(y.dtype, np.complex128))
        out[self.rows, self.cols] = y
        return out

    __call__ = forward


def shrink(M, tau):
    """Soft-threshold the singular values of ``M`` by ``tau``.

    Returns
    -------
    X : ndarray
        ``U diag(max(s - tau, 0)) V^H``.
    s : ndarray
        Singular values of ``X`` (descending, zeros kept).
    """
    if tau < 0:
        raise DomainError("shrinkage threshold must be non-negative")
    M = np.asarray(M)
    if not np.all(np.isfinite(M)):
        raise DomainError("shrink() received non-finite entries")
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    r = int(np.count_nonzero(s))
    X = (U[:, :r] * s[:r]) @ Vh[:r]
    return X, s


def default_threshold(shape):
    """``5 sqrt(n1 n2)``."""
    return 5.0 * np.sqrt(shape[0] * shape[1])


def default_step(shape, m_prime):
    """``1.2 n1 n2 / m'``."""
    return 1.2 * shape[0] * shape[1] / m_prime


@dataclass
class SvtState:
    """One SVT iterate: the primal matrix, the dual vector and bookkeeping."""

    k: int
    X: np.ndarray
    y: np.ndarray
    singular_values: np.ndarray
    residual: float
    step: float
    tau: float
    rank_bound: int

    @property
    def rank(self):
        return int(np.count_nonzero(self.singular_values))


@dataclass
class SvtResult:
    X: np.ndarray
    residuals: list
    iterations: int
    converged: bool
    stop_reason: str
    tau: float
    steps: list = field(default_factory=list)
    ranks: list = field(default_factory=list)

    def residual_table(self):
        """Rows of (iteration, relative residual, rank, step)."""
        return [(k + 1, r, rk, st) for k, (r, rk, st) in enumerate(zip(self.residuals, self.ranks, self.steps))]


StepSpec = Union[float, Callable[[int], float]]


def _step_at(step, k):
    d = step(k) if callable(step) else step
    if not d > 0:
        raise DomainError(f"step size must be positive, got {d} at iteration {k}")
    return float(d)


def svt_iterate(b, op, tau, step, y0=None) -> Iterator[SvtState]:
    """Yield SVT iterates indefinitely; the caller decides when to stop.

    The yielded state carries ``y`` already advanced by the dual step, ready
    for the next shrinkage.
    """
    b = np.asarray(b, dtype=complex)
    if b.shape != (op.m_prime,):
        raise DomainError(f"b has shape {b.shape}, operator expects ({op.m_prime},)")
    nb = np.linalg.norm(b)
    if nb == 0:
        raise DomainError("right-hand side is all zeros")
    y = np.zeros(op.m_prime, dtype=complex) if y0 is None else np.array(y0, dtype=complex)
    k = 0
    while True:
        k += 1
        Y = op.adjoint(y)
        X, s = shrink(Y, tau)
        # rank bound from the unshrunk spectrum: #(s_Y > tau)
        rank_bound = int(np.count_nonzero(s > 0))
        r = b - op.forward(X)
        delta = _step_at(step, k)
        y = y + delta * r
        yield SvtState(k=k, X=X, y=y, singular_values=s, residual=float(np.linalg.norm(r) / nb),
                       step=delta, tau=float(tau), rank_bound=rank_bound)


def svt_complete(b, op, tau=None, step=None, max_iters=500, tol=1e-4, y0=None,
                 raise_on_divergence=True):
    """Complete a low-rank matrix from samples ``b`` on ``op``'s observed set.

    Parameters
    ----------
    b : array_like, shape (m',)
        Observed values in the operator's row-major order.
    op : SamplingOperator
    tau : float, optional
        Shrinkage threshold; defaults to ``5 sqrt(n1 n2)``.
    step : float or callable, optional
        Constant step or ``k -> delta_k``; defaults to ``1.2 n1 n2 / m'``.
    max_iters : int
    tol : float
        Stop once ``||A(X_k) - b|| / ||b|| <= tol``.
    y0 : array_like, optional
        Initial dual vector; zero by default.

    Returns
    -------
    SvtResult

    Raises
    ------
    DivergenceError
        If the relative residual stays above 10x its first value for 20
        consecutive iterations.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    if max_iters < 1:
        raise DomainError("max_iters must be >= 1")
    tau = default_threshold(op.shape) if tau is None else float(tau)
    step = default_step(op.shape, op.m_prime) if step is None else step

    residuals, steps, ranks = [], [], []
    above = 0
    state = None
    stop_reason = "max_iters"
    for state in svt_iterate(b, op, tau, step, y0):
        if not np.isfinite(state.residual):
            raise DivergenceError("non-finite residual", diagnostics=residuals)
        residuals.append(state.residual)
        steps.append(state.step)
        ranks.append(state.rank)
        if state.residual <= tol:
            stop_reason = "tol"
            break
        above = above + 1 if state.residual > DIVERGENCE_FACTOR * residuals[0] else 0
        if above >= DIVERGENCE_PATIENCE and raise_on_divergence:
            raise DivergenceError(
                f"residual above {DIVERGENCE_FACTOR}x initial for {above} iterations",
                diagnostics=residuals)
        if state.k >= max_iters:
            break
    log.debug("svt stopped after %d iterations (%s), residual %.3g", state.k, stop_reason, state.residual)
    return SvtResult(X=state.X, residuals=residuals, iterations=state.k,
                     converged=stop_reason == "tol", stop_reason=stop_reason, tau=tau,
                     steps=steps, ranks=ranks)


def complete_hankel_pipeline(R, dims=None, tau=None, step=None, max_iters=500, tol=1e-4,
                             b_override=None):
    """Complete a Hankel matrix from its one-bit observation.

    ``b_override`` bypasses the one-bit right-hand side (e.g. to feed
    unquantized samples on the same observed set).
    """
    if not isinstance(R, OneBitObservation):
        raise DomainError("expected a OneBitObservation")
    if dims is not None and tuple(dims) != R.shape:
        raise DomainError(f"dims {tuple(dims)} do not match observation shape {R.shape}")
    if R.omega.m_prime == 0:
        raise DomainError("observation set is empty")
    op = SamplingOperator(R.omega)
    b = R.b if b_override is None else np.asarray(b_override, dtype=complex)
    return svt_complete(b, op, tau=tau, step=step, max_iters=max_iters, tol=tol)
