"""
Recovery guarantees for dithered one-bit matrix completion.

Closed-form evaluators for the distortion functional, its expectations,
the recovery error bound and sample complexity, the Hoeffding tails and
the covering-number bounds, plus Monte Carlo validators that check each
against simulation.

Throughout, ``alpha`` is the half-width of the dither interval
(``Delta = 2 alpha``) and one-bit samples are ``R = sign(X - tau)`` with
``tau ~ U[-alpha, alpha]``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .errors import DomainError
from .hankel import ObservationSet
from .quantization import generate_dither, sign_pm1, uniform_quantize
from .svt import SamplingOperator, svt_complete

__all__ = [
    "TheoryParams",
    "t_ave",
    "expected_distortion",
    "expected_t_ave",
    "check_consistency",
    "recovery_error_bound",
    "sample_complexity",
    "epsilon_for_samples",
    "failure_probability",
    "hoeffding_tail",
    "covering_bounds",
    "lemma_sample_requirement",
    "parallelogram_gap",
    "in_low_rank_set",
    "distortion_monte_carlo",
    "t_ave_monte_carlo",
    "empirical_tail_frequency",
    "random_low_rank",
    "validate_theorem",
    "TheoremReport",
]


@dataclass(frozen=True)
class TheoryParams:
    alpha: float
    rank: int
    n1: int
    n2: int
    epsilon: float
    m_prime: int
    rho: float = None

    def __post_init__(self):
        if not (self.alpha > 0 and self.epsilon > 0):
            raise DomainError("alpha and epsilon must be positive")
        if not 1 <= self.rank <= min(self.n1, self.n2):
            raise DomainError("rank must be in [1, min(n1, n2)]")
        if self.rho is None:
            object.__setattr__(self, "rho", math.sqrt(8 * self.epsilon * self.alpha * self.n1 * self.n2))
        elif not self.rho > 0:
            raise DomainError("rho must be positive")

    @property
    def delta(self):
        return 2.0 * self.alpha


def _real_t_ave(X, R, mask, alpha):
    return float(np.abs(X[mask] - alpha * R[mask]).mean())


def t_ave(X, R, omega, delta):
    """Mean absolute gap between observed entries and scaled one-bit data.

    For complex input returns ``(real_channel, imag_channel)``.
    """
    mask = omega.mask if isinstance(omega, ObservationSet) else np.asarray(omega, dtype=bool)
    if not mask.any():
        raise DomainError("observation set is empty")
    X = np.asarray(X)
    R = np.asarray(R)
    alpha = delta / 2.0
    if np.iscomplexobj(X) or np.iscomplexobj(R):
        return (_real_t_ave(X.real, R.real, mask, alpha), _real_t_ave(X.imag, R.imag, mask, alpha))
    return _real_t_ave(X, R, mask, alpha)


def expected_distortion(x, alpha):
    """``E_tau |x - alpha sign(x - tau)| = alpha - x^2 / alpha`` for ``|x| <= alpha``."""
    x = np.asarray(x, dtype=float)
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if np.any(np.abs(x) > alpha):
        raise DomainError("expected distortion needs |x| <= alpha")
    out = alpha - x ** 2 / alpha
    return float(out) if out.ndim == 0 else out


def expected_t_ave(X, omega, alpha):
    """Expected distortion average, conditional on the observed set and over uniform (i, j).

    Returns
    -------
    conditional : float
        ``alpha - ||P_Omega(X)||_F^2 / (alpha m')``
    full : float
        ``alpha - ||X||_F^2 / (alpha n1 n2)``
    """
    X = np.asarray(X, dtype=float)
    mask = omega.mask if isinstance(omega, ObservationSet) else np.asarray(omega, dtype=bool)
    if np.max(np.abs(X)) > alpha:
        raise DomainError("expected T_ave needs ||X||_max <= alpha")
    m = int(mask.sum())
    if m == 0:
        raise DomainError("observation set is empty")
    cond = alpha - float(np.sum(X[mask] ** 2)) / (alpha * m)
    full = alpha - float(np.sum(X ** 2)) / (alpha * X.size)
    return cond, full


def check_consistency(X, Y, omega, delta, dither):
    """Whether ``X`` and ``Y`` quantize identically on the observed set.

    Both channels of complex inputs are compared, each with its own dither,
    using the comparator convention (the uniform quantizer fed ``-tau``).
    """
    mask = omega.mask if isinstance(omega, ObservationSet) else np.asarray(omega, dtype=bool)
    X = np.asarray(X)
    Y = np.asarray(Y)
    channels = [(X.real, Y.real, np.asarray(dither.real))]
    if np.iscomplexobj(X) or np.iscomplexobj(Y):
        channels.append((X.imag, Y.imag, np.asarray(dither.imag)))
    for a, b, t in channels:
        qa = uniform_quantize(a[mask], delta, -t[mask])
        qb = uniform_quantize(b[mask], delta, -t[mask])
        if not np.array_equal(qa, qb):
            return False
    return True


def recovery_error_bound(epsilon, alpha, n1, n2):
    """Frobenius recovery bound ``2 sqrt(8 eps alpha n1 n2)``."""
    if epsilon < 0 or alpha < 0:
        raise DomainError("epsilon and alpha must be non-negative")
    return 2.0 * math.sqrt(8.0 * epsilon * alpha * n1 * n2)


def sample_complexity(epsilon, rank, n1, n2, c=1.0):
    """One-bit samples needed: ``ceil(c eps^{-5/2} r max(n1, n2))``.

    ``c`` is the constant hidden by the order-of-magnitude statement; it is
    not known and is left to the caller.
    """
    if not (epsilon > 0 and c > 0 and rank > 0):
        raise DomainError("epsilon, rank and c must be positive")
    value = c * epsilon ** -2.5 * rank * max(n1, n2)
    return int(math.ceil(round(value, 9)))


def epsilon_for_samples(m_prime, rank, n1, n2, c=1.0):
    """Smallest epsilon whose sample requirement is met by ``m_prime`` samples."""
    if m_prime <= 0:
        raise DomainError("m' must be positive")
    eps = (c * rank * max(n1, n2) / m_prime) ** 0.4
    # the power round trip can land a hair low; step up to the first eps that fits
    while sample_complexity(eps, rank, n1, n2, c) > m_prime:
        eps = math.nextafter(eps, math.inf)
    return eps


def failure_probability(epsilon, m_prime, alpha, delta=None):
    """Failure probability in both exponent conventions.

    Returns
    -------
    stated : float
        ``4 exp(-eps^2 m' / Delta^2)``
    lemma_chain : float
        ``4 exp(-eps^2 m' / (4 alpha^2))``; equal to ``stated`` when
        ``Delta = 2 alpha``.
    """
    delta = 2.0 * alpha if delta is None else delta
    stated = 4.0 * math.exp(-epsilon ** 2 * m_prime / delta ** 2)
    chain = 4.0 * math.exp(-epsilon ** 2 * m_prime / (4.0 * alpha ** 2))
    return stated, chain


def hoeffding_tail(epsilon, m_prime, alpha):
    """Tail bounds on ``|T_ave - E T_ave| >= eps``.

    Returns
    -------
    pointwise : float
        ``2 exp(-eps^2 m' / (2 alpha^2))`` for a fixed matrix.
    uniform : float
        ``2 exp(-eps^2 m' / (4 alpha^2))`` for the supremum over the low-rank set.
    """
    if not (epsilon > 0 and m_prime > 0 and alpha > 0):
        raise DomainError("inputs must be positive")
    pointwise = 2.0 * math.exp(-epsilon ** 2 * m_prime / (2.0 * alpha ** 2))
    uniform = 2.0 * math.exp(-epsilon ** 2 * m_prime / (4.0 * alpha ** 2))
    return pointwise, uniform


def covering_bounds(alpha, rank, n1, n2, rho):
    """Log covering number and Kolmogorov entropy bounds of the low-rank set.

    Returns
    -------
    log_cover : float
        ``(n1 + n2) r log(1 + 2 alpha sqrt(n1 n2) / rho)``
    entropy : float
        ``2 alpha (n1 + n2) r sqrt(n1 n2) / rho``; never below ``log_cover``.
    """
    if not (alpha > 0 and rank > 0 and rho > 0):
        raise DomainError("inputs must be positive")
    ratio = 2.0 * alpha * math.sqrt(n1 * n2) / rho
    log_cover = (n1 + n2) * rank * math.log1p(ratio)
    entropy = (n1 + n2) * rank * ratio
    assert log_cover <= entropy * (1 + 1e-12)
    return log_cover, entropy


def lemma_sample_requirement(alpha, rank, n1, n2, epsilon, rho):
    """``8 alpha^3 (n1 + n2) r sqrt(n1 n2) / (eps^2 rho)``: samples making the entropy term affordable."""
    return 8.0 * alpha ** 3 * (n1 + n2) * rank * math.sqrt(n1 * n2) / (epsilon ** 2 * rho)


def parallelogram_gap(X, Y):
    """Relative gap in ``||X-Y||^2 = 2(||X||^2 + ||Y||^2) - ||X+Y||^2``."""
    lhs = np.linalg.norm(X - Y) ** 2
    rhs = 2 * (np.linalg.norm(X) ** 2 + np.linalg.norm(Y) ** 2) - np.linalg.norm(X + Y) ** 2
    scale = max(np.linalg.norm(X) ** 2 + np.linalg.norm(Y) ** 2, np.finfo(float).tiny)
    return float(abs(lhs - rhs) / scale)


def in_low_rank_set(X, rank, alpha, tol=1e-8):
    """Rank at most ``rank`` (relative tol) and both channels bounded by ``alpha``."""
    X = np.asarray(X)
    s = np.linalg.svd(X, compute_uv=False)
    numerical_rank = int(np.count_nonzero(s > tol * s[0])) if s[0] > 0 else 0
    beta = float(np.max(np.maximum(np.abs(X.real), np.abs(X.imag))))
    return numerical_rank <= rank and beta <= alpha


# -- Monte Carlo validators --------------------------------------------------

def distortion_monte_carlo(x, alpha, n_dithers, rng, chunk=1_000_000):
    """Mean and standard error of ``|x - alpha sign(x - tau)|`` over uniform dithers."""
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_dithers:
        n = min(chunk, n_dithers - done)
        tau = rng.uniform(-alpha, alpha, n)
        d = np.abs(x - alpha * sign_pm1(x - tau))
        total += d.sum()
        total_sq += (d ** 2).sum()
        done += n
    mean = total / n_dithers
    var = max(total_sq / n_dithers - mean ** 2, 0.0) * n_dithers / (n_dithers - 1)
    return mean, math.sqrt(var / n_dithers)


def t_ave_monte_carlo(X, omega, alpha, n_draws, rng, chunk=20_000):
    """Mean and standard error of ``T_ave`` over fresh dithers, observed set fixed."""
    mask = omega.mask if isinstance(omega, ObservationSet) else np.asarray(omega, dtype=bool)
    x = np.asarray(X, dtype=float)[mask]
    samples = np.empty(n_draws)
    done = 0
    while done < n_draws:
        n = min(chunk, n_draws - done)
        tau = rng.uniform(-alpha, alpha, (n, x.size))
        samples[done:done + n] = np.abs(x - alpha * sign_pm1(x - tau)).mean(axis=1)
        done += n
    return float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(n_draws))


def empirical_tail_frequency(X, m_prime, alpha, epsilons, trials, rng, chunk=2000):
    """Frequency of ``|T_ave - (alpha - ||X||^2/(alpha n1 n2))| >= eps``.

    Each trial samples ``m_prime`` entries uniformly with replacement and a
    fresh dither per sample, so the summands are i.i.d. and bounded in
    ``[0, 2 alpha]``.

    Returns
    -------
    ndarray of int
        Exceedance counts, one per entry of ``epsilons``.
    """
    X = np.asarray(X, dtype=float)
    flat = X.ravel()
    centre = expected_t_ave(X, np.ones(X.shape, dtype=bool), alpha)[1]
    eps = np.asarray(epsilons, dtype=float)
    counts = np.zeros(eps.shape, dtype=int)
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        idx = rng.integers(0, flat.size, (n, m_prime))
        x = flat[idx]
        tau = rng.uniform(-alpha, alpha, (n, m_prime))
        dev = np.abs(np.abs(x - alpha * sign_pm1(x - tau)).mean(axis=1) - centre)
        counts += (dev[:, None] >= eps[None, :]).sum(axis=0)
        done += n
    return counts


def random_low_rank(shape, rank, rng, beta=1.0, complex_valued=True):
    """Random rank-``rank`` matrix scaled so ``max(|Re|, |Im|) == beta``.

    Singular values of the unscaled matrix decay geometrically (1, 1/2, ...).
    """
    n1, n2 = shape

    def gauss(*s):
        g = rng.standard_normal(s)
        return g + 1j * rng.standard_normal(s) if complex_valued else g

    U, _ = np.linalg.qr(gauss(n1, rank))
    V, _ = np.linalg.qr(gauss(n2, rank))
    X = (U * 0.5 ** np.arange(rank)) @ V.conj().T
    if complex_valued:
        peak = np.max(np.maximum(np.abs(X.real), np.abs(X.imag)))
    else:
        peak = np.max(np.abs(X))
    return X * (beta / peak)


@dataclass
class TheoremReport:
    """Outcome of a batch of one-bit completions checked against the bound."""

    mode: str
    trials: int
    n1: int
    n2: int
    rank: int
    m_prime: int
    alpha: float
    epsilon: float
    c: float
    bound: float
    channel_bound: float
    failure_probability: float
    failure_probability_lemma_chain: float
    allowed_violations: int
    errors: list = field(default_factory=list)
    errors_real: list = field(default_factory=list)
    errors_imag: list = field(default_factory=list)
    consistent: list = field(default_factory=list)
    in_set: list = field(default_factory=list)
    parallelogram_gaps: list = field(default_factory=list)
    implied_epsilon: list = field(default_factory=list)
    implied_m_prime: list = field(default_factory=list)
    svt_iterations: list = field(default_factory=list)
    within_theorem_hypotheses: bool = True

    @property
    def violations(self):
        return int(sum(e > self.bound for e in self.errors))

    @property
    def violations_consistent(self):
        return int(sum(e > self.bound for e, c in zip(self.errors, self.consistent) if c))

    @property
    def n_consistent(self):
        return int(sum(self.consistent))

    @property
    def fraction_within_bound(self):
        return 1.0 - self.violations / self.trials

    @property
    def passed(self):
        return self.violations <= self.allowed_violations

    def summary(self):
        out = {k: v for k, v in asdict(self).items() if not isinstance(v, list)}
        out.update(
            violations=self.violations,
            violations_consistent=self.violations_consistent,
            n_consistent=self.n_consistent,
            n_in_set=int(sum(self.in_set)),
            fraction_within_bound=self.fraction_within_bound,
            max_error=float(max(self.errors)),
            median_error=float(np.median(self.errors)),
            max_parallelogram_gap=float(max(self.parallelogram_gaps)),
            median_implied_m_prime=float(np.median(self.implied_m_prime)),
            passed=self.passed,
        )
        return out


def validate_theorem(trials=200, n1=20, n2=20, rank=2, epsilon=0.5, c=1.0, alpha=1.0,
                     mode="uniform", m_prime=None, omega=None, seed=0,
                     tau=None, step=None, max_iters=500, tol=1e-4, confidence=0.99):
    """Monte Carlo check of the one-bit recovery bound.

    Each trial draws a random rank-``rank`` complex matrix with both
    channels bounded by ``alpha``, observes ``m'`` entries, quantizes them
    to one bit against a fresh uniform dither with ``Delta = 2 alpha``, and
    completes with SVT. The error is compared with ``2 sqrt(8 eps alpha n1 n2)``
    (and each channel with half of it).

    Parameters
    ----------
    mode : {"uniform", "full", "structured"}
        ``"uniform"`` samples ``m'`` entries uniformly (default
        ``m' = sample_complexity(eps, r, n1, n2, c)``); ``"full"`` observes
        every entry; ``"structured"`` uses the given ``omega`` as is, which
        lies outside the theorem's random-sampling hypothesis.
    seed : int
        Trial ``t`` uses generator seed ``[seed, t]``.
    confidence : float
        Level of the binomial quantile that sets the allowed violation count.
    """
    shape = (n1, n2)
    if mode == "uniform":
        m_prime = sample_complexity(epsilon, rank, n1, n2, c) if m_prime is None else int(m_prime)
        if m_prime > n1 * n2:
            raise DomainError(f"m'={m_prime} exceeds n1 n2 = {n1 * n2}; raise epsilon")
    elif mode == "full":
        m_prime = n1 * n2
    elif mode == "structured":
        if omega is None:
            raise DomainError("structured mode needs an observation set")
        omega = omega if isinstance(omega, ObservationSet) else ObservationSet(omega)
        if omega.shape != shape:
            raise DomainError("observation set shape mismatch")
        m_prime = omega.m_prime
    else:
        raise DomainError(f"unknown mode {mode!r}")

    delta = 2.0 * alpha
    bound = recovery_error_bound(epsilon, alpha, n1, n2)
    p_stated, p_chain = failure_probability(epsilon, m_prime, alpha, delta)
    allowed = int(stats.binom.ppf(confidence, trials, min(p_stated, 1.0)))
    report = TheoremReport(
        mode=mode, trials=trials, n1=n1, n2=n2, rank=rank, m_prime=m_prime, alpha=alpha,
        epsilon=epsilon, c=c, bound=bound, channel_bound=bound / 2.0,
        failure_probability=p_stated, failure_probability_lemma_chain=p_chain,
        allowed_violations=allowed, within_theorem_hypotheses=mode != "structured",
    )

    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        X = random_low_rank(shape, rank, rng, beta=alpha)
        if mode == "uniform":
            om = ObservationSet.uniform(shape, m_prime, rng)
        elif mode == "full":
            om = ObservationSet.full(shape)
        else:
            om = omega
        dither = generate_dither(shape, delta, rng.integers(2 ** 63))
        R = sign_pm1(X.real - dither.real) + 1j * sign_pm1(X.imag - dither.imag)
        op = SamplingOperator(om)
        res = svt_complete(alpha * op.forward(R), op, tau=tau, step=step,
                           max_iters=max_iters, tol=tol, raise_on_divergence=False)
        Xb = res.X
        err = float(np.linalg.norm(X - Xb))
        report.errors.append(err)
        report.errors_real.append(float(np.linalg.norm(X.real - Xb.real)))
        report.errors_imag.append(float(np.linalg.norm(X.imag - Xb.imag)))
        report.consistent.append(check_consistency(X, Xb, om, delta, dither))
        report.in_set.append(in_low_rank_set(Xb, rank, alpha))
        report.parallelogram_gaps.append(parallelogram_gap(X, Xb))
        eps_obs = err ** 2 / (32.0 * alpha * n1 * n2)
        report.implied_epsilon.append(eps_obs)
        report.implied_m_prime.append(
            sample_complexity(eps_obs, rank, n1, n2, c) if eps_obs > 0 else float("inf"))
        report.svt_iterations.append(res.iterations)
    return report
