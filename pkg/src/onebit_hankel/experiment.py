"""
End-to-end experiment pipeline, Monte Carlo driver and output writers.

The default configuration is the two-target automotive scene: a 6 TX x 8 RX
MIMO radar on a half-wavelength grid, targets at -57 and -34 degrees, 20 dB
SNR, one-bit dithered Hankel data completed by SVT.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .array_model import (
    Snapshot,
    TargetScene,
    apply_mask,
    noise_variance_from_snr,
    synthesize_snapshot,
    virtual_array,
)
from .errors import ConfigError, DomainError, StageError
from .hankel import build_hankel, dehankel, hankel_dims
from .quantization import design_dither_scale, generate_dither, one_bit_quantize
from .spectrum import angle_spectrum, find_peaks, write_spectrum_csv
from .svt import ONE_BIT_TOL, SamplingOperator, svt_complete
from .theory import epsilon_for_samples, recovery_error_bound, sample_complexity

__all__ = [
    "GeometryConfig",
    "SceneConfig",
    "QuantizationConfig",
    "HankelConfig",
    "SolverConfig",
    "SpectrumConfig",
    "TheoryConfig",
    "ExperimentConfig",
    "RunReport",
    "MonteCarloReport",
    "stream_seed",
    "run_experiment",
    "run_monte_carlo",
    "emit_outputs",
    "load_config",
    "save_config",
    "STREAM_NOISE",
    "STREAM_DITHER",
    "STREAM_OMEGA",
]

log = logging.getLogger(__name__)

STREAM_NOISE = 0
STREAM_DITHER = 1
STREAM_OMEGA = 2

OUTPUT_FILES = ("spectrum_sparse.csv", "spectrum_completed.csv", "residuals.csv", "report.json")


def stream_seed(seed, label):
    """Entropy for the named sub-stream of a run; independent across labels and seeds."""
    return [int(seed), int(label)]


@dataclass
class GeometryConfig:
    tx: list = field(default_factory=lambda: [1, 19, 37, 55, 79, 91])
    rx: list = field(default_factory=lambda: [12, 22, 25, 39, 58, 62, 70, 73])


@dataclass
class SceneConfig:
    angles_deg: list = field(default_factory=lambda: [-57.0, -34.0])
    amplitudes: list = None
    phases_rad: list = None
    snr_db: float = 20.0
    spacing: float = 0.5
    # carried for the record only
    range_m: float = 100.0
    velocity_mps: float = -10.0


@dataclass
class QuantizationConfig:
    """``mode``: ``"auto"`` sizes the dither from the data, ``"explicit"`` uses
    ``delta``, ``"none"`` skips quantization (debug)."""

    mode: str = "auto"
    margin: float = 0.05
    delta: float = None


@dataclass
class HankelConfig:
    square: bool = False


@dataclass
class SolverConfig:
    tau: float = None
    step: float = None
    tol: float = ONE_BIT_TOL
    max_iters: int = 500


@dataclass
class SpectrumConfig:
    n_fft: int = 4096
    n_peaks: int = 2
    min_separation_deg: float = 5.0
    tolerance_deg: float = 1.0


@dataclass
class TheoryConfig:
    """Settings for the desk-scale check of the recovery bound."""

    trials: int = 200
    n1: int = 20
    n2: int = 20
    rank: int = 2
    epsilon: float = 0.5
    c: float = 1.0
    alpha: float = 1.0
    mode: str = "uniform"
    tol: float = 1e-4
    max_iters: int = 500


_SECTIONS = {
    "geometry": GeometryConfig,
    "scene": SceneConfig,
    "quantization": QuantizationConfig,
    "hankel": HankelConfig,
    "solver": SolverConfig,
    "spectrum": SpectrumConfig,
    "theory": TheoryConfig,
}


@dataclass
class ExperimentConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    quantization: QuantizationConfig = field(default_factory=QuantizationConfig)
    hankel: HankelConfig = field(default_factory=HankelConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    theory: TheoryConfig = field(default_factory=TheoryConfig)
    seed: int = 0
    trials: int = 50

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(d) - set(_SECTIONS) - {"seed", "trials"}
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        kwargs = {}
        for name, section in _SECTIONS.items():
            sub = d.get(name, {})
            if not isinstance(sub, dict):
                raise ConfigError(f"section '{name}' must be an object")
            names = {f.name for f in dataclasses.fields(section)}
            bad = set(sub) - names
            if bad:
                raise ConfigError(f"unknown keys in '{name}': {sorted(bad)}")
            kwargs[name] = section(**copy.deepcopy(sub))
        for key in ("seed", "trials"):
            if key in d:
                kwargs[key] = d[key]
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(d)

    def replace(self, **changes):
        """Copy with top-level or dotted (``"solver.tol"``) fields changed."""
        d = self.to_dict()
        for key, value in changes.items():
            section, _, name = key.replace("__", ".").partition(".")
            if name:
                d[section][name] = value
            else:
                d[section] = value
        return ExperimentConfig.from_dict(d)

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64, "seed must be an unsigned 64-bit integer")
        need(isinstance(self.trials, int) and self.trials >= 1, "trials must be >= 1")
        need(len(self.geometry.tx) >= 1 and len(self.geometry.rx) >= 1, "geometry needs TX and RX positions")
        sc = self.scene
        need(len(sc.angles_deg) >= 1, "scene needs at least one target")
        need(sc.snr_db is None or np.isfinite(sc.snr_db), "snr_db must be finite or null")
        q = self.quantization
        need(q.mode in ("auto", "explicit", "none"), f"unknown quantization mode {q.mode!r}")
        need(q.margin >= 0, "quantization margin must be non-negative")
        need(q.mode != "explicit" or (q.delta is not None and q.delta > 0), "explicit mode needs delta > 0")
        s = self.solver
        need(s.tol > 0 and s.max_iters >= 1, "solver tol must be positive and max_iters >= 1")
        need(s.tau is None or s.tau >= 0, "solver tau must be non-negative")
        need(s.step is None or s.step > 0, "solver step must be positive")
        sp = self.spectrum
        need(sp.n_fft >= 1 and sp.n_fft & (sp.n_fft - 1) == 0, "n_fft must be a power of two")
        need(sp.n_peaks >= 1, "n_peaks must be >= 1")
        need(sp.tolerance_deg > 0 and sp.min_separation_deg >= 0, "spectrum tolerances must be positive")
        th = self.theory
        need(th.mode in ("uniform", "full"), f"unknown theory mode {th.mode!r}")
        need(th.trials >= 1 and th.epsilon > 0 and th.alpha > 0 and th.c > 0, "theory parameters must be positive")
        try:
            TargetScene(sc.angles_deg, sc.amplitudes, sc.phases_rad, sc.spacing)
            virtual_array(self.geometry.tx, self.geometry.rx)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path=None):
    """Read a JSON config; ``None`` gives the defaults."""
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_json(text)


def save_config(cfg, path):
    Path(path).write_text(cfg.to_json() + "\n")


@dataclass
class RunReport:
    """Everything one pipeline run produced.

    ``timings`` is wall-clock and so is kept out of :meth:`to_json` to
    preserve byte-level reproducibility.
    """

    config: dict
    seed: int
    geometry: dict
    normalizer: complex
    delta: float
    error_metrics: dict
    residuals: list
    svt: dict
    peaks_sparse: dict
    peaks_completed: dict
    detected: bool
    pslr_gain_db: float
    theory: dict
    spectrum_sparse: object = None
    spectrum_completed: object = None
    completed: np.ndarray = None
    timings: dict = field(default_factory=dict)

    def to_dict(self, residuals_path="residuals.csv"):
        return {
            "config": self.config,
            "seed": self.seed,
            "geometry": self.geometry,
            "normalizer": {"re": float(self.normalizer.real), "im": float(self.normalizer.imag)},
            "delta": self.delta,
            "error_metrics": self.error_metrics,
            "residuals_path": residuals_path,
            "svt": self.svt,
            "peaks": self.peaks_completed["peaks"],
            "peaks_sparse": self.peaks_sparse["peaks"],
            "pslr_db": {"sparse": self.peaks_sparse["pslr_db"], "completed": self.peaks_completed["pslr_db"]},
            "pslr_gain_db": self.pslr_gain_db,
            "detected": self.detected,
            "theory": self.theory,
        }

    def to_json(self, residuals_path="residuals.csv"):
        return json.dumps(self.to_dict(residuals_path), sort_keys=True, indent=2, allow_nan=False)


def _match_peaks(found, truth, tol):
    if len(found) != len(truth):
        return False
    return all(abs(a - b) <= tol for a, b in zip(sorted(found), sorted(truth)))


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def run_experiment(cfg, seed=None):
    """Run the full pipeline once.

    synthesize -> mask -> normalize by first observed element -> Hankel ->
    dither -> one-bit -> SVT -> de-Hankel -> spectra -> peaks.

    Parameters
    ----------
    cfg : ExperimentConfig
    seed : int, optional
        Overrides ``cfg.seed``.

    Returns
    -------
    RunReport

    Raises
    ------
    StageError
        Wraps any failure with the stage it happened in.
    """
    cfg.validate()
    seed = cfg.seed if seed is None else int(seed)
    timings = {}
    t0 = time.perf_counter()

    def tick(name):
        nonlocal t0
        now = time.perf_counter()
        timings[name] = now - t0
        t0 = now

    sc = cfg.scene
    scene = TargetScene(sc.angles_deg, sc.amplitudes, sc.phases_rad, sc.spacing)
    geom = virtual_array(cfg.geometry.tx, cfg.geometry.rx)
    M = geom.M
    clean = _stage("synthesize", synthesize_snapshot, scene, M, 0.0)
    noisy = _stage("synthesize", synthesize_snapshot, scene, M, noise_variance_from_snr(sc.snr_db),
                   stream_seed(seed, STREAM_NOISE))
    tick("synthesize")

    sparse = _stage("mask", apply_mask, noisy, geom)
    first = int(np.argmax(sparse.mask))
    normalizer = complex(sparse.values[first])
    if normalizer == 0:
        raise StageError("normalize", DomainError("first observed element is zero"))
    sparse = Snapshot(sparse.values / normalizer, sparse.mask)
    truth = clean.values / normalizer
    tick("normalize")

    dims = hankel_dims(M, square=cfg.hankel.square)
    H, omega = _stage("hankel", build_hankel, sparse, dims)
    H_true, _ = build_hankel(truth, dims)
    tick("hankel")

    q = cfg.quantization
    if q.mode == "explicit":
        delta = float(q.delta)
    else:
        delta = _stage("dither", design_dither_scale, H, omega, q.margin)
    op = SamplingOperator(omega)
    if q.mode == "none":
        b = op.forward(H)
    else:
        dither = _stage("dither", generate_dither, dims, delta, stream_seed(seed, STREAM_DITHER))
        R = _stage("one-bit", one_bit_quantize, H, omega, dither)
        b = R.b
    tick("quantize")

    s = cfg.solver
    res = _stage("svt", svt_complete, b, op, tau=s.tau, step=s.step, max_iters=s.max_iters, tol=s.tol)
    tick("svt")

    completed = dehankel(res.X)
    if completed.shape[0] < M:
        # square lift leaves the tail outside the matrix; keep what was measured there
        completed = np.concatenate([completed, sparse.values[completed.shape[0]:]])
    tick("dehankel")

    sp = cfg.spectrum
    spec_sparse = _stage("spectrum", angle_spectrum, sparse, sp.n_fft, "sparse", sc.spacing)
    spec_done = _stage("spectrum", angle_spectrum, completed, sp.n_fft, "completed", sc.spacing)
    peaks_sparse = _stage("peaks", find_peaks, spec_sparse, sp.n_peaks, sp.min_separation_deg)
    peaks_done = _stage("peaks", find_peaks, spec_done, sp.n_peaks, sp.min_separation_deg)
    tick("spectrum")

    n1, n2 = dims
    alpha = delta / 2.0
    m_prime = omega.m_prime
    eps = epsilon_for_samples(m_prime, scene.n_targets, n1, n2)
    bound = recovery_error_bound(eps, alpha, n1, n2)
    matrix_error = float(np.linalg.norm(H_true - res.X))
    theory = {
        "alpha": alpha,
        "epsilon": eps,
        "bound": bound,
        "m_prime": m_prime,
        "sample_complexity": sample_complexity(eps, scene.n_targets, n1, n2),
        "matrix_error": matrix_error,
        "satisfied": bool(matrix_error <= bound),
        "random_sampling": False,
    }
    error_metrics = {
        "relative_error": float(np.linalg.norm(completed - truth) / np.linalg.norm(truth)),
        "relative_error_matrix": matrix_error / float(np.linalg.norm(H_true)),
        "relative_error_sparse": float(np.linalg.norm(sparse.values - truth) / np.linalg.norm(truth)),
        "final_residual": res.residuals[-1],
    }
    geometry = {
        "M": M,
        "n_virtual": geom.n_virtual,
        "n_pairs": geom.n_pairs,
        "virtual_positions": list(geom.virtual_positions),
        "hankel_dims": [n1, n2],
        "m_prime": m_prime,
    }
    svt_info = {
        "iterations": res.iterations,
        "converged": res.converged,
        "stop_reason": res.stop_reason,
        "tau": res.tau,
        "step": res.steps[0],
        "final_rank": res.ranks[-1],
    }
    detected = _match_peaks(peaks_done.angles, sc.angles_deg, sp.tolerance_deg)
    return RunReport(
        config=cfg.to_dict(),
        seed=seed,
        geometry=geometry,
        normalizer=normalizer,
        delta=delta,
        error_metrics=error_metrics,
        residuals=list(res.residuals),
        svt=svt_info,
        peaks_sparse=peaks_sparse.to_dict(),
        peaks_completed=peaks_done.to_dict(),
        detected=detected,
        pslr_gain_db=peaks_done.pslr_db - peaks_sparse.pslr_db,
        theory=theory,
        spectrum_sparse=spec_sparse,
        spectrum_completed=spec_done,
        completed=completed,
        timings=timings,
    )


@dataclass
class MonteCarloReport:
    base_seed: int
    trials: int
    reports: list
    failures: list

    def _vals(self, fn):
        return np.array([fn(r) for r in self.reports if r is not None], dtype=float)

    def aggregate(self):
        n_ok = sum(r is not None for r in self.reports)
        err = self._vals(lambda r: r.error_metrics["relative_error"])
        gain = self._vals(lambda r: r.pslr_gain_db)
        det = sum(bool(r.detected) for r in self.reports if r is not None)

        def q(a, p):
            return float(np.percentile(a, p)) if a.size else None

        return {
            "base_seed": self.base_seed,
            "trials": self.trials,
            "completed_trials": n_ok,
            "failed_trials": len(self.failures),
            "detection_rate": det / self.trials,
            "relative_error": {"median": q(err, 50), "q25": q(err, 25), "q75": q(err, 75),
                               "iqr": (q(err, 75) - q(err, 25)) if err.size else None},
            "pslr_gain_db": {"median": q(gain, 50), "min": float(gain.min()) if gain.size else None,
                             "fraction_ge_6db": float(np.mean(gain >= 6.0)) if gain.size else None},
            "pslr_sparse_median_db": q(self._vals(lambda r: r.peaks_sparse["pslr_db"]), 50),
            "pslr_completed_median_db": q(self._vals(lambda r: r.peaks_completed["pslr_db"]), 50),
            "failures": self.failures,
        }

    def to_json(self):
        body = self.aggregate()
        body["per_trial"] = [
            None if r is None else {
                "seed": r.seed,
                "detected": r.detected,
                "relative_error": r.error_metrics["relative_error"],
                "pslr_gain_db": r.pslr_gain_db,
                "peaks": r.peaks_completed["peaks"],
                "iterations": r.svt["iterations"],
            }
            for r in self.reports
        ]
        return json.dumps(body, sort_keys=True, indent=2, allow_nan=False)


def _trial(args):
    cfg_dict, seed = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    try:
        return seed, run_experiment(cfg, seed), None
    except StageError as exc:
        return seed, None, {"seed": seed, "stage": exc.stage, "error": str(exc.cause)}


def run_monte_carlo(cfg, trials=None, workers=1):
    """Independent pipeline runs with seeds ``cfg.seed + t``.

    Failed trials are recorded and count as missed detections. Results are
    reduced in trial order whatever the completion order.
    """
    trials = cfg.trials if trials is None else int(trials)
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    cfg.validate()
    jobs = [(cfg.to_dict(), cfg.seed + t) for t in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_trial, jobs))
    else:
        out = [_trial(j) for j in jobs]
    out.sort(key=lambda o: o[0])
    return MonteCarloReport(
        base_seed=cfg.seed,
        trials=trials,
        reports=[r for _, r, _ in out],
        failures=[f for _, _, f in out if f is not None],
    )


def emit_outputs(report, output_dir):
    """Write spectra, residual history and the JSON report.

    Returns
    -------
    dict
        File name to absolute path.
    """
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {name: out / name for name in OUTPUT_FILES}
        write_spectrum_csv(report.spectrum_sparse, paths["spectrum_sparse.csv"])
        write_spectrum_csv(report.spectrum_completed, paths["spectrum_completed.csv"])
        with open(paths["residuals.csv"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "relative_residual"])
            for k, r in enumerate(report.residuals, start=1):
                w.writerow([k, f"{r:.17g}"])
        paths["report.json"].write_text(report.to_json("residuals.csv") + "\n")
    except OSError as exc:
        raise OSError(f"failed writing outputs to {os.fspath(out)}: {exc}") from exc
    return {name: str(p.resolve()) for name, p in paths.items()}
