"""Command-line entry point: ``onebit-hankel {run,montecarlo,validate-theory,rank-check}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .array_model import TargetScene, virtual_array
from .errors import ConfigError
from .experiment import emit_outputs, load_config, run_experiment, run_monte_carlo
from .hankel import hankel_dims, verify_vandermonde_rank
from .theory import validate_theorem

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2


def _write_json(out, name, payload):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n")
    return path


def cmd_run(cfg, args):
    report = run_experiment(cfg)
    manifest = emit_outputs(report, args.out)
    pk = ", ".join(f"{p['angle_deg']:.2f} deg ({p['level_db']:.1f} dB)" for p in report.peaks_completed["peaks"])
    print(f"peaks (completed): {pk}")
    print(f"detected: {report.detected}  PSLR gain: {report.pslr_gain_db:.2f} dB  "
          f"relative error: {report.error_metrics['relative_error']:.4f}")
    for name in sorted(manifest):
        print(f"wrote {manifest[name]}")


def cmd_montecarlo(cfg, args):
    mc = run_monte_carlo(cfg, trials=args.trials, workers=args.workers)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    path = Path(args.out) / "montecarlo.json"
    path.write_text(mc.to_json() + "\n")
    agg = mc.aggregate()
    print(f"trials: {agg['trials']}  failed: {agg['failed_trials']}  detection rate: {agg['detection_rate']:.3f}")
    print(f"median PSLR gain: {agg['pslr_gain_db']['median']:.2f} dB  "
          f"fraction >= 6 dB: {agg['pslr_gain_db']['fraction_ge_6db']:.2f}")
    print(f"wrote {path.resolve()}")


def cmd_validate_theory(cfg, args):
    th = cfg.theory
    rep = validate_theorem(trials=args.trials or th.trials, n1=th.n1, n2=th.n2, rank=th.rank,
                           epsilon=th.epsilon, c=th.c, alpha=th.alpha, mode=th.mode, seed=cfg.seed,
                           tol=th.tol, max_iters=th.max_iters)
    summary = rep.summary()
    path = _write_json(args.out, "theory.json", summary)
    print(f"bound {rep.bound:.3f}  max error {summary['max_error']:.3f}  violations {rep.violations}"
          f"/{rep.trials} (allowed {rep.allowed_violations})  consistent {rep.n_consistent}/{rep.trials}")
    print(f"wrote {path.resolve()}")


def cmd_rank_check(cfg, args):
    sc = cfg.scene
    scene = TargetScene(sc.angles_deg, sc.amplitudes, sc.phases_rad, sc.spacing)
    geom = virtual_array(cfg.geometry.tx, cfg.geometry.rx)
    dims = hankel_dims(geom.M, square=cfg.hankel.square)
    rank, s = verify_vandermonde_rank(scene, geom.M, dims=dims)
    payload = {
        "M": geom.M,
        "hankel_dims": list(dims),
        "n_targets": scene.n_targets,
        "rank": rank,
        "singular_values": [float(v) for v in s[: scene.n_targets + 3]],
        "ratio_next": float(s[scene.n_targets] / s[0]) if s.shape[0] > scene.n_targets else 0.0,
    }
    path = _write_json(args.out, "rank_check.json", payload)
    print(f"M={geom.M} dims={dims} targets={scene.n_targets} numerical rank={rank} "
          f"s[P]/s[0]={payload['ratio_next']:.3e}")
    print(f"wrote {path.resolve()}")


COMMANDS = {
    "run": cmd_run,
    "montecarlo": cmd_montecarlo,
    "validate-theory": cmd_validate_theory,
    "rank-check": cmd_rank_check,
}


def build_parser():
    p = argparse.ArgumentParser(prog="onebit-hankel",
                                description="One-bit Hankel completion for sparse-array radar DoA.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file (defaults to the built-in scene)")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, help="override the base seed")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name in ("montecarlo", "validate-theory"):
            sp.add_argument("--trials", type=int, help="override the trial count")
        if name == "montecarlo":
            sp.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        if getattr(args, "trials", None) is not None and args.trials < 1:
            raise ConfigError("--trials must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
