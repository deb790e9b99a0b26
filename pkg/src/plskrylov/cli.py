"""Command-line entry point ``plskrylov``.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from . import experiments as ex
from .errors import NumericalError, ValidationError

_STUDIES = {
    "risk": (ex.run_risk_study, "observed_mean"),
    "predict": (ex.run_prediction_study, "pred_mean"),
    "bounds": (ex.run_bound_table, "bound"),
}


def _parser():
    ap = argparse.ArgumentParser(prog="plskrylov", description="PLS residual-polynomial studies")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="key = value config file")
        p.add_argument("--seed", type=int, help="root seed (unsigned 64-bit)")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--k-max", type=int, help="sweep k = 1..K")
        p.add_argument("--sigma", help="comma-separated noise levels")

    for name in ("risk", "predict"):
        p = sub.add_parser(name)
        common(p)
        p.add_argument("--reps", type=int)
        p.add_argument("--workers", type=int, default=1)
    common(sub.add_parser("bounds"))
    p = sub.add_parser("respath")
    common(p)
    p.add_argument("--directions", default="first,last",
                   help="comma-separated 0-based eigen-indices; 'first'/'last' allowed")
    p = sub.add_parser("verify")
    p.add_argument("--n", type=int, default=10, help="instance size (rank)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=1)
    p.add_argument("--out", metavar="DIR")
    return ap


def _config(args) -> ex.ExperimentConfig:
    cfg = ex.load_config(args.config) if args.config else ex.ExperimentConfig()
    over = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ValidationError("--seed must be an unsigned 64-bit integer")
        over["seed"] = args.seed
    if args.out is not None:
        over["output_dir"] = args.out
    if args.k_max is not None:
        over["k_range"] = tuple(range(1, args.k_max + 1))
    if args.sigma is not None:
        over["noise_levels"] = ex._floats(args.sigma)
    if getattr(args, "reps", None) is not None:
        over["reps"] = args.reps
    return dataclasses.replace(cfg, **over) if over else cfg


def _directions(text, rank):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        out.append(0 if tok == "first" else rank - 1 if tok == "last" else int(tok))
    return out


def _verify(args) -> int:
    lines = []
    worst = 0.0
    for j in range(args.instances):
        X, Y = ex.random_instance(args.n, (args.seed, j))
        rep = ex.route_disagreement(X, Y)
        worst = max(worst, rep["max_scaled_gap"])
        lines.append(
            f"instance {j}: rank={rep['rank']} max_route_disagreement={rep['max_abs_gap']:.3e} "
            f"(scaled {rep['max_scaled_gap']:.3e}) orthogonality={rep['max_orthogonality_defect']:.3e} "
            f"weight_sum_error={rep['max_weight_sum_error']:.3e}")
    lines.append(f"{'PASS' if worst <= 1.0 else 'FAIL'}: worst scaled disagreement {worst:.3e}")
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "verify.txt"), "w") as fh:
            fh.write(report)
    return 0 if worst <= 1.0 else 2


def _run(args) -> int:
    if args.command == "verify":
        return _verify(args)
    cfg = _config(args)
    out = cfg.output_dir or "results"
    if args.command == "respath":
        _, _, decomp = ex._setup(cfg)
        record = ex.run_residual_path(cfg, _directions(args.directions, decomp.rank))
        qcols = [c for c in record.columns if c.startswith("Q_")]
        path = ex.write_outputs(record, out, y=qcols, group=None, yscale="linear")
    else:
        fn, y = _STUDIES[args.command]
        record = fn(cfg, workers=args.workers) if args.command in ("risk", "predict") else fn(cfg)
        path = ex.write_outputs(record, out, y=y)
    print(f"wrote {path} (config {record.config_hash})")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
