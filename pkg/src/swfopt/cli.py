"""``swfopt`` command line.

Exit codes: 0 success, 1 a check failed under ``--strict``, 2 I/O or
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import __version__, alloc, data, experiment
from .swf import SwfSpec, evaluate

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


class _Usage(Exception):
    pass


def _add_experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--dataset", help=f"path to german.data (fallback: ${experiment.DATASET_ENV})")
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.add_argument("--n-splits", dest="n_splits", type=int)
    p.add_argument("--seed-base", dest="seed_base", type=int)
    p.add_argument("--swf", dest="swfs", action="append", help="SWF spec, repeatable")
    p.add_argument("--lambda2", help="comma-separated welfare weights")
    p.add_argument("--C", dest="C", type=float)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--budget", type=float)
    p.add_argument("--strict", action="store_true", help="exit 1 when a check fails")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swfopt", description="Social welfare optimization toolkit.")
    parser.add_argument("--version", action="version", version=f"swfopt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and encode the dataset, report its facts")
    _add_experiment_args(p)
    p.add_argument("--strict-facts", dest="strict", action="store_true",
                   help="exit 1 when a dataset fact differs from the expected value")
    for name, text in (("table1", "standard logistic regression group report"),
                       ("post", "post-processing loan allocation"),
                       ("inproc", "welfare-regularized training over the lambda2 grid")):
        _add_experiment_args(sub.add_parser(name, help=text))

    p = sub.add_parser("solve", help="solve an allocation problem CSV (id,pHat,request)")
    p.add_argument("problem")
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--swf", default="utilitarian")
    p.add_argument("--out", help="solution CSV (default: stdout)")
    p.add_argument("--oracle", metavar="step=S", help="cross-check against the grid oracle")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict", action="store_true")

    p = sub.add_parser("swf-eval", help="evaluate SWFs on a utility CSV")
    p.add_argument("utilities", help="CSV with a 'utility' column (or a single column)")
    p.add_argument("--swf", action="append", required=True)
    p.add_argument("--umax", help="CSV of best attainable utilities (Kalai-Smorodinsky)")

    p = sub.add_parser("replay", help="rerun a recorded experiment and compare bytes")
    p.add_argument("manifest")
    p.add_argument("--out", dest="output_dir")
    return parser


def _overrides(args) -> dict:
    keys = ("dataset", "output_dir", "n_splits", "seed_base", "swfs", "lambda2", "C",
            "lambda1", "kappa", "max_iter", "budget")
    return {k: getattr(args, k, None) for k in keys}


def _print_checks(result: experiment.RunResult, out) -> None:
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}", file=out)


def _cmd_experiment(args, out) -> int:
    cfg = experiment.load_config(args.config, _overrides(args))
    result = experiment.run_command(args.command, cfg)
    if args.command == "ingest":
        for k, v in result.values["facts"].items():
            print(f"{k}: {v:.4f}" if isinstance(v, float) else f"{k}: {v}", file=out)
    elif args.command == "table1":
        print((Path(cfg.output_dir) / "table1.txt").read_text(), end="", file=out)
    _print_checks(result, out)
    print(f"wrote {len(result.files)} files to {cfg.output_dir}", file=out)
    return EXIT_CHECK_FAILED if args.strict and not result.ok else EXIT_OK


def _parse_oracle(text: str) -> float:
    key, _, value = text.partition("=")
    if key.strip() != "step":
        raise _Usage(f"--oracle expects step=S, got {text!r}")
    try:
        return float(value)
    except ValueError:
        raise _Usage(f"--oracle step must be a number, got {value!r}") from None


def _cmd_solve(args, out) -> int:
    spec = SwfSpec.parse(args.swf)
    ids, problem = alloc.read_problem_csv(args.problem, args.budget)
    sol = alloc.solve(problem, spec, restarts=args.restarts, seed=args.seed)
    header = [f"swfopt {__version__} solve swf={spec} budget={args.budget!r}",
              f"solver={sol.solver} objective={sol.objective!r} converged={sol.converged}"]
    if args.out:
        alloc.write_solution_csv(args.out, ids, sol, header)
    else:
        w = csv.writer(out, lineterminator="\n")
        for line in header:
            out.write(f"# {line}\n")
        w.writerow(["id", "granted", "utility"])
        for i, d, u in zip(ids, sol.granted, sol.utilities):
            w.writerow([i, repr(float(d)), repr(float(u))])
    print(f"objective {sol.objective!r} solver {sol.solver}", file=sys.stderr)
    status = EXIT_OK
    if args.oracle:
        step = _parse_oracle(args.oracle)
        ref = alloc.brute_force_oracle(problem, spec, step)
        gap = ref.objective - sol.objective
        diff = float(np.abs(ref.granted - sol.granted).max())
        print(f"oracle objective {ref.objective!r} gap {gap!r} max_abs_diff {diff!r} "
              f"grid_step {step!r} points {ref.grid_points}", file=sys.stderr)
        if args.strict and gap > 1e-9 * max(1.0, abs(ref.objective)):
            status = EXIT_CHECK_FAILED
    return status


def _read_column(path: str, name: str) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    if not rows:
        raise _Usage(f"{path}: no data")
    head = [h.strip() for h in rows[0]]
    if name in head:
        col, body = head.index(name), rows[1:]
    elif len(head) == 1:
        try:
            float(head[0])
            col, body = 0, rows
        except ValueError:
            col, body = 0, rows[1:]
    else:
        raise _Usage(f"{path}: expected a {name!r} column")
    try:
        return np.array([float(r[col]) for r in body])
    except (ValueError, IndexError):
        raise _Usage(f"{path}: non-numeric {name} value") from None


def _cmd_swf_eval(args, out) -> int:
    u = _read_column(args.utilities, "utility")
    u_max = _read_column(args.umax, "umax") if args.umax else None
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["swf", "value"])
    for text in args.swf:
        spec = SwfSpec.parse(text)
        w.writerow([str(spec), repr(evaluate(spec, u, u_max=u_max))])
    return EXIT_OK


def _cmd_replay(args, out) -> int:
    result, mismatched = experiment.replay(args.manifest, args.output_dir)
    for name in mismatched:
        print(f"MISMATCH {name}", file=out)
    print(f"replayed {result.command}: {len(result.files) - len(mismatched)}/{len(result.files)} "
          "files byte-identical", file=out)
    return EXIT_CHECK_FAILED if mismatched else EXIT_OK


_HANDLERS = {"solve": _cmd_solve, "swf-eval": _cmd_swf_eval, "replay": _cmd_replay}


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    args = build_parser().parse_args(argv)
    handler = _HANDLERS.get(args.command, _cmd_experiment)
    try:
        return handler(args, out)
    except (_Usage, ValueError, KeyError) as exc:  # config, data, SWF and solver errors
        print(f"swfopt: error: {exc}", file=sys.stderr)
    except OSError as exc:
        where = f": {exc.filename}" if getattr(exc, "filename", None) else ""
        print(f"swfopt: error: {exc.strerror or exc}{where}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
