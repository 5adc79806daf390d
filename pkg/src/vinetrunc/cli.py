"""Command-line interface.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from . import harness
from .bicop import Family
from .errors import DimensionMismatch, NonNumericInput, NumericalError, VineError
from .fit import fit_mle, fit_nested
from .structure import cvine, dvine
from .vine import Dataset, VineModel, load_model, log_likelihood, sample, save_model, write_csv
from .vuong import vuong_nested, vuong_snn

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("vinetrunc")


def pseudo_obs(x) -> np.ndarray:
    """Column-wise ranks divided by n + 1; ties get average ranks."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise NonNumericInput("need a matrix with at least two rows")
    if not np.all(np.isfinite(x)):
        raise NonNumericInput("raw data contains non-finite values")
    return rankdata(x, axis=0) / (x.shape[0] + 1)


def _read_raw(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise NonNumericInput(f"{path} has no data rows")
    try:
        return np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise NonNumericInput(f"{path}: {exc}") from None


def _families(d: int, trunc: int):
    return [[Family.GAUSSIAN if i <= trunc else Family.INDEPENDENCE] * (d - i) for i in range(1, d)]


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    ds = sample(model, args.n, args.seed)
    write_csv(args.out, ds.values, [f"u{j}" for j in range(1, model.d + 1)])
    return EXIT_OK


def cmd_pseudo_obs(args) -> int:
    raw = _read_raw(args.data)
    write_csv(args.out, pseudo_obs(raw))
    return EXIT_OK


def _structure(args, d):
    if args.structure == "dvine":
        return dvine(d)
    if args.structure == "cvine":
        return cvine(d)
    if not args.model:
        raise argparse.ArgumentTypeError("--structure file requires --model PATH")
    structure = load_model(args.model).structure
    if structure.d != d:
        raise DimensionMismatch(f"structure has dimension {structure.d}, data has {d} columns")
    return structure


def cmd_fit(args) -> int:
    data = Dataset.from_csv(args.data)
    structure = _structure(args, data.d)
    res = fit_mle(structure, _families(structure.d, args.trunc), data)
    if args.out:
        save_model(res.model, args.out)
    print(f"{'tree':>4}  {'edge':<12} {'family':<9} {'rho':>10} {'tau':>8}")
    for (i, _, e), pc in zip(structure.edges(), (pc for t in res.model.pair_copulas for pc in t)):
        rho = "" if pc.rho is None else f"{pc.rho:10.6f}"
        print(f"{i:>4}  {e.label:<12} {pc.family.value:<9} {rho:>10} {pc.tau:8.4f}")
    print(f"loglik {res.loglik:.10g}  converged={res.converged}  iterations={res.iterations}")
    return EXIT_OK


def _refit(model: VineModel, data, smaller=None):
    families = model.families
    if smaller is None:
        return fit_mle(model.structure, families, data)
    return fit_nested(model.structure, families, data, smaller)


def cmd_vuong(args) -> int:
    data = Dataset.from_csv(args.data)
    small, large = load_model(args.small), load_model(args.large)
    if args.refit:
        fs = _refit(small, data)
        small, large = fs.model, _refit(large, data, fs).model
    out = {"n": data.n, "loglik_small": log_likelihood(small, data), "loglik_large": log_likelihood(large, data)}
    if args.test in ("nested", "both"):
        out["nested"] = vuong_nested(small, large, data).to_dict(args.alpha)
    if args.test in ("snn", "both"):
        out["snn"] = vuong_snn(large, small, data).to_dict(args.alpha)
    text = json.dumps(out, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return EXIT_OK


def cmd_experiment(args) -> int:
    configs = harness.load_configs(args.config) if args.config else harness.headline_configs()
    if args.full_grid:
        configs = configs + harness.full_grid_configs(args.full_grid)
    harness.run_batch(configs, args.threads, args.out)
    path = harness.report(args.out)
    print(f"records: {Path(args.out) / harness.RECORDS_FILE}\nsummary: {path}")
    return EXIT_OK


def cmd_report(args) -> int:
    path = harness.report(args.records)
    with open(path) as fh:
        sys.stdout.write(fh.read())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vinetrunc", description="Truncated R-vine copulas and Vuong tests")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="sample pseudo-observations from a model file")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("pseudo-obs", help="rank-transform raw columns to (0, 1)")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_pseudo_obs)

    s = sub.add_parser("fit", help="fit a truncated Gaussian vine")
    s.add_argument("--data", required=True)
    s.add_argument("--structure", choices=["dvine", "cvine", "file"], default="dvine")
    s.add_argument("--model", help="model file providing the structure when --structure file")
    s.add_argument("--trunc", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("vuong", help="compare a smaller and a larger model")
    s.add_argument("--data", required=True)
    s.add_argument("--small", required=True)
    s.add_argument("--large", required=True)
    s.add_argument("--test", choices=["nested", "snn", "both"], default="both")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--refit", action="store_true", help="refit both models on --data first")
    s.add_argument("--out")
    s.set_defaults(func=cmd_vuong)

    threads = int(os.environ.get("VINETRUNC_THREADS", "1"))
    s = sub.add_parser("experiment", help="run simulation scenarios")
    s.add_argument("--config", help="scenario JSON; defaults to the headline cells")
    s.add_argument("--out", required=True)
    s.add_argument("--threads", type=int, default=threads)
    s.add_argument("--full-grid", choices=["3d", "4d"])
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("report", help="recompute summary.csv from records")
    s.add_argument("--records", required=True)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (VineError, argparse.ArgumentTypeError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
