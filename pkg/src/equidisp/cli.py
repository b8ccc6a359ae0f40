"""Command-line interface.

Subcommands: ``fit``, ``compare``, ``simulate``, ``lrt``, ``grid``, ``study``.
Exit codes: 0 success, 1 input or usage error, 2 non-converged fit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from typing import Optional, Sequence

from . import __version__
from .dataio import InputError, read_column, read_pairs, write_pairs
from .equidisp_model import (
    EquiDispParams,
    GridSpec,
    density_grid,
    local_maxima,
    normalize,
    sample,
)
from .estimation import (
    FitReport,
    compare_models,
    fit_bivariate_normal,
    fit_independent_equidisp,
    fit_mle,
    fit_pmle,
)
from .numerics import RandomStream
from .pseudo_model import PseudoParams, pseudo_fit, pseudo_sample
from .study_harness import ESTIMATORS, StudyConfig, run_study, summary_table
from .univariate_equidisp import ueq_lrt

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2

MODELS = {
    "equidisp-mle": fit_mle,
    "equidisp-pmle": fit_pmle,
    "equidisp-indep": fit_independent_equidisp,
    "bvn": lambda s: fit_bivariate_normal(s, independent=False),
    "bvn-indep": lambda s: fit_bivariate_normal(s, independent=True),
    "pseudo": pseudo_fit,
}

log = logging.getLogger("equidisp")


class _Parser(argparse.ArgumentParser):
    # usage errors share exit code 1 with bad input
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _emit_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def _sig6(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _add_columns(p):
    p.add_argument("--x-col", help="column mapped to x (default: first column)")
    p.add_argument("--y-col", help="column mapped to y (default: second column)")


def _add_params(p, required=True, defaults=(None, None, None)):
    for name, d in zip(("alpha", "beta", "gamma"), defaults):
        p.add_argument(f"--{name}", type=float, required=required and d is None, default=d)


def cmd_fit(args) -> int:
    s = read_pairs(args.input, args.x_col, args.y_col)
    rep = MODELS[args.model](s)
    _emit_json(rep.to_dict())
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def _table(reports: list[FitReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "label", "model", "n_params", "loglik", "aic", "converged", "estimates"])
    for i, r in enumerate(reports, 1):
        est = " ".join(f"{k}={_sig6(float(v))}" for k, v in r.estimates.items())
        w.writerow([i, r.label, r.model_name, r.n_params, _sig6(r.log_likelihood),
                    _sig6(r.aic), r.converged, est])
    return buf.getvalue()


def cmd_compare(args) -> int:
    s = read_pairs(args.input, args.x_col, args.y_col)
    reports = compare_models(s)
    if args.format == "table":
        sys.stdout.write(_table(reports))
    else:
        _emit_json([r.to_dict() for r in reports])
    return EXIT_OK if all(r.converged for r in reports) else EXIT_NOT_CONVERGED


def cmd_simulate(args) -> int:
    if args.n < 1:
        raise InputError("--n must be at least 1")
    rng = RandomStream(args.seed, 0)
    if args.pseudo is not None:
        s = pseudo_sample(PseudoParams(*args.pseudo), args.n, rng)
    else:
        if None in (args.alpha, args.beta, args.gamma):
            raise InputError("give --alpha, --beta and --gamma, or --pseudo TAU1 TAU2 TAU3")
        s = sample(normalize(EquiDispParams(args.alpha, args.beta, args.gamma)), args.n, rng)
    try:
        write_pairs(args.out, s)
    except OSError as exc:
        raise InputError(f"cannot write {args.out}: {exc.strerror}") from exc
    return EXIT_OK


def cmd_lrt(args) -> int:
    xs = read_column(args.input, args.col)
    res = ueq_lrt(xs)
    _emit_json({"tau_hat": res.tau_hat, "lambda": res.lam, "log_lambda": res.log_lam, "stat": res.stat,
                "p_value": res.p_value, "n": int(xs.size)})
    return EXIT_OK


def cmd_grid(args) -> int:
    g = GridSpec(args.x_min, args.x_max, args.y_min, args.y_max, args.nx, args.ny)
    grid = density_grid(normalize(EquiDispParams(args.alpha, args.beta, args.gamma)), g)
    if args.report_modes:
        modes = local_maxima(grid)
        _emit_json({"n_modes": len(modes),
                    "modes": [{"x": x, "y": y, "density": d} for x, y, d in modes]})
        return EXIT_OK
    out = sys.stdout
    out.write("x,y,density\n")
    out.writelines(f"{x:.6g},{y:.6g},{d:.6g}\n" for x, y, d in grid.rows())
    return EXIT_OK


def cmd_study(args) -> int:
    truth = EquiDispParams(args.alpha, args.beta, args.gamma)
    reps = 5000 if args.full else args.replicates
    sums = []
    for n in args.n:
        cfg = StudyConfig(truth, n, reps, args.seed, tuple(args.estimators), args.parallel)
        sums.append(run_study(cfg))
        log.info("n=%d done in %.1fs", n, sums[-1].wall_time)
    sys.stdout.write(summary_table(sums, args.format))
    if args.format == "json":
        sys.stdout.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="equidisp", description="Equi-dispersed normal conditionals models.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit one model to a two-column CSV")
    p.add_argument("input")
    p.add_argument("--model", choices=sorted(MODELS), default="equidisp-mle")
    _add_columns(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="fit Models I-IV and rank them by AIC")
    p.add_argument("input")
    p.add_argument("--format", choices=("json", "table"), default="json")
    _add_columns(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="write a simulated x,y CSV")
    _add_params(p, required=False)
    p.add_argument("--pseudo", nargs=3, type=float, metavar=("TAU1", "TAU2", "TAU3"),
                   help="simulate the pseudo model instead")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("lrt", help="test mean == variance on one numeric column")
    p.add_argument("input")
    p.add_argument("--col", help="column name (default: first column)")
    p.set_defaults(func=cmd_lrt)

    p = sub.add_parser("grid", help="emit the joint density on a grid as x,y,density")
    _add_params(p)
    d = GridSpec()
    p.add_argument("--x-min", type=float, default=d.x_min)
    p.add_argument("--x-max", type=float, default=d.x_max)
    p.add_argument("--y-min", type=float, default=d.y_min)
    p.add_argument("--y-max", type=float, default=d.y_max)
    p.add_argument("--nx", type=int, default=d.nx)
    p.add_argument("--ny", type=int, default=d.ny)
    p.add_argument("--report-modes", action="store_true",
                   help="print the grid's local maxima as JSON instead of the grid")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("study", help="Monte-Carlo study of the MLE and PMLE")
    _add_params(p, defaults=(1.0, 4.0, 5.0))
    p.add_argument("--n", type=int, nargs="+", default=[100, 1000])
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--full", action="store_true", help="run 5000 replicates per sample size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--estimators", nargs="+", choices=ESTIMATORS, default=list(ESTIMATORS))
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--parallel", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_study)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, ValueError, ArithmeticError) as exc:
        print(f"equidisp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
