"""Command-line interface: ``rppkit simulate | fit | predict | benchmark``.

Exit codes: 0 success, 1 usage, 2 data or I/O, 3 numerical failure.
Reports go to ``--output`` as JSON; a short table goes to stdout and
diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import secrets
import sys
from typing import Sequence

from . import __version__
from .errors import (
    DegenerateFitError,
    DivergentForecastError,
    HorizonError,
    IllPosedError,
    InvalidParameterError,
    InvalidSequenceError,
    RPPError,
)
from .estimation import FitReport, fit_corpus_mle, fit_corpus_with_prior
from .evaluation import DEFAULT_EPSILON
from .experiment import MODELS, run_benchmark
from .io import DataError, Timer, read_dataset, read_report, write_dataset, write_report, write_truth
from .model import ItemParams, ModelConfig, PriorParams
from .prediction import bayes_point, bayes_variance, mass_gap, mle_point
from .simulation import SimConfig, ThetaSpec, simulate, simulate_corpus

log = logging.getLogger("rppkit")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(RPPError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _dist(text: str) -> tuple:
    """``kind:arg[:arg]``, e.g. ``normal:1:0.25`` or ``fixed:1``."""
    kind, *args = text.split(":")
    try:
        return (kind, *[float(a) for a in args])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad distribution {text!r}") from None


def _model_flags(p):
    p.add_argument("--m", type=int, default=30, help="effective attention count (default 30)")
    p.add_argument("--grad-tol", type=float, default=1e-6)
    p.add_argument("--loglik-rtol", type=float, default=1e-8)
    p.add_argument("--max-outer", type=int, default=200)
    p.add_argument("--max-inner", type=int, default=500)


def _config(args) -> ModelConfig:
    return ModelConfig(m=args.m, grad_tol=args.grad_tol, loglik_rtol=args.loglik_rtol,
                       max_outer=args.max_outer, max_inner=args.max_inner)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rppkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rppkit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a corpus and its ground-truth sidecar")
    p.add_argument("--n-items", type=int, required=True)
    p.add_argument("--window-end", type=float, required=True)
    p.add_argument("--m", type=int, default=30)
    p.add_argument("--alpha", type=float, default=4.0, help="gamma prior shape for the fitness")
    p.add_argument("--beta", type=float, default=4.0, help="gamma prior rate for the fitness")
    p.add_argument("--mu-dist", type=_dist, default=("normal", 1.0, 0.25))
    p.add_argument("--sigma-dist", type=_dist, default=("uniform", 0.5, 1.5))
    p.add_argument("--fixed", type=_floats, metavar="LAMBDA,MU,SIGMA",
                   help="simulate replicas of one parameter set instead of drawing from the prior")
    p.add_argument("--time-unit", default="unit")
    p.add_argument("--seed", type=int)
    p.add_argument("--output", required=True, help="dataset path (JSON Lines)")
    p.add_argument("--truth", help="sidecar path (default: OUTPUT with .truth.json)")

    p = sub.add_parser("fit", help="fit a dataset in the mle or prior regime")
    p.add_argument("--dataset", required=True)
    p.add_argument("--regime", choices=("mle", "prior"), default="prior")
    p.add_argument("--train-window", type=float,
                   help="fit only events up to this time (default: the dataset window)")
    _model_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", required=True)

    p = sub.add_parser("predict", help="forecast counts from a fit report")
    p.add_argument("--dataset", required=True)
    p.add_argument("--fit", required=True, help="report written by 'rppkit fit'")
    p.add_argument("--horizons", type=_floats, required=True,
                   help="comma-separated absolute forecast times, each >= the fit window")
    p.add_argument("--seed", type=int)
    p.add_argument("--output", required=True)

    p = sub.add_parser("benchmark", help="score RPP regimes and baselines on held-out counts")
    p.add_argument("--dataset", required=True)
    p.add_argument("--models", default=",".join(MODELS),
                   help=f"comma-separated subset of {','.join(MODELS)}")
    p.add_argument("--train-window", type=float, required=True)
    p.add_argument("--horizons", type=_ints, default=list(range(1, 11)),
                   help="comma-separated period offsets after the train window (default 1..10)")
    p.add_argument("--period", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--ar-order", type=int, default=3)
    p.add_argument("--item-errors", action="store_true", help="include per-item errors in the report")
    _model_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", required=True)
    return parser


def _echo(args) -> dict:
    """Flags for the report; paths are reduced to file names so reruns elsewhere match."""
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("dataset", "fit", "output", "truth") and v is not None:
            v = os.path.basename(v)
        elif isinstance(v, tuple):
            v = list(v)
        out[k] = v
    return out


def _writable(path):
    d = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(d) or not os.access(d, os.W_OK):
        raise OSError(f"cannot write to {path}")


# ---------------------------------------------------------------- commands


def cmd_simulate(args, timer) -> int:
    _writable(args.output)
    truth_path = args.truth or os.path.splitext(args.output)[0] + ".truth.json"
    _writable(truth_path)
    if args.n_items < 0:
        raise UsageError("--n-items must be >= 0")
    config = ModelConfig(m=args.m)
    if args.fixed is not None:
        if len(args.fixed) != 3:
            raise UsageError("--fixed needs LAMBDA,MU,SIGMA")
        params = ItemParams(*args.fixed)
        seqs = simulate(SimConfig(params, args.m, args.window_end, args.seed, args.n_items,
                                  id_prefix="d"))
        truth = [params] * len(seqs)
        extra = {"mode": "fixed"}
    else:
        prior = PriorParams(args.alpha, args.beta)
        sc = simulate_corpus(prior, ThetaSpec(tuple(args.mu_dist), tuple(args.sigma_dist)),
                             args.n_items, config, args.window_end, seed=args.seed)
        seqs, truth = sc.sequences, sc.truth
        extra = {"mode": "prior", "prior": {"alpha": prior.alpha, "beta": prior.beta}}
    meta = {"seed": args.seed, "m": args.m, "generator": f"rppkit {__version__}"}
    write_dataset(args.output, seqs, args.window_end, args.time_unit, meta)
    write_truth(truth_path, [s.item_id for s in seqs], truth,
                {**extra, "seed": args.seed, "m": args.m, "window_end": args.window_end})
    n_events = sum(s.n for s in seqs)
    print(f"simulated {len(seqs)} items, {n_events} events, window {args.window_end}")
    print(f"dataset: {args.output}\ntruth:   {truth_path}")
    return EXIT_OK


def _training(dataset, train_window):
    if train_window is None:
        return dataset.sequences, None
    if train_window <= 0:
        raise UsageError("--train-window must be > 0")
    short = [s.item_id for s in dataset.sequences if s.window_end < train_window]
    if short:
        raise DataError(f"train window {train_window} exceeds the window of {len(short)} items, "
                        f"e.g. {short[:5]}")
    return [s.truncate(train_window) for s in dataset.sequences], train_window


def cmd_fit(args, timer) -> int:
    _writable(args.output)
    dataset = read_dataset(args.dataset)
    seqs, window = _training(dataset, args.train_window)
    config = _config(args)
    if args.regime == "prior":
        report = fit_corpus_with_prior(seqs, config)
    else:
        if not seqs:
            raise IllPosedError("dataset has no items")
        report = fit_corpus_mle(seqs, config)
    body = {"fit": report.to_dict(), "train_window": window,
            "window_end": {s.item_id: s.window_end for s in seqs}}
    write_report(args.output, "fit", body, tool_version=__version__, seed=args.seed,
                 config=_echo(args), inputs=[args.dataset], timer=timer)
    n_bad = sum(not f.converged for f in report.per_item.values())
    print(f"regime {report.regime}: {len(report.per_item)} items fitted, "
          f"{len(report.skipped)} skipped, {n_bad} not converged")
    if report.prior is not None:
        print(f"prior alpha={report.prior.alpha:.6g} beta={report.prior.beta:.6g} "
              f"mean={report.prior.mean:.6g} variance={report.prior.variance:.6g}")
    print(f"corpus log-likelihood {report.corpus_log_lik:.10g}")
    if not report.converged:
        log.error("corpus-level fit did not converge: %s", report.diagnostics)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_predict(args, timer) -> int:
    _writable(args.output)
    dataset = read_dataset(args.dataset)
    doc = read_report(args.fit, "fit")
    fit = FitReport.from_dict(doc["fit"])
    seqs, _ = _training(dataset, doc.get("train_window"))
    by_id = {s.item_id: s for s in seqs}
    known = set(fit.per_item) | set(fit.skipped)
    missing = sorted(known - by_id.keys())
    extra = sorted(by_id.keys() - known)
    mismatched = sorted(k for k, f in fit.per_item.items() if k in by_id and by_id[k].n != f.n)
    if missing or extra or mismatched:
        raise DataError("fit report does not match dataset: "
                        f"missing from dataset {missing[:10]}, not in fit {extra[:10]}, "
                        f"event count differs {mismatched[:10]}")
    horizons = sorted(set(args.horizons))
    early = [(s.item_id, s.window_end) for s in seqs if horizons and horizons[0] < s.window_end]
    if early:
        raise HorizonError(f"horizon {horizons[0]} precedes the window end of {len(early)} items "
                           f"(e.g. {early[0][0]} ends at {early[0][1]})")
    m = fit.config_echo.m
    items = {}
    n_divergent = 0
    for s in seqs:
        rows = []
        f = fit.per_item.get(s.item_id)
        for t in horizons:
            if f is None:  # skipped in the MLE regime: no events, zero fitness
                rows.append({"horizon": t, "point": 0.0, "point_status": "finite",
                             "variance": None, "variance_status": "n/a"})
                continue
            p = f.params
            Y = float(mass_gap(s.window_end, t, p.mu, p.sigma))
            if fit.prior is None:
                rows.append({"horizon": t, "point": float(mle_point(s.n, p.fitness, Y, m)),
                             "point_status": "finite", "variance": None, "variance_status": "n/a"})
                continue
            a, b = fit.prior.alpha, fit.prior.beta
            point = float(bayes_point(s.n, f.exposure, Y, a, b, m))
            var = float(bayes_variance(s.n, f.exposure, Y, a, b, m))
            row = {"horizon": t, "point": point if math.isfinite(point) else None,
                   "point_status": "finite" if math.isfinite(point) else "divergent",
                   "variance": var if math.isfinite(var) else None,
                   "variance_status": "finite" if math.isfinite(var) else "divergent"}
            n_divergent += row["variance_status"] == "divergent"
            rows.append(row)
        items[s.item_id] = {"n": s.n, "window_end": s.window_end, "forecasts": rows}
    body = {"regime": fit.regime, "horizons": horizons, "items": items,
            "prior": doc["fit"].get("prior"), "n_divergent_variance": n_divergent}
    write_report(args.output, "predict", body, tool_version=__version__, seed=args.seed,
                 config=_echo(args), inputs=[args.dataset, args.fit], timer=timer)
    print(f"{len(items)} items x {len(horizons)} horizons ({fit.regime} regime); "
          f"{n_divergent} forecasts with divergent variance")
    return EXIT_OK


def cmd_benchmark(args, timer) -> int:
    _writable(args.output)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    bad = [m for m in models if m not in MODELS]
    if bad or not models:
        raise UsageError(f"unknown models {bad}; choose from {','.join(MODELS)}")
    if args.epsilon < 0:
        raise UsageError("--epsilon must be >= 0")
    dataset = read_dataset(args.dataset)
    if not dataset.sequences:
        raise DataError("dataset has no items")
    result = run_benchmark(dataset.sequences, args.train_window, args.horizons, models=models,
                           config=_config(args), period=args.period, epsilon=args.epsilon,
                           ar_order=args.ar_order)
    body = {"benchmark": result.to_dict(args.item_errors)}
    if "rpp-prior" in result.fits:
        body["benchmark"]["prior"] = result.fits["rpp-prior"].to_dict()["prior"]
    write_report(args.output, "benchmark", body, tool_version=__version__, seed=args.seed,
                 config=_echo(args), inputs=[args.dataset], timer=timer)
    _table(result, models)
    return EXIT_OK


def _table(result, models):
    head = "h".rjust(4) + "".join(f"{m:>22}" for m in models)
    print(f"MAPE / accuracy (eps={result.reports[models[0]].epsilon}) by horizon")
    print(head)
    for i, h in enumerate(result.horizons):
        cells = []
        for m in models:
            s = result.reports[m].scores[i]
            cells.append(f"{s.mape:10.4f} / {s.accuracy:7.4f}")
        print(f"{h:4d}" + "".join(f"{c:>22}" for c in cells))
    print("mean" + "".join(f"{result.reports[m].mean_mape():10.4f} / "
                           f"{result.reports[m].mean_accuracy():7.4f}".rjust(22) for m in models))
    for w in result.warnings:
        print(f"warning: {w}")


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "predict": cmd_predict,
            "benchmark": cmd_benchmark}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.seed is None:
        args.seed = secrets.randbits(63)
        log.warning("no --seed given; using %d (recorded in the output)", args.seed)
    timer = Timer()
    try:
        return COMMANDS[args.command](args, timer)
    except (UsageError, HorizonError, InvalidParameterError) as exc:
        print(f"rppkit: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, InvalidSequenceError, IllPosedError) as exc:
        print(f"rppkit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"rppkit: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateFitError, DivergentForecastError, FloatingPointError, RPPError) as exc:
        print(f"rppkit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
