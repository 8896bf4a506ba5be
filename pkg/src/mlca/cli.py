"""Command-line interface: fit, select, simulate, plot and summary.

Exit codes: 0 success, 1 bad input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import shlex
import sys
from dataclasses import dataclass
from pathlib import Path

from . import report
from .core import ModelSpec
from .data import load_dataset
from .em import EmControl
from .errors import DataError, EstimationError
from .estimators import fit
from .plot import svg_from_document
from .selection import cell_seed, select_sequential, select_simultaneous, table_to_csv
from .simulate import generate, load_truth, write_csv

log = logging.getLogger("mlca")


def parse_range(text) -> range:
    """``"3"`` or ``"a:b"`` (inclusive) to a range."""
    try:
        if ":" in text:
            a, b = (int(v) for v in text.split(":"))
        else:
            a = b = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or A:B, got {text!r}") from None
    if a < 1 or a > b:
        raise argparse.ArgumentTypeError(f"need 1 <= A <= B, got {text!r}")
    return range(a, b + 1)


def _columns(text):
    return [c for c in text.split(",") if c]


@dataclass(frozen=True)
class RunConfig:
    command: str
    data: Path
    items: tuple
    classes: range
    group: str | None = None
    group_classes: range = range(1, 2)
    covariates: tuple = ()
    group_covariates: tuple = ()
    estimator: str = "two_step"
    sequential: bool = True
    extended: bool = False
    seed: int = 0
    threads: int = 1
    out: Path | None = None
    table: Path | None = None
    init: str = "kmeans"
    max_iter: int = 1000
    tol: float = 1e-9

    def __post_init__(self):
        if self.group_covariates and not self.group:
            raise DataError("--group-covariates needs --group")
        if len(self.group_classes) > 1 or self.group_classes[0] > 1:
            if not self.group:
                raise DataError("--group-classes above 1 needs --group")

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        return cls(
            command=args.command,
            data=Path(args.data),
            items=tuple(args.items),
            classes=args.classes,
            group=args.group,
            group_classes=args.group_classes,
            covariates=tuple(args.covariates),
            group_covariates=tuple(args.group_covariates),
            estimator=args.estimator,
            sequential=not args.simultaneous,
            extended=args.extended,
            seed=args.seed,
            threads=args.threads,
            out=Path(args.out) if args.out else None,
            table=Path(args.table) if getattr(args, "table", None) else None,
            init=args.init,
            max_iter=args.max_iter,
            tol=args.tol,
        )

    @property
    def control(self) -> EmControl:
        return EmControl(max_iter=self.max_iter, tol=self.tol)


def _load(cfg: RunConfig):
    return load_dataset(cfg.data, cfg.items, cfg.group, cfg.covariates, cfg.group_covariates)


def _emit(doc, cfg: RunConfig, stream):
    stream = stream or sys.stdout
    stream.write(report.render_summary(doc))
    if cfg.out:
        cfg.out.write_text(report.dumps(doc))


def cmd_fit(cfg: RunConfig, call: str, stream=None) -> int:
    if len(cfg.classes) != 1 or len(cfg.group_classes) != 1:
        raise DataError("fit needs single class counts; use select for ranges")
    data = _load(cfg)
    spec = ModelSpec(cfg.classes[0], cfg.group_classes[0], cfg.estimator, init_method=cfg.init)
    res = fit(data, spec, cfg.control, cfg.seed)
    _emit(report.fit_to_dict(res, call, cfg.extended), cfg, stream)
    return 0


def cmd_select(cfg: RunConfig, call: str, stream=None) -> int:
    if len(cfg.classes) == 1 and len(cfg.group_classes) == 1:
        return cmd_fit(cfg, call, stream)
    stream = stream or sys.stdout
    data = _load(cfg)
    if cfg.sequential:
        sel = select_sequential(data, cfg.classes, cfg.group_classes, cfg.control, cfg.seed, cfg.init)
    else:
        sel = select_simultaneous(data, cfg.classes, cfg.group_classes, cfg.control, cfg.seed, cfg.threads, cfg.init)
    T, M = sel.winner
    stream.write("MODEL SELECTION (" + ("sequential" if cfg.sequential else "simultaneous") + "):\n\n")
    stream.write(report.render_selection_table(sel.table))
    stream.write(f"\nselected: T = {T}, M = {M}\n")
    if cfg.table:
        cfg.table.write_text(table_to_csv(sel.table))
    measurement_only = not (data.has_low_covariates or data.has_high_covariates)
    if measurement_only and cfg.estimator == "two_step":
        best = sel.best
    else:
        # refit the winner as if it had been specified directly, with the cell's seed
        spec = ModelSpec(T, M, cfg.estimator, init_method=cfg.init)
        best = fit(data, spec, cfg.control, cell_seed(cfg.seed, T, M))
    doc = report.fit_to_dict(best, call, cfg.extended)
    doc["selection"] = {"sequential": cfg.sequential, "winner": [T, M], "table": sel.table}
    doc = json.loads(json.dumps(doc))
    _emit(doc, cfg, stream)
    return 0


def cmd_simulate(args, stream=None) -> int:
    stream = stream or sys.stdout
    truth = load_truth(args.truth)
    sim = generate(truth, args.groups, args.units, args.seed)
    path, side = write_csv(sim, args.out)
    stream.write(f"wrote {sim.dataset.N} rows to {path} (latent classes in {side})\n")
    return 0


def cmd_plot(args, stream=None) -> int:
    stream = stream or sys.stdout
    doc = report.load(args.fit)
    svg = svg_from_document(doc, args.clab, args.horiz)
    Path(args.out).write_text(svg)
    stream.write(f"wrote {args.out}\n")
    return 0


def cmd_summary(args, stream=None) -> int:
    stream = stream or sys.stdout
    stream.write(report.render_summary(report.load(args.fit)))
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mlca", description="Latent class analysis, single-level and multilevel, with covariates.")
    p.add_argument("--verbose", "-v", action="count", default=0, help="-v for progress, -vv for every EM iteration")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name in ("fit", "select"):
        s = sub.add_parser(name, help="estimate one model" if name == "fit" else "choose T and M by BIC")
        s.add_argument("--data", required=True, help="CSV file")
        s.add_argument("--items", required=True, type=_columns, help="comma-separated item columns")
        s.add_argument("--classes", "-T", required=True, type=parse_range, help="N or A:B")
        s.add_argument("--group", help="group id column (enables the multilevel model)")
        s.add_argument("--group-classes", "-M", type=parse_range, default=range(1, 2), help="N or A:B (default 1)")
        s.add_argument("--covariates", type=_columns, default=[], help="comma-separated unit-level covariates")
        s.add_argument("--group-covariates", type=_columns, default=[], help="comma-separated group-level covariates")
        s.add_argument("--estimator", choices=("one_step", "two_step", "two_stage"), default="two_step")
        s.add_argument("--simultaneous", action="store_true", help="fit every (T, M) cell instead of the sequential search")
        s.add_argument("--threads", type=int, default=1, help="workers for simultaneous selection")
        s.add_argument("--extended", action="store_true", help="add posteriors and the covariance matrix to the JSON")
        s.add_argument("--init", choices=("kmeans", "kmodes"), default="kmeans")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--max-iter", type=int, default=1000)
        s.add_argument("--tol", type=float, default=1e-9)
        s.add_argument("--out", help="write the fit as JSON")
        if name == "select":
            s.add_argument("--table", help="write the selection table as CSV")

    s = sub.add_parser("simulate", help="draw a dataset from a truth file")
    s.add_argument("--truth", required=True, help="JSON truth description")
    s.add_argument("--groups", "-J", type=int, default=1)
    s.add_argument("--units", "-n", type=int, required=True, help="units per group")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="CSV path; true classes go to <stem>.latent.csv")

    s = sub.add_parser("plot", help="bar chart of response probabilities")
    s.add_argument("fit", help="fit JSON")
    s.add_argument("--out", required=True, help="SVG path")
    s.add_argument("--clab", nargs="+", help="class labels, one per class")
    s.add_argument("--horiz", action=argparse.BooleanOptionalAction, default=True, help="horizontal item labels")

    s = sub.add_parser("summary", help="re-render the summary of a fit JSON")
    s.add_argument("fit")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    call = "mlca " + shlex.join(argv)
    try:
        if args.command in ("fit", "select"):
            cfg = RunConfig.from_args(args)
            return cmd_fit(cfg, call) if args.command == "fit" else cmd_select(cfg, call)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "plot":
            return cmd_plot(args)
        return cmd_summary(args)
    except EstimationError as exc:
        print(f"mlca: estimation failed: {exc}", file=sys.stderr)
        return 2
    except (DataError, ValueError, OSError) as exc:
        print(f"mlca: error: {exc}", file=sys.stderr)
        return 1
