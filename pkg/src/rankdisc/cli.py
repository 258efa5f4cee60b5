"""Command-line interface.

Every subcommand accepts ``--config FILE``: a flat ``key = value`` file whose
keys are long option names (``tau``, ``null-table``, ``null_table`` ...).
Values from the file replace defaults; flags given on the command line win.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .detect import METHODS, DetectionParams, detect
from .discrepancy import sliding_diphoragram
from .errors import DataError, NumericFailure
from .kernels import FAMILIES, KernelSpec
from .lds import sobol_prefix
from .nulldist import DEFAULT_K, Spectrum, null_weights, nystrom_spectrum, quantile
from .transport import vector_ranks
from .harness.data import load_csv
from .harness.experiment import run_experiment
from .harness.report import emit_report
from .harness.simulate import SimulationSpec, mean_shift, simulate, variance_shift

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
QUANTILE_LEVELS = (0.9, 0.95, 0.99)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            key, sep, value = line.partition(":")
        if not sep:
            raise UsageError(f"{path}:{n}: expected key = value")
        out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def _time_column(value: str):
    if value == "auto":
        return "auto"
    if value == "none":
        return None
    try:
        return int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected auto, none or a column index, got {value!r}") from None


def _add_input(p):
    p.add_argument("--input", "-i", required=True, help="observation CSV")
    hdr = p.add_mutually_exclusive_group()
    hdr.add_argument("--header", dest="header", action="store_const", const=True, help="first row is a header")
    hdr.add_argument("--no-header", dest="header", action="store_const", const=False, help="first row is data")
    p.add_argument("--time-column", type=_time_column, default="auto", help="auto, none, or 0-based index of a label column")


def _add_kernel(p):
    p.add_argument("--kernel", choices=FAMILIES, default="star")
    p.add_argument("--beta", type=float, default=1.0)


def _add_null(p):
    p.add_argument("--K", "--terms", dest="K", type=int, default=DEFAULT_K, help="series terms for the null CDF")
    p.add_argument("--alpha", type=float, default=0.5, help="series step upper bound")
    p.add_argument("--m", type=int, default=512, help="Nystrom nodes")
    p.add_argument("--N", type=int, default=50, help="retained eigenvalues")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rankdisc", description="Change-point detection with vector ranks and quadratic discrepancy.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="flat key = value file of option defaults")
        return p

    p = command("detect", "test for change points and estimate their locations")
    _add_input(p)
    p.add_argument("--tau", type=int, required=True, help="window length")
    p.add_argument("--gamma", type=float, default=0.1, help="significance level")
    _add_kernel(p)
    p.add_argument("--method", choices=METHODS, default="diphoragram")
    p.add_argument("--kmax", type=int, default=10, help="largest model size for sma")
    p.add_argument("--n-iter", type=int, default=10, help="multi change-point correction sweeps")
    p.add_argument("--solver", choices=("lapjv", "hungarian"), default="lapjv")
    _add_null(p)
    p.add_argument("--null-table", help="eigenvalue table written by null-table")
    p.add_argument("--report", help="JSON report path (default: stdout)")
    p.add_argument("--diphoragram-out", help="CSV path for the diphoragram")
    p.set_defaults(func=cmd_detect)

    p = command("rank", "write vector ranks of the observations")
    _add_input(p)
    p.add_argument("--solver", choices=("lapjv", "hungarian"), default="lapjv")
    p.add_argument("--output", "-o", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_rank)

    p = command("diphoragram", "write the sliding-window discrepancy series")
    _add_input(p)
    p.add_argument("--tau", type=int, required=True)
    _add_kernel(p)
    p.add_argument("--solver", choices=("lapjv", "hungarian"), default="lapjv")
    p.add_argument("--output", "-o", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_diphoragram)

    p = command("null-table", "tabulate the null spectrum and quantiles")
    p.add_argument("--dim", "-d", type=int, required=True)
    _add_kernel(p)
    _add_null(p)
    p.add_argument("--windows", type=int, default=1, help="number of averaged windows a")
    p.add_argument("--output", "-o", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_null_table)

    p = command("lds", "write Sobol points")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", "-d", type=int, required=True)
    p.add_argument("--output", "-o", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_lds)

    p = command("simulate", "write a synthetic series")
    p.add_argument("--spec", help="JSON simulation spec; overrides the model flags")
    p.add_argument("--model", choices=("mean", "variance"), default="mean")
    p.add_argument("--T", type=int, default=1000)
    p.add_argument("--dim", "-d", type=int, default=5)
    p.add_argument("--theta", type=int, help="change point (none for a null series)")
    p.add_argument("--shift", type=float, default=1.0, help="mean shift, or variance difference")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rep", type=int, default=0, help="replication index")
    p.add_argument("--output", "-o", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_simulate)

    p = command("experiment", "run a replicated grid and write one metrics row per cell")
    p.add_argument("--grid", required=True, help="JSON grid file")
    p.add_argument("--method", choices=METHODS, default="diphoragram")
    p.add_argument("--output", "-o", help="CSV path (default: stdout)")
    p.add_argument("--records", help="optional JSON path for per-run records")
    p.set_defaults(func=cmd_experiment)
    return parser


def _prescan(argv) -> tuple[str | None, str | None]:
    """Subcommand name and ``--config`` value, without a full parse."""
    command = config = None
    it = iter(argv)
    for tok in it:
        if tok == "--config":
            config = next(it, None)
        elif tok.startswith("--config="):
            config = tok.split("=", 1)[1]
        elif command is None and not tok.startswith("-"):
            command = tok
    return command, config


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    command, path = _prescan(argv)
    subs = parser._subparsers._group_actions[0].choices
    if path is None or command not in subs:
        return parser.parse_args(argv)
    sub = subs[command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in read_config(path).items():
        if key not in known or key in ("help", "config"):
            raise UsageError(f"{path}: unknown option {key!r} for {command}")
        action = known[key]
        if isinstance(action, argparse._StoreConstAction):
            value = raw.lower() in ("1", "true", "yes", "on")
        else:
            try:
                value = action.type(raw) if action.type else raw
            except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"{path}: bad value for {key}: {raw!r}") from exc
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"{path}: {key} must be one of {sorted(action.choices)}")
        defaults[key] = value
        action.required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _writer(path):
    if path is None:
        return _Stdout()
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()
        return False


def _fmt(x: float) -> str:
    return repr(float(x))


def _load(args):
    return load_csv(args.input, has_header=args.header, time_column=args.time_column)


def write_null_table(fh, spectrum: Spectrum, windows: int, K: int, alpha: float) -> None:
    spec = spectrum.spec
    fh.write(f"# family={spec.family}\n# beta={spec.beta!r}\n# d={spec.d}\n# m={spectrum.m}\n")
    fh.write(f"# N={spectrum.eigenvalues.size}\n# trace={spectrum.trace!r}\n# windows={windows}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["kind", "key", "value"])
    for k, lam in enumerate(spectrum.eigenvalues, 1):
        w.writerow(["eigenvalue", k, _fmt(lam)])
    weights = null_weights(spectrum, windows)
    for p in QUANTILE_LEVELS:
        w.writerow(["quantile", p, _fmt(quantile(weights, p, K=K, alpha=alpha))])


def read_null_table(path) -> Spectrum:
    """Load the spectrum stored by ``write_null_table``."""
    meta, eig = {}, []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read null table {path}: {exc}") from exc
    rows = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
        elif line.strip():
            rows.append(line)
    for n, row in enumerate(csv.reader(rows[1:]), 2):
        if row and row[0] == "eigenvalue":
            try:
                eig.append(float(row[2]))
            except (IndexError, ValueError) as exc:
                raise DataError(f"{path}: bad eigenvalue row {n}: {row}") from exc
    try:
        spec = KernelSpec(meta["family"], int(meta["d"]), float(meta["beta"]))
        return Spectrum(np.asarray(eig), int(meta["m"]), spec, float(meta["trace"]))
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: malformed null table header ({exc})") from exc


def cmd_detect(args) -> int:
    obs = _load(args)
    params = DetectionParams(
        tau=args.tau, gamma=args.gamma, family=args.kernel, beta=args.beta, K=args.K, alpha=args.alpha,
        N=args.N, m=args.m, n_iter=args.n_iter, k_max=args.kmax, solver=args.solver,
    )
    if args.null_table:
        spectrum = read_null_table(args.null_table)
        if spectrum.spec != params.kernel(obs.d):
            raise UsageError(
                f"null table is for {spectrum.spec.family} kernel, beta={spectrum.spec.beta}, d={spectrum.d}; "
                f"data needs {args.kernel}, beta={args.beta}, d={obs.d}"
            )
        params = replace(params, spectrum=spectrum)
    ranked = vector_ranks(obs.values, solver=args.solver)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = detect(ranked, params, args.method)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    extra = {"input": {"path": str(args.input), "T": obs.T, "d": obs.d}}
    if obs.labels:
        extra["change_point_labels"] = [obs.label(t) for t in report.change_points]
    if args.report:
        emit_report(report, args.report, "json", params=params, extra=extra)
    else:
        from .harness.report import report_document

        json.dump(report_document(report, params, extra), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    if args.diphoragram_out:
        emit_report(sliding_diphoragram(params.kernel(obs.d), ranked, args.tau), args.diphoragram_out, "csv")
    return EXIT_OK


def cmd_rank(args) -> int:
    obs = _load(args)
    ranked = vector_ranks(obs.values, solver=args.solver)
    with _writer(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"y{j + 1}" for j in range(ranked.d)] + ["sigma"])
        for row, s in zip(ranked.Y, ranked.sigma):
            w.writerow([_fmt(v) for v in row] + [int(s)])
    return EXIT_OK


def cmd_diphoragram(args) -> int:
    obs = _load(args)
    if obs.T < args.tau:
        raise DataError(f"need at least tau = {args.tau} observations, got {obs.T}")
    ranked = vector_ranks(obs.values, solver=args.solver)
    diph = sliding_diphoragram(KernelSpec(args.kernel, obs.d, args.beta), ranked, args.tau)
    if args.output:
        emit_report(diph, args.output, "csv")
    else:
        from .harness.report import write_diphoragram

        write_diphoragram(diph, sys.stdout)
    return EXIT_OK


def cmd_null_table(args) -> int:
    spectrum = nystrom_spectrum(KernelSpec(args.kernel, args.dim, args.beta), args.m, args.N)
    with _writer(args.output) as fh:
        write_null_table(fh, spectrum, args.windows, args.K, args.alpha)
    return EXIT_OK


def cmd_lds(args) -> int:
    pts = sobol_prefix(args.n, args.dim)
    with _writer(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in pts:
            w.writerow([_fmt(v) for v in row])
    return EXIT_OK


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc


def cmd_simulate(args) -> int:
    if args.spec:
        spec = SimulationSpec.from_dict(_read_json(args.spec))
    elif args.model == "mean":
        spec = mean_shift(args.T, args.dim, args.theta, args.shift, seed=args.seed)
    else:
        if args.theta is None:
            raise UsageError("--model variance needs --theta")
        spec = variance_shift(args.T, args.dim, args.theta, args.shift, seed=args.seed)
    X = simulate(spec, args.rep)
    with _writer(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(X.shape[1])])
        for row in X:
            w.writerow([_fmt(v) for v in row])
    return EXIT_OK


def grid_from_json(doc) -> list:
    """Cells from ``{"cells": [{"simulation": {...}, "detection": {...}, "method": ...}]}``."""
    cells = doc.get("cells") if isinstance(doc, dict) else doc
    if not isinstance(cells, list) or not cells:
        raise DataError("grid needs a non-empty 'cells' list")
    out = []
    for n, cell in enumerate(cells):
        try:
            sim = SimulationSpec.from_dict(cell["simulation"])
            det = DetectionParams(**cell["detection"])
        except (KeyError, TypeError) as exc:
            raise DataError(f"grid cell {n}: {exc}") from exc
        out.append((sim, det, cell["method"]) if "method" in cell else (sim, det))
    return out


def cmd_experiment(args) -> int:
    grid = grid_from_json(_read_json(args.grid))
    metrics = run_experiment(grid, method=args.method)
    if args.output:
        emit_report(metrics, args.output, "csv")
    else:
        from .harness.report import write_metrics

        write_metrics(metrics, sys.stdout)
    if args.records:
        emit_report(metrics, args.records, "json")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        try:
            args = _apply_config(parser, argv)
        except SystemExit as exc:  # argparse usage errors, --help, --version
            return int(exc.code or 0)
        return args.func(args)
    except UsageError as exc:
        print(f"rankdisc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"rankdisc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericFailure, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"rankdisc: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BrokenPipeError:
        return EXIT_OK
    except (ValueError, OSError) as exc:
        print(f"rankdisc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
