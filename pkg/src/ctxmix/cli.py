"""Command-line entry point: ``ctxmix {models,solve,anneal,grand,verify}``.

Reports go to ``--out`` (or stdout) as JSON, or as CSV tables with
``--format csv``. When ``--out`` is given, figures and the CSV side tables
are written next to it using the same file stem.

Exit codes: 0 success, 1 validation or I/O error, 2 numerical failure,
3 a verify check failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import runs, verify
from .config import ExperimentConfig
from .errors import NumericalError, ValidationError

log = logging.getLogger("ctxmix")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3
COMMANDS = {
    "models": runs.models_command,
    "solve": runs.solve_command,
    "anneal": runs.anneal_command,
    "grand": runs.grand_command,
}


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(report: dict) -> str:
    # float repr is the shortest string that round-trips, so values are lossless
    return json.dumps(report, indent=2, default=_json_default) + "\n"


def rows_to_csv(rows: list[dict], columns: list[str] | None = None) -> str:
    buf = io.StringIO()
    columns = columns or (list(rows[0]) if rows else [])
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v
                         for k, v in row.items()})
    return buf.getvalue()


TRAJECTORY_COLUMNS = ["t", "s", "success_probability", "energy_expectation"]
SCALING_COLUMNS = ["dt", "trace_distance", "ratio_vs_prev"]


def primary_table(command: str, report: dict, extras: dict) -> tuple[list[dict], list[str]]:
    """The table written by ``--format csv`` for each command."""
    if command == "anneal":
        return extras.get("trajectory", []), TRAJECTORY_COLUMNS
    if command == "grand":
        return report["scaling"], SCALING_COLUMNS
    if command == "models":
        symbols = report["models"]["symbols"]
        probs = report["models"]["probs"]
        rows = []
        for k, sym in enumerate(symbols):
            row = {"symbol": sym, "target": report["target"]["probs"][k]}
            row.update({f"model_{i}": p[k] for i, p in enumerate(probs)})
            rows.append(row)
        return rows, ["symbol", "target"] + [f"model_{i}" for i in range(len(probs))]
    symbols = report["instance"]["symbols"]
    rows = [{"symbol": s, "target": t, "mixture": m}
            for s, t, m in zip(symbols, report["instance"]["target"], report["at_solution"]["mixture"])]
    return rows, ["symbol", "target", "mixture"]


def _side_path(out: Path, suffix: str) -> Path:
    return out.with_name(f"{out.stem}_{suffix}")


def write_figures(command: str, report: dict, extras: dict, out: Path) -> list[Path]:
    from . import plotting

    written = []
    if command in ("solve", "anneal"):
        inst = report["instance"]
        written.append(plotting.mixture_bars(inst["symbols"], inst["target"],
                                             report["at_solution"]["mixture"], inst["probs"],
                                             _side_path(out, "mixture.png")))
    if command == "anneal" and extras.get("trajectory"):
        written.append(plotting.anneal_trajectory(extras["trajectory"], extras.get("gaps"),
                                                  _side_path(out, "trajectory.png")))
    if command == "grand":
        written.append(plotting.resupply_scaling(report["scaling"], _side_path(out, "scaling.png")))
    return written


def write_side_tables(command: str, report: dict, extras: dict, out: Path) -> list[Path]:
    written = []
    if command == "anneal" and extras.get("trajectory"):
        path = _side_path(out, "trajectory.csv")
        path.write_text(rows_to_csv(extras["trajectory"], TRAJECTORY_COLUMNS))
        written.append(path)
    if command == "grand":
        path = _side_path(out, "scaling.csv")
        path.write_text(rows_to_csv(report["scaling"], SCALING_COLUMNS))
        written.append(path)
    return written


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    log.info("wrote %s", out)


def _load_config(args) -> ExperimentConfig:
    if args.config is None:
        raw: dict = {}
        base = Path(".")
    else:
        path = Path(args.config)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise FileNotFoundError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path} is not valid JSON: {exc}") from None
        base = path.parent
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.command == "solve" and "solver" not in raw:
        raw["solver"] = "brute"
    return ExperimentConfig.from_dict(raw, base)


def run_experiment(args) -> int:
    cfg = _load_config(args)
    out = args.out if args.out is not None else cfg.raw.get("out")
    out = None if out is None else Path(out)
    report, extras = COMMANDS[args.command](cfg)
    if args.timing and "seconds" in extras:
        report["timing"] = {"seconds": extras["seconds"]}
    if args.format == "csv":
        rows, columns = primary_table(args.command, report, extras)
        _emit(rows_to_csv(rows, columns), out)
    else:
        _emit(dumps(report), out)
    if out is not None:
        if args.format == "json":
            write_side_tables(args.command, report, extras, out)
        if not args.no_figures:
            write_figures(args.command, report, extras, out)
    return EXIT_OK


def run_verify(args) -> int:
    results = verify.run_checks()
    text = verify.summary(results) + "\n"
    if args.format == "csv":
        text = rows_to_csv([{"check": r.name, "passed": r.passed, "value": r.value} for r in results])
    _emit(text, None if args.out is None else Path(args.out))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctxmix", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "models": "estimate context models and the target from a corpus",
        "solve": "classical grid solvers (brute, brute_penalized, sa)",
        "anneal": "simulated annealing of the penalized grid Hamiltonian",
        "grand": "partial-trace identity and resupply error scaling",
        "verify": "built-in identity and golden checks",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", metavar="PATH", help="JSON experiment config")
        p.add_argument("--out", metavar="PATH", help="report path (default: stdout)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        if name != "verify":
            p.add_argument("--timing", action="store_true", help="add wall-clock seconds to the report")
            p.add_argument("--no-figures", action="store_true", help="skip the figures written next to --out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            return run_verify(args)
        return run_experiment(args)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
