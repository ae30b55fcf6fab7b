"""Command line: ``qgeom run <scenario> [--jobs N] [--out DIR] [--tolerance key=value ...]`` and ``qgeom list-tasks``.

Exit codes: 0 all tasks ok, 1 at least one task failed, 2 configuration error.
The output directory defaults to $QGEOM_OUT, else ./qgeom_out.
"""
from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigParseError, UnknownTask
from .runner import OUT_ENV_VAR, list_tasks, run

EXIT_OK, EXIT_TASK_FAILURE, EXIT_CONFIG = 0, 1, 2


def _tolerance(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance value for {key!r} is not a number: {value!r}") from None


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qgeom", description="Quantum-geometric adiabatic response cross-checks.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("scenario", help="scenario JSON file")
    r.add_argument("--jobs", type=int, default=1, help="run up to N tasks concurrently (output order is fixed)")
    r.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV_VAR} or ./qgeom_out)")
    r.add_argument("--tolerance", type=_tolerance, action="append", default=[], metavar="KEY=VALUE",
                   help="override a check tolerance (repeatable)")
    lt = sub.add_parser("list-tasks", help="print the task catalog")
    lt.add_argument("--json", action="store_true", help="machine-readable catalog")
    return p


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:  # argparse usage errors are configuration errors
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command == "list-tasks":
        cat = list_tasks()
        if args.json:
            print(json.dumps(cat, indent=2, sort_keys=True))
        else:
            for t in cat:
                print(f"{t['name']}: {t['doc']}")
                for k, d in t["params"].items():
                    default = "required" if d["required"] else f"default {json.dumps(d['default'])}"
                    print(f"    {k} ({default}): {d['doc']}")
        return EXIT_OK
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run(args.scenario, args.out, args.jobs, dict(args.tolerance))
    except (ConfigParseError, UnknownTask) as exc:
        print(f"config error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for t in manifest.tasks:
        tail = "" if t["status"] == "ok" else f" [{t['error_code']}] {t['message']}"
        print(f"{t['id']}: {t['status']}{tail}")
    print(f"outputs in {manifest.out_dir}")
    return EXIT_OK if manifest.ok else EXIT_TASK_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
