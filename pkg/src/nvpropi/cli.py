"""Command-line entry point: ``nvpropi run|validate|figure``.

Exit codes: 0 success, 2 configuration error, 3 physics-run failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigurationError, NvPropiError
from .figures import FIGURES, figure_config
from .sweep import ConfigErrors, SweepConfig, normalize_config, run_sweep, validate_config, write_csv, write_manifest

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nvpropi", description="NV/13C polarization sweeps with PROPI readout")
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_run_flags(p):
        p.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
        p.add_argument("--seed-override", type=int, default=None, metavar="SEED",
                       help="replace the bath seed list by this single seed")
        p.add_argument("--ideal", action="store_true",
                       help="ideal NV reset and charge state, no amplitude jitter")
        p.add_argument("--dump-states", default=None, metavar="DIR",
                       help="write the final density matrix of every task to DIR")
        p.add_argument("--output", default=None, help="CSV path (overrides output_path)")

    p_run = sub.add_parser("run", help="run the sweep described by a JSON experiment file")
    p_run.add_argument("config")
    add_run_flags(p_run)

    p_val = sub.add_parser("validate", help="validate an experiment file and echo derived quantities")
    p_val.add_argument("config")

    p_fig = sub.add_parser("figure", help="run a desk-scale figure preset")
    p_fig.add_argument("name", choices=sorted(FIGURES))
    p_fig.add_argument("--print-config", action="store_true", help="print the preset and exit")
    add_run_flags(p_fig)
    return parser


def _apply_flags(doc: dict, args) -> dict:
    doc = dict(doc)
    if args.seed_override is not None:
        doc["seeds"] = [args.seed_override]
    if args.ideal:
        doc["imperfections"] = {**doc.get("imperfections", {}), "ideal": True, "jitter": 0.0}
    if args.output is not None:
        doc["output_path"] = args.output
    return doc


def _execute(doc: dict, args) -> int:
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = SweepConfig(**normalize_config(_apply_flags(doc, args)))
    except ConfigErrors as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_sweep(cfg, threads=args.threads, dump_dir=args.dump_states)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NvPropiError as exc:
        print(f"physics failure: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    out = Path(cfg.output_path)
    write_csv(result, out)
    write_manifest(result, out.with_name(out.stem + ".manifest.json"),
                   {"cli": {"threads": args.threads, "seed_override": args.seed_override,
                            "ideal": args.ideal, "dump_states": args.dump_states}})
    for failure in result.failures:
        print(f"warning: point {failure['point_index']} seed {failure['seed']}: {failure['error']}", file=sys.stderr)
    print(f"wrote {out} ({len(result.rows)} points, {result.wall_time:.1f} s)")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.verb == "validate":
        try:
            echo = validate_config(args.config)
        except ConfigErrors as exc:
            for err in exc.errors:
                print(f"config error: {err}", file=sys.stderr)
            return EXIT_CONFIG
        print(json.dumps(echo, indent=2))
        return EXIT_OK
    if args.verb == "run":
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: /: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if not isinstance(doc, dict):
            print("config error: /: top level must be an object", file=sys.stderr)
            return EXIT_CONFIG
        return _execute(doc, args)
    doc = figure_config(args.name)
    if args.print_config:
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    return _execute(doc, args)


if __name__ == "__main__":
    sys.exit(main())
