"""Command-line front end: ``vwlab run|list-scenarios|compare|classify``."""

from __future__ import annotations

import argparse
import json
import sys

from .harness import EXIT_CONFIG_ERROR, EXIT_IO_ERROR, compare_runs, run_scenario
from .scenarios import CATALOG, SCENARIO_SCHEMA, ConfigError


def _cmd_run(args) -> int:
    try:
        res = run_scenario(args.config, args.set, args.output_root)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR
    h = res.manifest["headline"]
    print(f"{res.directory}: {res.classification} ({res.manifest['reason']}); "
          f"sup|m| = {h['final_sup_residual']:.3e}, D = {h['final_functional']:.6e}, "
          f"steps = {h['accepted_steps']}")
    return res.exit_code


def _cmd_list(args) -> int:
    for name, cfg in CATALOG.items():
        t = cfg["torus"]
        print(f"{name:32s} n={t['complex_dim']} N={t['sites_per_side']:<3d} "
              f"expect={cfg['expected']:10s} {cfg['description']}")
    return 0


def _cmd_compare(args) -> int:
    try:
        rep = compare_runs(args.dir_a, args.dir_b, args.overlay)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    print(json.dumps(rep, indent=2))
    return 0 if rep["verdict"] == "same" else 1


def _cmd_classify(args) -> int:
    from jsonschema import ValidationError

    from .stability import classify_catalog

    try:
        certs = classify_catalog(args.catalog)
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    print(json.dumps(certs, indent=2))
    return 0


def _cmd_schema(args) -> int:
    print(json.dumps(SCENARIO_SCHEMA, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vwlab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario (catalog name or JSON config path)")
    r.add_argument("config")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. torus.sites_per_side=32")
    r.add_argument("--output-root", default=None,
                   help="parent directory for run directories (default: $VWLAB_OUTPUT_ROOT or ./runs)")
    r.set_defaults(func=_cmd_run)
    sub.add_parser("list-scenarios", help="list the built-in catalog").set_defaults(func=_cmd_list)
    c = sub.add_parser("compare", help="compare two run directories")
    c.add_argument("dir_a")
    c.add_argument("dir_b")
    c.add_argument("--overlay", default=None, help="path of the trace overlay CSV")
    c.set_defaults(func=_cmd_compare)
    k = sub.add_parser("classify", help="classify a JSON catalog of pair cases")
    k.add_argument("catalog")
    k.set_defaults(func=_cmd_classify)
    sub.add_parser("schema", help="print the scenario JSON schema").set_defaults(func=_cmd_schema)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
