"""Command-line entry point: ``idledqn <subcommand> --config <path>``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .harness import (ConfigError, ExperimentSpec, build_instance, constants_report,
                      format_summary, load_config, run_experiment, write_outputs)
from .topology import spectral_diagnostics, write_edge_list

SUBCOMMANDS = {
    "run": "single_run",
    "compare": "compare_schedules",
    "histogram": "histogram",
    "sweep": "alpha_sweep",
}


def _spec(args) -> ExperimentSpec:
    spec = load_config(args.config) if args.config else ExperimentSpec().validate()
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    if args.out is not None:
        spec = dataclasses.replace(spec, output_dir=args.out)
    return spec


def _generate(spec: ExperimentSpec) -> list[Path]:
    inst = build_instance(spec)
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    prob = out / "problem.json"
    inst.problem.save(prob)
    edges = out / "graph_edges.txt"
    write_edge_list(inst.graph, edges)
    info = out / "graph.json"
    diag = spectral_diagnostics(inst.graph)
    info.write_text(json.dumps({**inst.graph.summary(), "coords": inst.graph.coords.tolist(),
                                "lambda_1": diag["lambda_1"],
                                "second_modulus": diag["second_modulus"]}, indent=1))
    return [prob, edges, info]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="idledqn",
                                 description="Distributed quasi-Newton with node idling: simulator and experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {"generate": "write problem and graph instance files",
             "constants": "print the theory-constants report",
             "run": "single trace", "compare": "compare activation schedules",
             "histogram": "cost-to-target over sample paths", "sweep": "alpha sweep"}
    for name, h in helps.items():
        p = sub.add_parser(name, help=h)
        p.add_argument("--config", help="JSON config path or bundled config name (e.g. fig1a)")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--out", help="output directory (overrides config)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = _spec(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "generate":
            paths = _generate(spec)
        elif args.command == "constants":
            text = constants_report(spec)
            sys.stdout.write(text)
            if args.out is not None:
                Path(args.out).mkdir(parents=True, exist_ok=True)
                (Path(args.out) / "constants.txt").write_text(text)
            return 0
        else:
            result = run_experiment(spec, SUBCOMMANDS[args.command])
            paths = write_outputs(result)
            sys.stdout.write(format_summary(result))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure: report and exit 2
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for p in paths:
        print(f"wrote {p}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
