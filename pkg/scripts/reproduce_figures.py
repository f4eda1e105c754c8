"""Run the bundled figure configs, write their outputs, and check them
against the shipped expected summaries.

    python scripts/reproduce_figures.py                 # all configs
    python scripts/reproduce_figures.py fig1a fig3b     # a subset
    python scripts/reproduce_figures.py --update-expected
"""

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from idledqn.harness import (DEFAULT_TOLERANCES, compare_metrics, expected_path, format_summary, load_config,
                             run_experiment, summary_metrics, write_outputs)

CONFIGS = ("fig1a", "fig1b", "fig2a", "fig2b", "fig3a", "fig3b", "fig4a", "fig4b", "alpha_sweep")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="reproduce the figure experiments")
    ap.add_argument("configs", nargs="*", default=list(CONFIGS))
    ap.add_argument("--out", default="out", help="root output directory")
    ap.add_argument("--workers", type=int, default=1, help="processes for histogram paths")
    ap.add_argument("--update-expected", action="store_true")
    args = ap.parse_args(argv)

    failures = 0
    for name in args.configs:
        spec = dataclasses.replace(load_config(name), workers=args.workers,
                                   output_dir=str(Path(args.out) / name))
        t0 = time.perf_counter()
        result = run_experiment(spec)
        write_outputs(result)
        metrics = summary_metrics(result)
        print(f"== {name} ({time.perf_counter() - t0:.1f} s)")
        print(format_summary(result).split("\n[constants]")[0])
        path = expected_path(name)
        if args.update_expected:
            path.parent.mkdir(exist_ok=True)
            path.write_text(json.dumps({"config": name, "tolerances": DEFAULT_TOLERANCES,
                                        "metrics": metrics}, indent=2) + "\n")
            print(f"updated {path}")
        elif path.exists():
            want = json.loads(path.read_text())
            bad = compare_metrics(metrics, want["metrics"], want.get("tolerances"))
            failures += bool(bad)
            print("expected summary: " + ("OK" if not bad else "MISMATCH\n  " + "\n  ".join(bad)))
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
