"""Cost savings of idling over always-on DQN across master seeds.

For each seed, runs a compare config and reports the per-node cost each
schedule needs to reach ``(1 + saturation_tol)`` times the always-on
limiting error, and the ratio idling / always-on.

    python scripts/seed_study.py --config fig1a --seeds 10
"""

import argparse
import dataclasses

import numpy as np

from idledqn.harness import load_config, run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description="idling vs always-on savings over seeds")
    ap.add_argument("--config", default="fig1a")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--tol", type=float, default=None, help="override saturation_tol")
    args = ap.parse_args(argv)

    base = load_config(args.config)
    if args.tol is not None:
        base = dataclasses.replace(base, saturation_tol=args.tol)
    ratios = []
    print("seed  limiting_error  threshold  " + "  ".join(f"{s.kind:>18}" for s in base.schedules))
    for seed in range(args.seeds):
        rows = run_experiment(dataclasses.replace(base, seed=seed)).summary["traces"]
        on = rows[0]
        costs = [r["cost_to_threshold"] for r in rows]
        ratios.append([c / on["cost_to_threshold"] for c in costs[1:]])
        print(f"{seed:4d}  {on['limiting_error']:14.5f}  {on['threshold']:9.5f}  "
              + "  ".join(f"{c:18.2f}" for c in costs))
    med = np.median(np.array(ratios), axis=0)
    for s, r in zip(base.schedules[1:], med):
        print(f"median cost ratio {s.kind} / always_on = {r:.3f} (savings {100 * (1 - r):.1f}%)")


if __name__ == "__main__":
    main()
