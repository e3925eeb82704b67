#!/usr/bin/env python3
"""Virtual-latency comparison across aggregation transports.

Runs the plain, adaptive, masked, and encrypted pipelines over the seeds in
the config (default: configs/latency.yaml), writes the per-round records, and
prints each method's mean round latency per seed plus the adaptive method's
escalation rate.
"""

import argparse
import sys
from collections import defaultdict
from pathlib import Path

from fedsecsim.baselines import MethodId
from fedsecsim.config import load_config
from fedsecsim.experiment import emit, run_sweep

REPO_ROOT = Path(__file__).resolve().parents[1]

METHODS = [MethodId.VFL, MethodId.OURS, MethodId.SMC_FL, MethodId.HE_FL]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--config",
        default=str(REPO_ROOT / "configs" / "latency.yaml"),
        help="experiment YAML (default: the shipped latency config)",
    )
    parser.add_argument("--out", help="records CSV path (default: taken from the config)")
    args = parser.parse_args(argv)

    cfg = load_config(args.config)
    if args.out:
        cfg = cfg.with_run(output=args.out)

    records = run_sweep(cfg, METHODS)
    emit(records, cfg.run.format, cfg.run.output)

    sums: dict = defaultdict(float)
    counts: dict = defaultdict(int)
    escalated = 0
    adaptive_rounds = 0
    for r in records:
        sums[(r.method, r.seed)] += r.round_latency_ms
        counts[(r.method, r.seed)] += 1
        if r.method == MethodId.OURS.value:
            adaptive_rounds += 1
            escalated += int(r.mode == "full_smc")

    if adaptive_rounds:
        header = f"{'seed':>4}" + "".join(f"{m.value:>10}" for m in METHODS)
        print(header + "   (mean round ms)")
        for seed in cfg.run.seeds:
            row = f"{seed:>4}"
            for m in METHODS:
                row += f"{sums[(m.value, seed)] / counts[(m.value, seed)]:>10.3f}"
            print(row)
        print(f"adaptive escalation rate: {escalated / adaptive_rounds:.1%}")
    print(f"wrote {len(records)} records to {cfg.run.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
