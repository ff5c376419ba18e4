"""Count accuracy of each counting policy across the five stressor scenarios."""

from __future__ import annotations

import argparse

from _common import save, table

from busod import scenarios
from busod.experiments import run_trial
from busod.simulator import generate

POLICIES = ["baseline", "door_state", "queue_aware"]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--repair", default="none")
    ap.add_argument("--out", default="results/stressor_suite.json")
    args = ap.parse_args()

    rows = []
    for seed in args.seeds:
        for cfg in scenarios.stressor_suite(seed):
            scn = generate(cfg)
            for policy in POLICIES:
                t = run_trial(scn, policy, args.repair)
                c = t.report["counts"]
                rows.append({
                    "scenario": cfg.name, "seed": seed, "policy": policy,
                    "entry_acc": c["entry_accuracy"], "exit_acc": c["exit_accuracy"],
                    "total_acc": c["total_accuracy"], "exit_mae": c["exit_mae"],
                    "od_l1": t.report["od"]["l1_error"],
                })
    print(table(rows, ["scenario", "seed", "policy", "entry_acc", "exit_acc", "total_acc", "exit_mae", "od_l1"]))
    save(rows, args.out)


if __name__ == "__main__":
    main()
