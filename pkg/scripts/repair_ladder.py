"""Identity metrics of the four repair policies on the crowded scenario."""

from __future__ import annotations

import argparse

from _common import save, table

from busod import scenarios
from busod.experiments import run_trial
from busod.simulator import generate

REPAIRS = ["none", "ema", "door", "door_traj"]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--policy", default="baseline")
    ap.add_argument("--out", default="results/repair_ladder.json")
    args = ap.parse_args()

    rows = []
    for seed in args.seeds:
        scn = generate(scenarios.crowded(seed))
        for repair in REPAIRS:
            t = run_trial(scn, args.policy, repair)
            mot = t.report["mot"]
            rows.append({
                "seed": seed, "repair": repair, "id_switches": mot["id_switches"],
                "fragmentation": mot["fragmentation"], "idf1": mot["idf1"],
                "event_recall": t.report["events"]["recall"],
            })
    print(table(rows, ["seed", "repair", "id_switches", "fragmentation", "idf1", "event_recall"]))
    save(rows, args.out)


if __name__ == "__main__":
    main()
