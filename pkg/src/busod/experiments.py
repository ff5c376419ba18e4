"""Helpers for scripted experiments: simulate, run under a policy, score."""

from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path

from busod.config import config_from_dict
from busod.pipeline import PipelineResult, run_eval, run_pipeline
from busod.simulator import Scenario, ScenarioConfig, generate


@dataclass
class Trial:
    name: str
    policy: str
    repair: str
    result: PipelineResult
    report: dict

    def exits(self, door: str) -> int:
        return self.result.door_counts[door].exits

    def entries(self, door: str) -> int:
        return self.result.door_counts[door].entries


def run_trial(
    scenario: Scenario | ScenarioConfig,
    policy: str = "baseline",
    repair: str = "none",
    workdir: str | Path | None = None,
) -> Trial:
    """Write the scenario, run the pipeline with one policy and evaluate it."""
    scn = scenario if isinstance(scenario, Scenario) else generate(scenario)
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(workdir) if workdir is not None else Path(tmp)
        data = root / "scenario"
        scn.write(data)
        raw = scn.pipeline_config(counting={"policy": policy}, tracker={"repair_policy": repair})
        cfg = config_from_dict(raw, data)
        out = root / f"run_{policy}_{repair}"
        res = run_pipeline(cfg, out)
        report = run_eval(out, data / "truth.json", out / "eval")
    return Trial(scn.config.name, policy, repair, res, report)
