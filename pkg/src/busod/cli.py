"""Command line entry point: ``simulate``, ``run``, ``eval`` and ``all``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import yaml

from busod.config import config_from_dict
from busod.counting import CountingPolicy
from busod.errors import ConfigError, PipelineError
from busod.pipeline import run_eval, run_pipeline
from busod.scenarios import PRESETS, preset
from busod.simulator import ScenarioConfig, generate, scenario_from_dict
from busod.tracking import RepairPolicy

log = logging.getLogger("busod")


def _load_yaml(path: Path) -> dict:
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping")
    return data


def _scenario(args) -> ScenarioConfig:
    if args.config:
        cfg = scenario_from_dict(_load_yaml(Path(args.config)))
    else:
        cfg = preset(args.scenario)
    return cfg.with_seed(args.seed) if args.seed is not None else cfg


def _with_overrides(raw: dict, policy: str | None, repair: str | None) -> dict:
    raw = dict(raw)
    if policy:
        raw["counting"] = {**(raw.get("counting") or {}), "policy": policy}
        raw["cameras"] = {k: {**v, "policy": None} for k, v in (raw.get("cameras") or {}).items()}
    if repair:
        raw["tracker"] = {**(raw.get("tracker") or {}), "repair_policy": repair}
        raw["cameras"] = {k: {**v, "repair": None} for k, v in (raw.get("cameras") or {}).items()}
    return raw


def _run(config_path: Path, policy, repair, out: Path | None):
    raw = _with_overrides(_load_yaml(config_path), policy, repair)
    cfg = config_from_dict(raw, config_path.parent)
    res = run_pipeline(cfg, out)
    log.info("OD matrix: %d journeys over %d stops", res.od.total, len(res.od.stops))
    return res


def cmd_simulate(args) -> int:
    scn = generate(_scenario(args))
    scn.write(args.out)
    log.info("wrote scenario %s to %s", scn.config.name, args.out)
    return 0


def cmd_run(args) -> int:
    res = _run(Path(args.config), args.policy, args.repair, Path(args.out) if args.out else None)
    sys.stdout.write(res.od.to_csv())
    return 0


def cmd_eval(args) -> int:
    out = Path(args.out) if args.out else Path(args.pred) / "eval"
    run_eval(args.pred, args.truth, out)
    sys.stdout.write((out / "report.txt").read_text())
    return 0


def cmd_all(args) -> int:
    out = Path(args.out)
    scn = generate(_scenario(args))
    scn.write(out / "scenario")
    _run(out / "scenario" / "pipeline.yaml", args.policy, args.repair, out / "run")
    run_eval(out / "run", out / "scenario" / "truth.json", out / "eval")
    sys.stdout.write((out / "eval" / "report.txt").read_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="busod", description="Two-camera bus passenger OD pipeline")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    policies = [x.value for x in CountingPolicy]
    repairs = [x.value for x in RepairPolicy]

    def scenario_args(sp):
        sp.add_argument("--config", help="scenario YAML (defaults to a named preset)")
        sp.add_argument("--scenario", default="clean", choices=sorted(PRESETS))
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("simulate", help="generate a synthetic scenario")
    scenario_args(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("run", help="run the pipeline on a config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--policy", choices=policies)
    sp.add_argument("--repair", choices=repairs)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("eval", help="score pipeline outputs against ground truth")
    sp.add_argument("--pred", required=True, help="pipeline output directory")
    sp.add_argument("--truth", required=True, help="truth.json from the simulator")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("all", help="simulate, run and evaluate in one go")
    scenario_args(sp)
    sp.add_argument("--policy", choices=policies)
    sp.add_argument("--repair", choices=repairs)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_all)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
