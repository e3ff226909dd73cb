"""Command line entry point: ``bpvec run | list-experiments | validate``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .experiments import (DEFAULT_SCENARIO, SpecError, _raw_scenario, load_spec, resolve_spec,
                          run_experiment, shipped_specs, write_outputs)
from .scenario import ScenarioError, scenario_from_dict

log = logging.getLogger("bpvec")


def _cmd_run(args) -> int:
    spec = resolve_spec(args.spec)
    raw = _raw_scenario(args.scenario)
    seed = spec.seed if args.seed is None else args.seed
    traces = [] if args.traces else None
    table = run_experiment(spec, raw, seed=seed, workers=args.workers, traces=args.traces,
                           trace_sink=traces)
    paths = write_outputs(table, spec, raw, args.out, seed, traces)
    for kind, p in paths.items():
        print(f"{kind}: {p}")
    return 0


def _cmd_list(args) -> int:
    for name, path in shipped_specs().items():
        desc = (yaml.safe_load(path.read_text()) or {}).get("description", "")
        print(f"{name:12s} {desc}")
    return 0


def _cmd_validate(args) -> int:
    p = Path(args.file)
    raw = yaml.safe_load(p.read_text()) if p.exists() else None
    if isinstance(raw, dict) and "sweep_variable" in raw:
        spec = load_spec(p)
        spec.validate(scenario_from_dict(_raw_scenario(args.scenario)))
        print(f"ok: experiment {spec.name}")
    elif p.exists():
        cfg = scenario_from_dict(raw or {})
        print(f"ok: scenario with {len(cfg.rvs)} RVs, {len(cfg.pvs)} PVs, {len(cfg.rsus)} RSUs")
    else:
        spec = resolve_spec(args.file)
        spec.validate(scenario_from_dict(_raw_scenario(args.scenario)))
        print(f"ok: experiment {spec.name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bpvec", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run an experiment spec (file path or shipped name)")
    r.add_argument("spec")
    r.add_argument("--scenario", default=str(DEFAULT_SCENARIO))
    r.add_argument("--out", default="results")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--traces", action="store_true", help="also write consensus event traces (JSON lines)")
    r.set_defaults(func=_cmd_run)

    ls = sub.add_parser("list-experiments", help="list shipped experiment specs")
    ls.set_defaults(func=_cmd_list)

    v = sub.add_parser("validate", help="validate a scenario file or an experiment spec")
    v.add_argument("file")
    v.add_argument("--scenario", default=str(DEFAULT_SCENARIO),
                   help="scenario used to check spec counts against the entity pools")
    v.set_defaults(func=_cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (SpecError, ScenarioError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
