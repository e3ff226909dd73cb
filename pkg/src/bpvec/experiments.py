"""Sweep harness: build instances from a scenario, solve them, emit tidy rows.

A scenario file describes entity *pools*; a sweep cell uses the first
``n_rv``/``n_pv``/``n_rsu`` entities of each pool.  Repetition ``r`` reloads
the file with ``rng_seed = seed + r`` so every field the file leaves out is
redrawn, while explicit values stay put.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import yaml

from . import __version__
from .consensus.costs import consensus_total_energy, pbft_baseline_energy
from .game import (InfeasibleInstance, OffloadInstance, build_instance, optimal_epsilon,
                   rsu_utility, pv_utility, rv_utility, solve_stackelberg)
from .scenario import (BITS_PER_MB, ScenarioConfig, ScenarioError, scenario_from_dict)
from .selection import ConsensusSet, DisconnectedGraphWarning, select_committee

SWEEP_VARIABLES = ("rate_pa", "rate_rsu", "n_rv", "n_pv", "n_rsu", "n_consensus", "price_pa", "price_rsu")
GAME_SCHEMES = ("bpvec", "rsu_and_local", "rsu_only", "pv_only", "local_only")
SELECTION_SCHEMES = ("cds", "random", "capacity_only", "communication_only")
CONSENSUS_SCHEMES = ("hotstuff", "pbft")
ALL_SCHEMES = GAME_SCHEMES + SELECTION_SCHEMES + CONSENSUS_SCHEMES

# RV local execution, used only by the local baselines
LOCAL_FREQ_HZ = 0.8e9
LOCAL_CYCLES_PER_BIT = 24.0

CSV_SCHEMA_VERSION = "1"
CSV_COLUMNS = ("experiment", "scheme", "sweep_variable", "sweep_value", "repetition",
               "metric_name", "metric_value", "status")

SPEC_DIR = Path(__file__).parent / "data" / "experiments"
DEFAULT_SCENARIO = Path(__file__).parent / "data" / "default_scenario.yaml"


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    sweep_variable: str
    sweep_values: tuple
    schemes: tuple[str, ...]
    repetitions: int = 1
    seed: int = 0
    # counts used when not swept
    n_rv: int = 10
    n_pv: int = 10
    n_rsu: int = 3
    n_consensus: int | None = None  # None: committee is the CDS itself
    # prices held fixed when a price is swept (the other one); per price unit
    fixed_price: float = 0.1
    description: str = ""

    def validate(self, cfg: ScenarioConfig | None = None) -> "ExperimentSpec":
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise SpecError(f"sweep_variable must be one of {SWEEP_VARIABLES}")
        if not self.sweep_values:
            raise SpecError("sweep_values must be non-empty")
        diffs = np.diff(np.asarray(self.sweep_values, dtype=float))
        if len(diffs) and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise SpecError("sweep_values must be strictly monotone")
        if self.repetitions < 1:
            raise SpecError("repetitions must be >= 1")
        if not self.schemes:
            raise SpecError("schemes must be non-empty")
        bad = [s for s in self.schemes if s not in ALL_SCHEMES]
        if bad:
            raise SpecError(f"unknown scheme {bad[0]!r}")
        if len(set(self.schemes)) != len(self.schemes):
            raise SpecError("duplicate scheme")
        if self.sweep_variable.startswith("n_") and any(int(v) != v or v < 1 for v in self.sweep_values):
            raise SpecError(f"{self.sweep_variable} values must be positive integers")
        if self.sweep_variable.startswith(("rate_", "price_")) and any(v <= 0 for v in self.sweep_values):
            raise SpecError(f"{self.sweep_variable} values must be > 0")
        if cfg is not None:
            need = {"n_rv": (self.n_rv, len(cfg.rvs)), "n_pv": (self.n_pv, len(cfg.pvs)),
                    "n_rsu": (self.n_rsu, len(cfg.rsus))}
            if self.sweep_variable in need:
                need[self.sweep_variable] = (int(max(self.sweep_values)), need[self.sweep_variable][1])
            for key, (want, have) in need.items():
                if want > have:
                    raise SpecError(f"{key}={want} exceeds the scenario pool of {have}")
            if self.sweep_variable == "n_consensus" and max(self.sweep_values) > self.n_pv:
                raise SpecError("n_consensus exceeds n_pv")
        return self

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["sweep_values"] = list(self.sweep_values)
        d["schemes"] = list(self.schemes)
        return d


def spec_from_dict(raw: dict) -> ExperimentSpec:
    if not isinstance(raw, dict):
        raise SpecError("spec must be a mapping")
    known = set(ExperimentSpec.__dataclass_fields__)
    extra = sorted(set(raw) - known)
    if extra:
        raise SpecError(f"unknown key {extra[0]!r}")
    for req in ("name", "sweep_variable", "sweep_values", "schemes"):
        if req not in raw:
            raise SpecError(f"missing key {req!r}")
    kw = dict(raw)
    kw["sweep_values"] = tuple(raw["sweep_values"])
    kw["schemes"] = tuple(raw["schemes"])
    return ExperimentSpec(**kw).validate()


def load_spec(path: str | Path) -> ExperimentSpec:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise SpecError(f"parse error: {exc}") from exc
    return spec_from_dict(raw)


def shipped_specs() -> dict[str, Path]:
    return {p.stem: p for p in sorted(SPEC_DIR.glob("*.yaml"))}


def resolve_spec(name_or_path: str | Path) -> ExperimentSpec:
    p = Path(name_or_path)
    if p.exists():
        return load_spec(p)
    specs = shipped_specs()
    if str(name_or_path) in specs:
        return load_spec(specs[str(name_or_path)])
    raise SpecError(f"no spec file or shipped experiment named {name_or_path!r}")


# ---------------------------------------------------------------------------
# table
# ---------------------------------------------------------------------------


@dataclass
class ExperimentTable:
    experiment: str
    sweep_variable: str
    rows: list[tuple] = field(default_factory=list)  # in CSV_COLUMNS order

    def cells(self) -> list[tuple]:
        seen = []
        for r in self.rows:
            key = (r[1], r[3], r[4])
            if not seen or seen[-1] != key:
                seen.append(key)
        return seen

    def values(self, scheme: str, metric: str) -> dict[float, list[float]]:
        out: dict[float, list[float]] = {}
        for r in self.rows:
            if r[1] == scheme and r[5] == metric:
                out.setdefault(r[3], []).append(r[6])
        return out

    def mean(self, scheme: str, metric: str) -> list[tuple[float, float]]:
        """(sweep value, mean over repetitions) in sweep order."""
        vals = self.values(scheme, metric)
        return [(v, float(np.mean(x))) for v, x in vals.items()]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(x) for x in r])
        return buf.getvalue()


def _fmt(x: Any) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


# ---------------------------------------------------------------------------
# cell evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    index: int
    scheme: str
    value: float
    repetition: int


def _rsu_committee(rsus) -> ConsensusSet:
    order = sorted(range(len(rsus)), key=lambda j: (-rsus[j].cpu_freq_frj, j))
    ranked = tuple(rsus[j].id for j in order)
    return ConsensusSet(members=tuple(r.id for r in rsus), heads=(), leader=ranked[0], ranking=ranked)


def _local_instance(inst: OffloadInstance) -> OffloadInstance:
    """Reuse the two-sided machinery with the RV's own CPU in place of the PVs."""
    D = inst.rv.task_size_Dqi
    return replace(inst, gamma_pa=D * LOCAL_CYCLES_PER_BIT / LOCAL_FREQ_HZ, rate_to_pv_Rik=math.inf)


def _local_price(inst: OffloadInstance, kappa_v: float) -> float:
    # local energy cost per price unit of task, so it enters the split like a price
    return inst.xi_v * kappa_v * LOCAL_FREQ_HZ**2 * LOCAL_CYCLES_PER_BIT * inst.price_unit_bits


def local_only_utility(inst: OffloadInstance, kappa_v: float) -> tuple[float, bool]:
    D = inst.rv.task_size_Dqi
    t = D * LOCAL_CYCLES_PER_BIT / LOCAL_FREQ_HZ
    energy = kappa_v * LOCAL_FREQ_HZ**2 * D * LOCAL_CYCLES_PER_BIT
    return inst.alpha * (inst.t_max - t**2) - inst.xi_v * energy, t <= inst.t_max


def baseline_scheme_utilities(scheme: str, inst: OffloadInstance, p_pa: float, p_rsu: float,
                              kappa_v: float = 1e-27, sign: str = "minus_as_defined") -> dict:
    """RV/PV/RSU utilities of a non-game offloading scheme at the given prices."""
    if scheme == "rsu_only":
        eps = 1.0
    elif scheme == "pv_only":
        eps = 0.0
    elif scheme == "local_only":
        u, met = local_only_utility(inst, kappa_v)
        return {"epsilon": 0.0, "u_rv": u, "u_pv": 0.0, "u_rsu": 0.0, "deadline_met": met}
    elif scheme == "rsu_and_local":
        loc = _local_instance(inst)
        p_loc = _local_price(inst, kappa_v)
        try:
            eps = optimal_epsilon(loc, p_loc, p_rsu).epsilon
        except InfeasibleInstance:
            eps = optimal_epsilon(loc, p_loc, p_rsu, deadlines=False).epsilon
        t = max((1 - eps) * loc.gamma_pa, eps * loc.gamma_rsu)
        return {"epsilon": eps, "u_rv": rv_utility(loc, eps, p_loc, p_rsu), "u_pv": 0.0,
                "u_rsu": rsu_utility(inst, eps, p_rsu, sign), "deadline_met": t <= inst.t_max}
    else:
        raise ValueError(f"unknown baseline scheme {scheme!r}")
    t = max((1 - eps) * inst.gamma_pa, eps * inst.gamma_rsu)
    return {"epsilon": eps, "u_rv": rv_utility(inst, eps, p_pa, p_rsu),
            "u_pv": pv_utility(inst, eps, p_pa, sign) if eps < 1 else 0.0,
            "u_rsu": rsu_utility(inst, eps, p_rsu, sign) if eps > 0 else 0.0,
            "deadline_met": t <= inst.t_max}


class _Runner:
    def __init__(self, spec: ExperimentSpec, raw_scenario: dict, seed: int, traces: bool = False):
        self.spec = spec
        self.raw = raw_scenario
        self.seed = seed
        self.traces = traces

    def config(self, rep: int) -> ScenarioConfig:
        raw = dict(self.raw)
        raw["rng_seed"] = self.seed + rep
        return scenario_from_dict(raw)

    def counts(self, value) -> dict:
        c = {"n_rv": self.spec.n_rv, "n_pv": self.spec.n_pv, "n_rsu": self.spec.n_rsu,
             "n_consensus": self.spec.n_consensus}
        if self.spec.sweep_variable in c:
            c[self.spec.sweep_variable] = int(value)
        return c

    def run_cell(self, cell: Cell) -> tuple[list[tuple], list[dict]]:
        spec = self.spec
        cfg = self.config(cell.repetition)
        c = self.counts(cell.value)
        rvs, pvs, rsus = cfg.rvs[:c["n_rv"]], cfg.pvs[:c["n_pv"]], cfg.rsus[:c["n_rsu"]]
        sv = spec.sweep_variable
        seed = self.seed + cell.repetition

        selection = cfg.selection
        if cell.scheme in SELECTION_SCHEMES:
            selection = replace(selection, strategy=cell.scheme)
        size_n = c["n_consensus"]
        if cell.scheme in SELECTION_SCHEMES and cell.scheme != "cds" and size_n is None:
            # compare strategies at the CDS committee size
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DisconnectedGraphWarning)
                size_n = select_committee(pvs, cfg.parking, cfg.channel, cfg.selection, seed)[1].size
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DisconnectedGraphWarning)
            graph, cset = select_committee(pvs, cfg.parking, cfg.channel, selection, seed, size_n)
        pcs = list(graph.nodes)
        freqs = {pv.id: pv.cpu_freq_fpk for pv in pvs}
        pos = {pv.id: pv.position for pv in pvs}

        # RSU chain: the computing RSUs, or the first N of the pool when N is swept
        rsu_chain = rsus if sv != "n_consensus" else cfg.rsus[:min(int(cell.value), len(cfg.rsus))]
        rset = _rsu_committee(rsu_chain)
        rfreqs = {r.id: r.cpu_freq_frj for r in rsu_chain}
        rpos = {r.id: r.position for r in rsu_chain}

        if cell.scheme == "pbft":
            e_pa = pbft_baseline_energy(cset, cfg.channel, cfg.costs, freqs, pos, 1)
            e_r = pbft_baseline_energy(rset, cfg.channel, cfg.costs, rfreqs, rpos, 1, chain="rsu")
        else:
            e_pa = consensus_total_energy(1, cset, cfg.channel, cfg.costs, freqs, pos)
            e_r = consensus_total_energy(1, rset, cfg.channel, cfg.costs, rfreqs, rpos, chain="rsu")

        rate_pa = float(cell.value) if sv == "rate_pa" else None
        rate_rsu = float(cell.value) if sv == "rate_rsu" else None
        game = cfg.game
        results = []
        for rv in rvs:
            inst = build_instance(rv, pcs, rsus, cfg.channel, cfg.costs, e_pa, e_r,
                                  price_unit_bits=game.price_unit_bits, rate_pa=rate_pa, rate_rsu=rate_rsu)
            results.append(self._solve(cell.scheme, inst, cfg, cell.value))

        feasible = [r for r in results if r["feasible"]]
        status = "ok" if len(feasible) == len(results) else ("partial" if feasible else "infeasible")
        metrics: dict[str, float] = {
            "n_rv": float(len(rvs)), "n_pv": float(len(pvs)), "n_computing_pv": float(len(pcs)),
            "n_rsu": float(len(rsus)), "committee_size": float(cset.size),
            "rsu_committee_size": float(rset.size),
            "consensus_energy_pv_per_rv_J": e_pa, "consensus_energy_rsu_per_rv_J": e_r,
            "consensus_energy_pv_total_J": e_pa * len(rvs),
            "feasible_fraction": len(feasible) / len(results),
        }
        if feasible:
            u_rv = np.array([r["u_rv"] for r in feasible])
            u_pv = np.array([r["u_pv"] for r in feasible])
            u_r = np.array([r["u_rsu"] for r in feasible])
            metrics.update({
                "eps_mean": float(np.mean([r["epsilon"] for r in feasible])),
                "p_pa_mean": float(np.mean([r["p_pa"] for r in feasible])),
                "p_rsu_mean": float(np.mean([r["p_rsu"] for r in feasible])),
                "avg_rv_utility": float(u_rv.mean()), "total_rv_utility": float(u_rv.sum()),
                "total_pv_utility": float(u_pv.sum()),
                "avg_pv_utility": float(u_pv.sum() / len(pcs)),
                "total_rsu_utility": float(u_r.sum()),
                "avg_rsu_utility": float(u_r.sum() / len(rsus)),
                "converged_fraction": float(np.mean([r["converged"] for r in feasible])),
                "deadline_met_fraction": float(np.mean([r["deadline_met"] for r in feasible])),
            })
        rows = [(spec.name, cell.scheme, sv, float(cell.value), cell.repetition, k, float(v), status)
                for k, v in metrics.items()]
        trace = []
        if self.traces:
            trace = self._trace(cell, cset, cfg, freqs, pos, seed)
        return rows, trace

    def _solve(self, scheme: str, inst: OffloadInstance, cfg: ScenarioConfig, value) -> dict:
        game = cfg.game
        sign = game.consensus_term_sign
        sv = self.spec.sweep_variable
        fixed = None
        if sv == "price_pa":
            fixed = (float(value), self.spec.fixed_price)
        elif sv == "price_rsu":
            fixed = (self.spec.fixed_price, float(value))

        if fixed is not None:
            p_pa, p_r = fixed
            try:
                eps = optimal_epsilon(inst, p_pa, p_r, game.balance_rtol).epsilon
                sol = dict(epsilon=eps, p_pa=p_pa, p_rsu=p_r, converged=True, feasible=True,
                           u_rv=rv_utility(inst, eps, p_pa, p_r), u_pv=pv_utility(inst, eps, p_pa, sign),
                           u_rsu=rsu_utility(inst, eps, p_r, sign))
            except InfeasibleInstance:
                sol = dict(epsilon=math.nan, p_pa=p_pa, p_rsu=p_r, converged=False, feasible=False)
        else:
            s = solve_stackelberg(inst, game)
            sol = dict(epsilon=s.epsilon_star, p_pa=s.p_pa_star, p_rsu=s.p_rsu_star,
                       converged=s.converged, feasible=s.feasible,
                       u_rv=s.u_rv, u_pv=s.u_pv, u_rsu=s.u_rsu)
        if not sol["feasible"]:
            return sol
        sol["deadline_met"] = True
        if scheme in GAME_SCHEMES and scheme != "bpvec":
            base = baseline_scheme_utilities(scheme, inst, sol["p_pa"], sol["p_rsu"],
                                             cfg.costs.cap_switch_kv, sign)
            sol.update(epsilon=base["epsilon"], u_rv=base["u_rv"], u_pv=base["u_pv"],
                       u_rsu=base["u_rsu"], deadline_met=base["deadline_met"])
        return sol

    def _trace(self, cell: Cell, cset: ConsensusSet, cfg: ScenarioConfig, freqs, pos, seed) -> list[dict]:
        from .consensus.hotstuff import run_consensus
        run = run_consensus(cset, None, rounds=1, seed=seed, costs=cfg.costs, ch=cfg.channel,
                            freqs=freqs, positions=pos)
        head = {"experiment": self.spec.name, "scheme": cell.scheme, "sweep_value": float(cell.value),
                "repetition": cell.repetition}
        return [{**head, **ev} for ev in run.events]


def _cells(spec: ExperimentSpec) -> list[Cell]:
    out = []
    for scheme in spec.schemes:
        for v in spec.sweep_values:
            for rep in range(spec.repetitions):
                out.append(Cell(len(out), scheme, v, rep))
    return out


def _run_one(args):
    runner, cell = args
    return cell.index, runner.run_cell(cell)


def run_experiment(spec: ExperimentSpec, scenario: dict | str | Path | None = None, *,
                   seed: int | None = None, workers: int = 1, traces: bool = False,
                   trace_sink: list | None = None) -> ExperimentTable:
    """Evaluate every (scheme, sweep value, repetition) cell of ``spec``.

    ``scenario`` is a parsed scenario mapping or a path (default: the shipped
    scenario).  Output order is by cell index whatever the worker count.
    """
    raw = _raw_scenario(scenario)
    base_seed = spec.seed if seed is None else seed
    runner = _Runner(spec, raw, base_seed, traces)
    spec.validate(runner.config(0))
    cells = _cells(spec)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            done = dict(ex.map(_run_one, [(runner, c) for c in cells]))
    else:
        done = dict(_run_one((runner, c)) for c in cells)
    table = ExperimentTable(spec.name, spec.sweep_variable)
    for c in cells:
        rows, trace = done[c.index]
        table.rows.extend(rows)
        if trace_sink is not None:
            trace_sink.extend(trace)
    return table


def _raw_scenario(scenario) -> dict:
    if scenario is None:
        scenario = DEFAULT_SCENARIO
    if isinstance(scenario, dict):
        return scenario
    try:
        raw = yaml.safe_load(Path(scenario).read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError("<file>", f"parse error: {exc}") from exc
    return raw or {}


def write_outputs(table: ExperimentTable, spec: ExperimentSpec, raw_scenario: dict, out: str | Path,
                  seed: int, traces: Iterable[dict] | None = None) -> dict[str, Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{spec.name}.csv"
    csv_path.write_text(table.to_csv())
    cfg = scenario_from_dict({**raw_scenario, "rng_seed": seed})
    manifest = {
        "experiment": spec.name,
        "spec": spec.to_dict(),
        "seed": seed,
        "scenario_digest": cfg.digest(),
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "csv_columns": list(CSV_COLUMNS),
        "software": {"package": "bpvec", "version": __version__, "numpy": np.__version__},
        "cells": len(table.cells()),
        "rows": len(table.rows),
    }
    paths = {"csv": csv_path}
    man_path = out / "manifest.json"
    man_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    paths["manifest"] = man_path
    if traces is not None:
        tp = out / f"{spec.name}.traces.jsonl"
        with tp.open("w") as fh:
            for ev in traces:
                fh.write(json.dumps(ev, sort_keys=True) + "\n")
        paths["traces"] = tp
    return paths
