"""Scenario configuration: entities, constants, validation and file I/O.

Scenario files are YAML mappings.  Every constant block is optional and
falls back to the defaults below; entity fields given as ranges in the
simulation table (task size, CPU frequency, tolerance time) are sampled
uniformly with ``rng_seed`` when a concrete value is absent.

Unit conventions used on disk and in memory:

* ``MB`` is 2**20 bytes and ``KB`` is 2**10 bytes.
* Block size, transaction size and task size are written in MB/KB in the
  file and held in **bits** in memory.
* Frequencies are Hz, times are seconds, distances are meters.
* Link rates are MB/s (``bandwidth_Wb * log2(1 + snr)``); use
  :func:`bpvec.channel.rate_bps` to convert.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

BITS_PER_BYTE = 8
KB = 2**10
MB = 2**20
BITS_PER_KB = KB * BITS_PER_BYTE
BITS_PER_MB = MB * BITS_PER_BYTE
BITS_PER_GB = float(2**30 * BITS_PER_BYTE)

# sampling ranges for entity fields the simulation table only gives as ranges
TASK_SIZE_MB_RANGE = (10.0, 30.0)
PV_FREQ_RANGE = (1.0e9, 2.5e9)
RSU_FREQ_RANGE = (4.0e9, 6.0e9)
T_MAX_RANGE = (0.100, 0.200)
PARKED_SINCE_RANGE = (0.0, 4 * 3600.0)
LAYOUT_BOX_M = 400.0
DEFAULT_CYCLES_PER_BIT = 24.0


class ScenarioError(ValueError):
    """Raised when a scenario file cannot be parsed or fails validation."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


def _check(cond: bool, field_name: str, message: str) -> None:
    if not cond:
        raise ScenarioError(field_name, message)


# ---------------------------------------------------------------------------
# constant blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelParams:
    bandwidth_Wb: float = 15.0  # MB per log2-unit
    tx_power_Pt: float = 0.28183815  # W
    transceiver_eta: float = 1.63726e-9
    ref_distance_d0: float = 100.0  # m
    noise_N0: float = 1.2589e-13  # W
    pathloss_delta: float = 2.0

    def validate(self) -> None:
        for f in fields(self):
            _check(getattr(self, f.name) > 0, f"channel.{f.name}", "must be > 0")
        _check(self.pathloss_delta >= 1, "channel.pathloss_delta", "must be >= 1")


@dataclass(frozen=True)
class ConsensusCostParams:
    sig_cycles_beta: float = 1e6
    mac_cycles_theta: float = 1e7
    block_size_DBv: float = 4 * BITS_PER_MB  # bits
    tx_size_varpi: float = 1 * BITS_PER_KB  # bits
    cap_switch_kv: float = 1e-27
    cap_switch_kr: float = 1e-28
    energy_unit_xi_v: float = 1e-6  # cost per joule, vehicle
    energy_unit_xi_r: float = 1e-6  # cost per joule, RSU
    block_size_DBr: float | None = None  # RSU-chain block size, bits; None -> D_Bv

    @property
    def rsu_block_bits(self) -> float:
        return self.block_size_DBv if self.block_size_DBr is None else self.block_size_DBr

    @property
    def tx_per_block(self) -> int:
        return int(round(self.block_size_DBv / self.tx_size_varpi))

    @property
    def rsu_tx_per_block(self) -> int:
        return int(round(self.rsu_block_bits / self.tx_size_varpi))

    def validate(self) -> None:
        _check(self.tx_size_varpi > 0, "costs.tx_size_varpi", "must be > 0")
        _check(self.block_size_DBv >= self.tx_size_varpi, "costs.block_size_DBv",
               "must be >= tx_size_varpi")
        _check(self.rsu_block_bits >= self.tx_size_varpi, "costs.block_size_DBr",
               "must be >= tx_size_varpi")
        _check(self.sig_cycles_beta >= 0, "costs.sig_cycles_beta", "must be >= 0")
        _check(self.mac_cycles_theta >= 0, "costs.mac_cycles_theta", "must be >= 0")
        for name in ("cap_switch_kv", "cap_switch_kr", "energy_unit_xi_v", "energy_unit_xi_r"):
            _check(getattr(self, name) >= 0, f"costs.{name}", "must be >= 0")
        _check(self.tx_per_block >= 1, "costs.tx_size_varpi", "tx per block must be >= 1")


@dataclass(frozen=True)
class SamplingRanges:
    """Ranges used for entity fields a file leaves out (published defaults)."""

    task_size_MB: tuple[float, float] = TASK_SIZE_MB_RANGE
    max_tolerance_s: tuple[float, float] = T_MAX_RANGE
    pv_cpu_freq_hz: tuple[float, float] = PV_FREQ_RANGE
    rsu_cpu_freq_hz: tuple[float, float] = RSU_FREQ_RANGE
    parked_since_s: tuple[float, float] = PARKED_SINCE_RANGE
    # placement areas as (x0, y0, x1, y1) in meters
    rv_area_m: tuple[float, float, float, float] = (0.0, 0.0, LAYOUT_BOX_M, LAYOUT_BOX_M)
    pv_area_m: tuple[float, float, float, float] = (0.0, 0.0, LAYOUT_BOX_M, LAYOUT_BOX_M)
    rsu_area_m: tuple[float, float, float, float] = (0.0, 0.0, LAYOUT_BOX_M, LAYOUT_BOX_M)

    def validate(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            name = f"sampling.{f.name}"
            if f.name.endswith("_area_m"):
                _check(len(v) == 4 and v[0] <= v[2] and v[1] <= v[3], name,
                       "area must be [x0, y0, x1, y1] with x0 <= x1, y0 <= y1")
            else:
                _check(len(v) == 2 and 0 <= v[0] <= v[1], name, "range must be [lo, hi] with 0 <= lo <= hi")
        _check(self.task_size_MB[0] > 0, "sampling.task_size_MB", "must be > 0")
        _check(self.max_tolerance_s[0] > 0, "sampling.max_tolerance_s", "must be > 0")
        _check(self.pv_cpu_freq_hz[0] > 0, "sampling.pv_cpu_freq_hz", "must be > 0")
        _check(self.rsu_cpu_freq_hz[0] > 0, "sampling.rsu_cpu_freq_hz", "must be > 0")


@dataclass(frozen=True)
class ParkingRow:
    """Gamma-mixture parameters for one arrival hour."""

    kappa_s: float
    theta_s: float
    kappa_l: float
    theta_l: float
    D1: float
    D2: float


# Synthetic defaults: the fitted per-hour table is not available, so every
# hour uses a 0.5 h short-stay and an 8 h long-stay component.
DEFAULT_PARKING_ROW = ParkingRow(kappa_s=1.0, theta_s=1800.0, kappa_l=1.0,
                                 theta_l=8 * 3600.0, D1=0.6, D2=0.4)


@dataclass(frozen=True)
class ParkingMixtureTable:
    rows: tuple[ParkingRow, ...] = (DEFAULT_PARKING_ROW,) * 24
    gamma_arg_mode: str = "theta_pow_kappa"  # or "theta"

    def row(self, hour: int) -> ParkingRow:
        return self.rows[hour]

    def validate(self) -> None:
        _check(len(self.rows) == 24, "parking.rows", "need exactly 24 hourly rows")
        _check(self.gamma_arg_mode in ("theta_pow_kappa", "theta"),
               "parking.gamma_arg_mode", "must be 'theta_pow_kappa' or 'theta'")
        for h, r in enumerate(self.rows):
            for name in ("kappa_s", "theta_s", "kappa_l", "theta_l"):
                _check(getattr(r, name) > 0, f"parking.rows[{h}].{name}", "must be > 0")
            _check(r.D1 >= 0 and r.D2 >= 0, f"parking.rows[{h}].D1", "weights must be >= 0")
            _check(abs(r.D1 + r.D2 - 1.0) <= 1e-12, f"parking.rows[{h}].D1",
                   "D1 + D2 must equal 1")


def _snr_at(distance: float, ch: ChannelParams) -> float:
    return ch.tx_power_Pt * ch.transceiver_eta * (ch.ref_distance_d0 / distance) ** ch.pathloss_delta / ch.noise_N0


# two PVs within 300 m of each other are adjacent under the default channel
DEFAULT_SNR_THRESHOLD = _snr_at(300.0, ChannelParams())

SELECTION_STRATEGIES = ("cds", "random", "capacity_only", "communication_only")


@dataclass(frozen=True)
class SelectionParams:
    stay_threshold_pth: float = 0.95
    horizon_tau_th: float = 180.0  # s
    snr_threshold: float = DEFAULT_SNR_THRESHOLD
    weight_w1: float = 0.5
    weight_w2: float = 0.5
    strategy: str = "cds"

    def validate(self) -> None:
        _check(0 < self.stay_threshold_pth <= 1, "selection.stay_threshold_pth", "must be in (0, 1]")
        _check(self.horizon_tau_th >= 0, "selection.horizon_tau_th", "must be >= 0")
        _check(self.snr_threshold >= 0, "selection.snr_threshold", "must be >= 0")
        _check(self.weight_w1 >= 0 and self.weight_w2 >= 0, "selection.weight_w1", "must be >= 0")
        _check(abs(self.weight_w1 + self.weight_w2 - 1) <= 1e-12, "selection.weight_w1",
               "w1 + w2 must equal 1")
        _check(self.strategy in SELECTION_STRATEGIES, "selection.strategy",
               f"must be one of {SELECTION_STRATEGIES}")


@dataclass(frozen=True)
class GameSolverParams:
    lr_mu1: float = 1e-2
    lr_mu2: float = 1e-2
    shrink_omega1: float = 2.0
    shrink_omega2: float = 2.0
    tol_theta: float = 1e-8
    max_iters: int = 100_000
    price_floor: float = 0.1
    price_unit_bits: float = BITS_PER_GB  # prices are per GB of task
    consensus_term_sign: str = "minus_as_defined"  # or "plus_as_printed"
    balance_rtol: float = 1e-9

    def validate(self) -> None:
        _check(self.lr_mu1 > 0 and self.lr_mu2 > 0, "game.lr_mu1", "step sizes must be > 0")
        _check(self.shrink_omega1 > 1 and self.shrink_omega2 > 1, "game.shrink_omega1",
               "shrink factors must be > 1")
        _check(self.tol_theta > 0, "game.tol_theta", "must be > 0")
        _check(self.max_iters >= 1, "game.max_iters", "must be >= 1")
        _check(self.price_floor >= 0, "game.price_floor", "must be >= 0")
        _check(self.price_unit_bits > 0, "game.price_unit_bits", "must be > 0")
        _check(self.consensus_term_sign in ("minus_as_defined", "plus_as_printed"),
               "game.consensus_term_sign", "must be 'minus_as_defined' or 'plus_as_printed'")


# ---------------------------------------------------------------------------
# entities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParkedVehicle:
    id: str
    position: tuple[float, float]
    cpu_freq_fpk: float
    cycles_per_bit_Cpk: float = DEFAULT_CYCLES_PER_BIT
    parked_since_tpk: float = 0.0
    arrival_hour_ta: int = 0


@dataclass(frozen=True)
class Rsu:
    id: str
    position: tuple[float, float]
    cpu_freq_frj: float
    cycles_per_bit_Crj: float = DEFAULT_CYCLES_PER_BIT


@dataclass(frozen=True)
class RequestingVehicle:
    id: str
    position: tuple[float, float]
    task_size_Dqi: float  # bits
    max_tolerance_Tmaxi: float  # s
    satisfaction_alpha: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    pvs: tuple[ParkedVehicle, ...]
    rsus: tuple[Rsu, ...]
    rvs: tuple[RequestingVehicle, ...]
    channel: ChannelParams = field(default_factory=ChannelParams)
    costs: ConsensusCostParams = field(default_factory=ConsensusCostParams)
    parking: ParkingMixtureTable = field(default_factory=ParkingMixtureTable)
    selection: SelectionParams = field(default_factory=SelectionParams)
    game: GameSolverParams = field(default_factory=GameSolverParams)
    sampling: SamplingRanges = field(default_factory=SamplingRanges)
    rng_seed: int = 0

    def validate(self) -> "ScenarioConfig":
        _check(len(self.rvs) >= 1, "rvs", "rvs empty")
        _check(len(self.pvs) >= 1, "pvs", "pvs empty")
        _check(len(self.rsus) >= 1, "rsus", "rsus empty")
        ids = [e.id for e in (*self.pvs, *self.rsus, *self.rvs)]
        dup = sorted({i for i in ids if ids.count(i) > 1})
        _check(not dup, "id", f"duplicate ids {dup}")
        for block in (self.channel, self.costs, self.parking, self.selection, self.game, self.sampling):
            block.validate()
        lo, hi = self.sampling.pv_cpu_freq_hz
        for k, pv in enumerate(self.pvs):
            _check(lo <= pv.cpu_freq_fpk <= hi, f"pvs[{k}].cpu_freq_fpk",
                   f"must lie in [{lo:g}, {hi:g}] Hz")
            _check(pv.cycles_per_bit_Cpk > 0, f"pvs[{k}].cycles_per_bit_Cpk", "must be > 0")
            _check(pv.parked_since_tpk >= 0, f"pvs[{k}].parked_since_tpk", "must be >= 0")
            _check(0 <= pv.arrival_hour_ta <= 23, f"pvs[{k}].arrival_hour_ta", "must be in 0..23")
        for j, r in enumerate(self.rsus):
            _check(r.cpu_freq_frj > 0, f"rsus[{j}].cpu_freq_frj", "must be > 0")
            _check(r.cycles_per_bit_Crj > 0, f"rsus[{j}].cycles_per_bit_Crj", "must be > 0")
        for i, rv in enumerate(self.rvs):
            _check(rv.task_size_Dqi > 0, f"rvs[{i}].task_size_Dqi", "must be > 0")
            _check(rv.max_tolerance_Tmaxi > 0, f"rvs[{i}].max_tolerance_Tmaxi", "must be > 0")
            _check(rv.satisfaction_alpha > 0, f"rvs[{i}].satisfaction_alpha", "must be > 0")
        return self

    def digest(self) -> str:
        return hashlib.sha256(to_json(self).encode()).hexdigest()


def compute_capacity_shares(pvs: Sequence[ParkedVehicle], rsus: Sequence[Rsu]):
    """Return (phi_pk per PV, phi_rj per RSU) as numpy arrays summing to 1."""
    if not pvs:
        raise ValueError("pvs empty")
    if not rsus:
        raise ValueError("rsus empty")
    f_pv = np.array([pv.cpu_freq_fpk for pv in pvs], dtype=float)
    f_rsu = np.array([r.cpu_freq_frj for r in rsus], dtype=float)
    return f_pv / f_pv.sum(), f_rsu / f_rsu.sum()


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

# (file key, attribute, scale to internal units)
_COST_KEYS = [
    ("sig_cycles_beta", "sig_cycles_beta", 1.0),
    ("mac_cycles_theta", "mac_cycles_theta", 1.0),
    ("block_size_MB", "block_size_DBv", BITS_PER_MB),
    ("tx_size_KB", "tx_size_varpi", BITS_PER_KB),
    ("cap_switch_kv", "cap_switch_kv", 1.0),
    ("cap_switch_kr", "cap_switch_kr", 1.0),
    ("energy_unit_xi_v", "energy_unit_xi_v", 1.0),
    ("energy_unit_xi_r", "energy_unit_xi_r", 1.0),
]


def _as_float(v: Any, name: str) -> float:
    if isinstance(v, bool):
        raise ScenarioError(name, "expected a number")
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ScenarioError(name, f"expected a number, got {v!r}") from None


def _block(raw: dict, key: str) -> dict:
    sub = raw.get(key) or {}
    _check(isinstance(sub, dict), key, "must be a mapping")
    return sub


def _plain(cls, sub: dict, prefix: str):
    known = {f.name: f for f in fields(cls)}
    unknown = set(sub) - set(known)
    _check(not unknown, f"{prefix}.{sorted(unknown)[0]}" if unknown else prefix, "unknown key")
    kw = {}
    for k, v in sub.items():
        if known[k].type in ("str",):
            kw[k] = str(v)
        elif known[k].type in ("int",):
            kw[k] = int(v)
        else:
            kw[k] = _as_float(v, f"{prefix}.{k}")
    return cls(**kw)


def _position(v: Any, name: str, rng: np.random.Generator, area) -> tuple[float, float]:
    if v is None:
        x = rng.uniform(area[0], area[2])
        y = rng.uniform(area[1], area[3])
        return (float(x), float(y))
    _check(isinstance(v, (list, tuple)) and len(v) == 2, name, "position must be [x, y]")
    return (_as_float(v[0], name), _as_float(v[1], name))


def _entity_list(raw: dict, key: str, prefix: str) -> list:
    items = raw.get(key) or []
    if isinstance(items, int) and not isinstance(items, bool):
        # a bare count: generated ids, every field sampled
        _check(items >= 0, key, "count must be >= 0")
        return [{"id": f"{prefix}{n}"} for n in range(items)]
    _check(isinstance(items, list), key, "must be a list or a count")
    return items


def _sampling(sub: dict) -> SamplingRanges:
    known = {f.name for f in fields(SamplingRanges)}
    unknown = sorted(set(sub) - known)
    _check(not unknown, f"sampling.{unknown[0]}" if unknown else "sampling", "unknown key")
    kw = {}
    for k, v in sub.items():
        _check(isinstance(v, (list, tuple)), f"sampling.{k}", "expected a list")
        kw[k] = tuple(_as_float(x, f"sampling.{k}") for x in v)
    return SamplingRanges(**kw)


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    """Build and validate a config from the parsed file mapping."""
    _check(isinstance(raw, dict), "<root>", "scenario must be a mapping")
    allowed = {"rng_seed", "channel", "costs", "parking", "selection", "game", "sampling",
               "pvs", "rsus", "rvs"}
    extra = sorted(set(raw) - allowed)
    _check(not extra, extra[0] if extra else "", "unknown key")
    seed = int(raw.get("rng_seed", 0))
    rng = np.random.default_rng(seed)

    channel = _plain(ChannelParams, _block(raw, "channel"), "channel")

    csub = dict(_block(raw, "costs"))
    ckw: dict[str, Any] = {}
    for fkey, attr, scale in _COST_KEYS:
        if fkey in csub:
            ckw[attr] = _as_float(csub.pop(fkey), f"costs.{fkey}") * scale
    if "rsu_block_size_MB" in csub:
        ckw["block_size_DBr"] = _as_float(csub.pop("rsu_block_size_MB"), "costs.rsu_block_size_MB") * BITS_PER_MB
    _check(not csub, f"costs.{sorted(csub)[0]}" if csub else "costs", "unknown key")
    costs = ConsensusCostParams(**ckw)

    psub = dict(_block(raw, "parking"))
    mode = str(psub.pop("gamma_arg_mode", "theta_pow_kappa"))
    if "rows" in psub:
        rows_raw = psub.pop("rows")
        _check(isinstance(rows_raw, list), "parking.rows", "must be a list")
        rows = tuple(_plain(ParkingRow, r, f"parking.rows[{h}]") for h, r in enumerate(rows_raw))
    elif "default_row" in psub:
        rows = (_plain(ParkingRow, psub.pop("default_row"), "parking.default_row"),) * 24
    else:
        rows = ParkingMixtureTable().rows
    _check(not psub, f"parking.{sorted(psub)[0]}" if psub else "parking", "unknown key")
    parking = ParkingMixtureTable(rows=rows, gamma_arg_mode=mode)

    selection = _plain(SelectionParams, _block(raw, "selection"), "selection")
    game = _plain(GameSolverParams, _block(raw, "game"), "game")
    sampling = _sampling(_block(raw, "sampling"))
    sampling.validate()

    # entity sampling order is fixed (rvs, pvs, rsus) so files stay reproducible
    rvs = []
    for i, e in enumerate(_entity_list(raw, "rvs", "rv")):
        name = f"rvs[{i}]"
        _check(isinstance(e, dict) and "id" in e, name, "entity needs an id")
        pos = _position(e.get("position"), f"{name}.position", rng, sampling.rv_area_m)
        size_mb = e.get("task_size_MB")
        size_mb = rng.uniform(*sampling.task_size_MB) if size_mb is None else _as_float(size_mb, f"{name}.task_size_MB")
        tmax = e.get("max_tolerance_s")
        tmax = rng.uniform(*sampling.max_tolerance_s) if tmax is None else _as_float(tmax, f"{name}.max_tolerance_s")
        rvs.append(RequestingVehicle(id=str(e["id"]), position=pos,
                                     task_size_Dqi=float(size_mb) * BITS_PER_MB,
                                     max_tolerance_Tmaxi=float(tmax),
                                     satisfaction_alpha=_as_float(e.get("satisfaction_alpha", 1.0),
                                                                  f"{name}.satisfaction_alpha")))
    pvs = []
    for k, e in enumerate(_entity_list(raw, "pvs", "pv")):
        name = f"pvs[{k}]"
        _check(isinstance(e, dict) and "id" in e, name, "entity needs an id")
        pos = _position(e.get("position"), f"{name}.position", rng, sampling.pv_area_m)
        f = e.get("cpu_freq_hz")
        f = rng.uniform(*sampling.pv_cpu_freq_hz) if f is None else _as_float(f, f"{name}.cpu_freq_hz")
        since = e.get("parked_since_s")
        since = rng.uniform(*sampling.parked_since_s) if since is None else _as_float(since, f"{name}.parked_since_s")
        hour = e.get("arrival_hour")
        hour = int(rng.integers(0, 24)) if hour is None else int(hour)
        pvs.append(ParkedVehicle(id=str(e["id"]), position=pos, cpu_freq_fpk=float(f),
                                 cycles_per_bit_Cpk=_as_float(e.get("cycles_per_bit", DEFAULT_CYCLES_PER_BIT),
                                                              f"{name}.cycles_per_bit"),
                                 parked_since_tpk=float(since), arrival_hour_ta=hour))
    rsus = []
    for j, e in enumerate(_entity_list(raw, "rsus", "rsu")):
        name = f"rsus[{j}]"
        _check(isinstance(e, dict) and "id" in e, name, "entity needs an id")
        pos = _position(e.get("position"), f"{name}.position", rng, sampling.rsu_area_m)
        f = e.get("cpu_freq_hz")
        f = rng.uniform(*sampling.rsu_cpu_freq_hz) if f is None else _as_float(f, f"{name}.cpu_freq_hz")
        rsus.append(Rsu(id=str(e["id"]), position=pos, cpu_freq_frj=float(f),
                        cycles_per_bit_Crj=_as_float(e.get("cycles_per_bit", DEFAULT_CYCLES_PER_BIT),
                                                     f"{name}.cycles_per_bit")))

    cfg = ScenarioConfig(pvs=tuple(pvs), rsus=tuple(rsus), rvs=tuple(rvs), channel=channel,
                         costs=costs, parking=parking, selection=selection, game=game,
                         sampling=sampling, rng_seed=seed)
    return cfg.validate()


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    """Inverse of :func:`scenario_from_dict`; every sampled value is written out."""
    costs = {fkey: getattr(cfg.costs, attr) / scale for fkey, attr, scale in _COST_KEYS}
    if cfg.costs.block_size_DBr is not None:
        costs["rsu_block_size_MB"] = cfg.costs.block_size_DBr / BITS_PER_MB
    rows = cfg.parking.rows
    parking: dict[str, Any] = {"gamma_arg_mode": cfg.parking.gamma_arg_mode}
    if all(r == rows[0] for r in rows):
        parking["default_row"] = asdict(rows[0])
    else:
        parking["rows"] = [asdict(r) for r in rows]
    return {
        "rng_seed": cfg.rng_seed,
        "channel": asdict(cfg.channel),
        "costs": costs,
        "parking": parking,
        "selection": asdict(cfg.selection),
        "game": asdict(cfg.game),
        "sampling": {k: list(v) for k, v in asdict(cfg.sampling).items()},
        "rvs": [{"id": rv.id, "position": list(rv.position),
                 "task_size_MB": rv.task_size_Dqi / BITS_PER_MB,
                 "max_tolerance_s": rv.max_tolerance_Tmaxi,
                 "satisfaction_alpha": rv.satisfaction_alpha} for rv in cfg.rvs],
        "pvs": [{"id": pv.id, "position": list(pv.position), "cpu_freq_hz": pv.cpu_freq_fpk,
                 "cycles_per_bit": pv.cycles_per_bit_Cpk, "parked_since_s": pv.parked_since_tpk,
                 "arrival_hour": pv.arrival_hour_ta} for pv in cfg.pvs],
        "rsus": [{"id": r.id, "position": list(r.position), "cpu_freq_hz": r.cpu_freq_frj,
                  "cycles_per_bit": r.cycles_per_bit_Crj} for r in cfg.rsus],
    }


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError("<file>", f"parse error: {exc}") from exc
    return scenario_from_dict(raw if raw is not None else {})


def save_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(cfg), sort_keys=False))


def to_json(cfg: ScenarioConfig) -> str:
    """Normalized JSON echo of a loaded config."""
    return json.dumps(scenario_to_dict(cfg), sort_keys=True, separators=(",", ":"))


def generate_scenario(n_rv: int, n_pv: int, n_rsu: int, seed: int = 0, **overrides) -> ScenarioConfig:
    """Random scenario with all ranged fields sampled; ``overrides`` replace constant blocks."""
    raw: dict[str, Any] = {"rng_seed": seed, "rvs": n_rv, "pvs": n_pv, "rsus": n_rsu}
    sampling = overrides.pop("sampling", None)
    if sampling is not None:
        raw["sampling"] = {k: list(v) for k, v in asdict(sampling).items()}
    cfg = scenario_from_dict(raw)
    return replace(cfg, **overrides).validate() if overrides else cfg
