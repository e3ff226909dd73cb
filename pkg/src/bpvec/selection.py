"""Consensus-node selection among parked vehicles.

Vehicles likely to stay are filtered first, then an SNR-threshold graph is
scored by node quality (share of total SNR blended with share of CPU
capacity) and a greedy connected dominating set becomes the committee.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import distance, snr_at_distance
from .parking import StayQuery, stay_probability
from .scenario import ChannelParams, ParkedVehicle, ParkingMixtureTable, SelectionParams


class DisconnectedGraphWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PvGraph:
    nodes: tuple[ParkedVehicle, ...]
    adjacency: np.ndarray  # bool, symmetric, zero diagonal
    snr: np.ndarray  # pairwise SNR, zero diagonal
    quality: np.ndarray

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(pv.id for pv in self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class ConsensusSet:
    members: tuple[str, ...]
    heads: tuple[str, ...]
    leader: str
    disconnected: bool = False
    ranking: tuple[str, ...] = ()  # members by descending quality; leader rotation order

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def replicas(self) -> tuple[str, ...]:
        return tuple(m for m in self.members if m != self.leader)

    @property
    def max_faulty(self) -> int:
        return (self.size - 1) // 3


def filter_by_stay(pvs: Sequence[ParkedVehicle], tbl: ParkingMixtureTable,
                   params: SelectionParams) -> list[ParkedVehicle]:
    kept = []
    for pv in pvs:
        q = StayQuery(pv.parked_since_tpk, params.horizon_tau_th, pv.arrival_hour_ta)
        if stay_probability(q, tbl) >= params.stay_threshold_pth:
            kept.append(pv)
    return kept


def snr_matrix(positions: Sequence, ch: ChannelParams) -> np.ndarray:
    n = len(positions)
    s = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            s[i, j] = s[j, i] = snr_at_distance(distance(positions[i], positions[j]), ch)
    return s


def node_quality(snr: np.ndarray, freqs: np.ndarray, w1: float, w2: float) -> np.ndarray:
    comm = snr.sum(axis=1)
    total = comm.sum()
    comm_share = comm / total if total > 0 else np.full(len(freqs), 1.0 / len(freqs))
    return w1 * comm_share + w2 * freqs / freqs.sum()


def build_graph(pcs: Sequence[ParkedVehicle], ch: ChannelParams, params: SelectionParams) -> PvGraph:
    if not pcs:
        raise ValueError("empty node set")
    s = snr_matrix([pv.position for pv in pcs], ch)
    adj = s >= params.snr_threshold
    np.fill_diagonal(adj, False)
    q = node_quality(s, np.array([pv.cpu_freq_fpk for pv in pcs]), params.weight_w1, params.weight_w2)
    return PvGraph(nodes=tuple(pcs), adjacency=adj, snr=s, quality=q)


# ---------------------------------------------------------------------------
# graph predicates (also used by the tests as independent checks)
# ---------------------------------------------------------------------------


def components(adj: np.ndarray, subset: Sequence[int] | None = None) -> list[list[int]]:
    """Connected components of the subgraph induced by ``subset``."""
    nodes = list(range(len(adj))) if subset is None else sorted(subset)
    inside = set(nodes)
    seen: set[int] = set()
    out = []
    for start in nodes:
        if start in seen:
            continue
        comp, stack = [], [start]
        seen.add(start)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in np.flatnonzero(adj[u]):
                v = int(v)
                if v in inside and v not in seen:
                    seen.add(v)
                    stack.append(v)
        out.append(sorted(comp))
    return out


def is_dominating(adj: np.ndarray, members: Sequence[int]) -> bool:
    m = np.zeros(len(adj), dtype=bool)
    m[list(members)] = True
    return bool(np.all(m | adj[:, m].any(axis=1)))


def _order(g: PvGraph) -> list[int]:
    # descending quality, lower index first on ties
    return sorted(range(len(g)), key=lambda i: (-g.quality[i], i))


def _leader(g: PvGraph, members: Sequence[int]) -> int:
    return min(members, key=lambda i: (-g.quality[i], i))


def _ranking(g: PvGraph, members: Sequence[int]) -> tuple[str, ...]:
    return tuple(g.ids[i] for i in sorted(members, key=lambda i: (-g.quality[i], i)))


def _connect(g: PvGraph, comp_nodes: list[int], members: set[int]) -> None:
    adj, q = g.adjacency, g.quality
    cset = set(comp_nodes)
    while True:
        parts = components(adj, [m for m in members if m in cset])
        if len(parts) <= 1:
            return
        label = {u: c for c, part in enumerate(parts) for u in part}
        outside = [u for u in comp_nodes if u not in members]

        def touched(u: int) -> set[int]:
            return {label[int(v)] for v in np.flatnonzero(adj[u]) if int(v) in label}

        best = None
        for k in outside:
            if len(touched(k)) >= 2:
                key = (-q[k], k)
                if best is None or key < best[0]:
                    best = (key, (k,))
        if best is None:
            for k in outside:
                tk = touched(k)
                if not tk:
                    continue
                for n in np.flatnonzero(adj[k]):
                    n = int(n)
                    if n in members or n == k:
                        continue
                    if touched(n) - tk:
                        key = (-(q[k] + q[n]), min(k, n), max(k, n))
                        if best is None or key < best[0]:
                            best = (key, (k, n))
        if best is None:  # cannot happen for a dominating set of a connected component
            raise RuntimeError("failed to connect dominating set")
        members.update(best[1])


def select_cds(g: PvGraph) -> ConsensusSet:
    if len(g) == 0:
        raise ValueError("empty graph")
    covered = np.zeros(len(g), dtype=bool)
    heads = []
    for i in _order(g):
        if not covered[i]:
            heads.append(i)
            covered[i] = True
            covered |= g.adjacency[i]
    members = set(heads)
    comps = components(g.adjacency)
    for comp in comps:
        _connect(g, comp, members)
    disconnected = len(comps) > 1
    if disconnected:
        warnings.warn(f"filtered PV graph has {len(comps)} components; committee built per component",
                      DisconnectedGraphWarning, stacklevel=2)
    ids = g.ids
    ordered = sorted(members)
    return ConsensusSet(members=tuple(ids[i] for i in ordered), heads=tuple(ids[i] for i in heads),
                        leader=ids[_leader(g, ordered)], disconnected=disconnected,
                        ranking=_ranking(g, ordered))


def select_baseline(g: PvGraph, strategy: str, size_n: int, seed: int = 0) -> ConsensusSet:
    if size_n > len(g):
        raise ValueError(f"size_n={size_n} exceeds node count {len(g)}")
    if size_n < 1:
        raise ValueError("size_n must be >= 1")
    n = len(g)
    if strategy == "random":
        rng = np.random.default_rng(seed)
        picked = sorted(int(i) for i in rng.choice(n, size=size_n, replace=False))
    elif strategy == "capacity_only":
        f = [pv.cpu_freq_fpk for pv in g.nodes]
        picked = sorted(sorted(range(n), key=lambda i: (-f[i], i))[:size_n])
    elif strategy == "communication_only":
        s = g.snr.sum(axis=1)
        picked = sorted(sorted(range(n), key=lambda i: (-s[i], i))[:size_n])
    elif strategy == "cds":
        return select_cds(g)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    ids = g.ids
    return ConsensusSet(members=tuple(ids[i] for i in picked), heads=(),
                        leader=ids[_leader(g, picked)], ranking=_ranking(g, picked))


def select_top_quality(g: PvGraph, size_n: int) -> ConsensusSet:
    """Committee of exactly ``size_n`` nodes: the CDS, padded or trimmed by quality."""
    if not 1 <= size_n <= len(g):
        raise ValueError(f"size_n must be in [1, {len(g)}]")
    cds = select_cds(g)
    index = {pid: i for i, pid in enumerate(g.ids)}
    base = [index[m] for m in cds.members]
    rest = [i for i in _order(g) if i not in base]
    ranked = sorted(base, key=lambda i: (-g.quality[i], i)) + rest
    picked = sorted(ranked[:size_n])
    ids = g.ids
    return ConsensusSet(members=tuple(ids[i] for i in picked), heads=cds.heads,
                        leader=ids[_leader(g, picked)], ranking=_ranking(g, picked))


def select_committee(pvs: Sequence[ParkedVehicle], tbl: ParkingMixtureTable, ch: ChannelParams,
                     params: SelectionParams, seed: int = 0, size_n: int | None = None):
    """Filter, build the graph and apply the configured strategy; returns (graph, set)."""
    pcs = filter_by_stay(pvs, tbl, params)
    if not pcs:
        raise ValueError("no parked vehicle passes the stay-probability filter")
    g = build_graph(pcs, ch, params)
    if params.strategy == "cds":
        cset = select_cds(g) if size_n is None else select_top_quality(g, size_n)
    else:
        n = size_n if size_n is not None else len(select_cds(g).members)
        cset = select_baseline(g, params.strategy, n, seed)
    return g, cset
