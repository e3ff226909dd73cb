"""CPU-cycle and energy accounting for CDS-Hotstuff and a PBFT baseline.

Signatures and MACs are never computed; each generation or verification
is charged ``beta`` (signature) or ``theta`` (MAC) cycles.  Compute energy
is ``kappa * f**2 * cycles``; transmission energy is ``bits / rate * P_t``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from ..channel import distance, rate_bps
from ..scenario import ChannelParams, ConsensusCostParams
from ..selection import ConsensusSet

PHASES = ("new_view", "prepare", "pre_commit", "commit", "decide")
BLOCK_PHASES = ("prepare", "pre_commit", "commit", "decide")
VOTE_BYTES = 256


def max_faulty(n: int) -> int:
    return (n - 1) // 3


def _chain(costs: ConsensusCostParams, chain: str):
    if chain == "pv":
        return costs.cap_switch_kv, costs.block_size_DBv, costs.tx_per_block
    if chain == "rsu":
        return costs.cap_switch_kr, costs.rsu_block_bits, costs.rsu_tx_per_block
    raise ValueError(f"unknown chain {chain!r}")


def phase_cycles(role: str, phase: str, costs: ConsensusCostParams, F: int, chain: str = "pv") -> float:
    if F < 0:
        raise ValueError("F must be >= 0")
    b, t = costs.sig_cycles_beta, costs.mac_cycles_theta
    tx = _chain(costs, chain)[2]
    quorum = 2 * F + 1
    if role == "leader":
        table = {
            "new_view": tx * (b + t) + b + quorum * t,
            "prepare": b + t,
            "pre_commit": 2 * b + quorum * t,
            "commit": 2 * b + quorum * t,
            "decide": 2 * b + quorum * t,
        }
    elif role == "replica":
        table = {
            "new_view": b + t,
            "prepare": 2 * b + 2 * t + tx * (b + t),
            "pre_commit": 2 * b + 2 * t,
            "commit": 2 * b + 2 * t,
            "decide": 0.0,
        }
    else:
        raise ValueError(f"unknown role {role!r}")
    if phase not in table:
        raise ValueError(f"unknown phase {phase!r}")
    return table[phase]


def leader_cycles(costs: ConsensusCostParams, F: int, chain: str = "pv") -> float:
    return sum(phase_cycles("leader", p, costs, F, chain) for p in PHASES)


def replica_cycles(costs: ConsensusCostParams, F: int, chain: str = "pv") -> float:
    return sum(phase_cycles("replica", p, costs, F, chain) for p in PHASES)


def consensus_compute_energy(cset: ConsensusSet, costs: ConsensusCostParams,
                             freqs: Mapping[str, float], chain: str = "pv") -> float:
    """Signature/MAC energy of one consensus instance (one block)."""
    kappa = _chain(costs, chain)[0]
    F = cset.max_faulty
    e = kappa * freqs[cset.leader] ** 2 * leader_cycles(costs, F, chain)
    rep = replica_cycles(costs, F, chain)
    for m in cset.replicas:
        e += kappa * freqs[m] ** 2 * rep
    return e


def consensus_tx_energy(cset: ConsensusSet, ch: ChannelParams, costs: ConsensusCostParams,
                        positions: Mapping[str, tuple], chain: str = "pv") -> float:
    """Transmission energy of one consensus instance: four block transfers each way per replica."""
    block = _chain(costs, chain)[1]
    lead = positions[cset.leader]
    e = 0.0
    for m in cset.replicas:
        p = positions[m]
        if distance(p, lead) == 0:
            raise ValueError(f"zero distance between {m} and leader {cset.leader}")
        up = rate_bps(p, lead, ch)
        down = rate_bps(lead, p, ch)
        if up <= 0 or down <= 0:
            raise ValueError(f"zero rate on link {m} <-> {cset.leader}")
        e += 4 * block / up * ch.tx_power_Pt
        e += 4 * block / down * ch.tx_power_Pt
    return e


def amortize(V: float, per_block_energy: float, tx_per_block: int) -> float:
    if V < 0:
        raise ValueError("V must be >= 0")
    return V / tx_per_block * per_block_energy


def consensus_total_energy(V: float, cset: ConsensusSet, ch: ChannelParams, costs: ConsensusCostParams,
                           freqs: Mapping[str, float], positions: Mapping[str, tuple],
                           chain: str = "pv") -> float:
    """Consensus energy attributable to ``V`` requesting vehicles (V=1 gives the per-RV share)."""
    per_block = (consensus_compute_energy(cset, costs, freqs, chain)
                 + consensus_tx_energy(cset, ch, costs, positions, chain))
    return amortize(V, per_block, _chain(costs, chain)[2])


# ---------------------------------------------------------------------------
# PBFT baseline
# ---------------------------------------------------------------------------


def pbft_node_cycles(role: str, costs: ConsensusCostParams, N: int, chain: str = "pv") -> float:
    """Cycles per node for one PBFT instance (pre-prepare, prepare, commit, reply).

    The leader checks the client transactions and signs the pre-prepare with
    a MAC per peer; replicas check the transactions and the leader's
    signature.  In prepare and commit every node signs its own vote with a
    MAC vector for the N-1 peers and verifies a 2F+1 quorum.  Each node
    signs its client reply.
    """
    b, t = costs.sig_cycles_beta, costs.mac_cycles_theta
    tx = _chain(costs, chain)[2]
    F = max_faulty(N)
    quorum = 2 * F + 1
    vote_round = b + (N - 1) * t + quorum * (b + t)
    if N == 1:
        vote_round = 0.0
    if role == "leader":
        pre = tx * (b + t) + b + (N - 1) * t
    elif role == "replica":
        pre = tx * (b + t) + b + t
    else:
        raise ValueError(f"unknown role {role!r}")
    return pre + 2 * vote_round + (b + t)


def pbft_block_energy(cset: ConsensusSet, ch: ChannelParams, costs: ConsensusCostParams,
                      freqs: Mapping[str, float], positions: Mapping[str, tuple],
                      chain: str = "pv") -> tuple[float, float]:
    """(compute, transmission) energy of one PBFT instance."""
    kappa, block, _ = _chain(costs, chain)
    N = cset.size
    e_v = kappa * freqs[cset.leader] ** 2 * pbft_node_cycles("leader", costs, N, chain)
    rep = pbft_node_cycles("replica", costs, N, chain)
    for m in cset.replicas:
        e_v += kappa * freqs[m] ** 2 * rep
    vote_bits = VOTE_BYTES * 8
    e_t = 0.0
    lead = positions[cset.leader]
    for m in cset.replicas:
        e_t += block / rate_bps(lead, positions[m], ch) * ch.tx_power_Pt
    # all-to-all prepare and commit votes
    for a in cset.members:
        for c in cset.members:
            if a != c:
                e_t += 2 * vote_bits / rate_bps(positions[a], positions[c], ch) * ch.tx_power_Pt
    return e_v, e_t


def pbft_baseline_energy(cset: ConsensusSet, ch: ChannelParams, costs: ConsensusCostParams,
                         freqs: Mapping[str, float], positions: Mapping[str, tuple], V: float,
                         chain: str = "pv") -> float:
    e_v, e_t = pbft_block_energy(cset, ch, costs, freqs, positions, chain)
    return amortize(V, e_v + e_t, _chain(costs, chain)[2])


# ---------------------------------------------------------------------------
# ledger
# ---------------------------------------------------------------------------


@dataclass
class CostLedger:
    """Cycles and energy accumulated over completed phases."""

    leader_cycles: dict[str, float] = field(default_factory=lambda: {p: 0.0 for p in PHASES})
    replica_cycles: dict[str, dict[str, float]] = field(default_factory=dict)
    compute_energy_Ev: float = 0.0
    tx_energy_ET: float = 0.0

    @property
    def total_consensus_energy(self) -> float:
        return self.compute_energy_Ev + self.tx_energy_ET

    def charge(self, node: str, role: str, phase: str, cycles: float, kappa: float, freq: float) -> None:
        if role == "leader":
            self.leader_cycles[phase] += cycles
        else:
            per = self.replica_cycles.setdefault(node, {p: 0.0 for p in PHASES})
            per[phase] += cycles
        self.compute_energy_Ev += kappa * freq**2 * cycles

    def charge_tx(self, joules: float) -> None:
        self.tx_energy_ET += joules

    def as_row(self) -> dict:
        row = {f"leader_{p}": self.leader_cycles[p] for p in PHASES}
        for p in PHASES:
            row[f"replica_{p}"] = sum(per[p] for per in self.replica_cycles.values())
        row.update(compute_energy_Ev=self.compute_energy_Ev, tx_energy_ET=self.tx_energy_ET,
                   total_consensus_energy=self.total_consensus_energy)
        return row
