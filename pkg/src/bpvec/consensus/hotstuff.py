"""Basic (non-chained) Hotstuff as a deterministic discrete-event simulation.

Cryptography is modeled, not computed: a vote is "signed" by being entered
in a global registry keyed by (phase, view, block), so a quorum
certificate is valid only if every voter it names actually signed.  This
is what makes honest signatures unforgeable for Byzantine nodes.
"""
from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from ..channel import distance, rate_bps
from ..scenario import ChannelParams, ConsensusCostParams
from ..selection import ConsensusSet
from .costs import BLOCK_PHASES, VOTE_BYTES, CostLedger, phase_cycles

BEHAVIORS = ("silent", "equivocate", "vote_invalid")
VOTE_KIND = {"prepare": "vote_prepare", "pre_commit": "vote_precommit", "commit": "vote_commit"}
NEXT_PHASE = {"prepare": "pre_commit", "pre_commit": "commit", "commit": "decide"}


@dataclass(frozen=True)
class Block:
    hash: str
    parent: str | None
    view: int
    height: int
    proposer: str


@dataclass(frozen=True)
class QuorumCert:
    phase: str
    view: int
    block: str
    voters: frozenset


@dataclass(frozen=True)
class SimMessage:
    kind: str
    sender: str
    recipient: str
    view: int
    payload_size: int  # bytes
    deliver_at: float
    block: Block | None = None
    qc: QuorumCert | None = None
    vote_for: str | None = None
    valid: bool = True


@dataclass(frozen=True)
class FaultPlan:
    byzantine_ids: frozenset = frozenset()
    behavior: str = "silent"
    leader_failures: frozenset = frozenset()

    @classmethod
    def build(cls, cset: ConsensusSet, byzantine_ids=(), behavior: str = "silent", leader_failures=()):
        """Validated constructor; rejects more Byzantine nodes than the committee tolerates."""
        byz = frozenset(byzantine_ids)
        if behavior not in BEHAVIORS:
            raise ValueError(f"unknown behavior {behavior!r}")
        unknown = byz - set(cset.members)
        if unknown:
            raise ValueError(f"byzantine ids not in committee: {sorted(unknown)}")
        if len(byz) > cset.max_faulty:
            raise ValueError(f"{len(byz)} byzantine nodes exceed F={cset.max_faulty} for N={cset.size}")
        return cls(byzantine_ids=byz, behavior=behavior, leader_failures=frozenset(leader_failures))


@dataclass(frozen=True)
class LatencyModel:
    """Synchronous network: every one-way delay is uniform in [min_s, max_s]."""

    min_s: float = 0.001
    max_s: float = 0.005

    def sample(self, rng: np.random.Generator) -> float:
        if self.max_s == self.min_s:
            return self.min_s
        return float(rng.uniform(self.min_s, self.max_s))

    @property
    def timeout(self) -> float:
        return 4 * self.max_s


@dataclass
class ViewRecord:
    view: int
    leader: str
    committed: str | None = None  # block hash decided in this view
    phases: list[str] = field(default_factory=list)


@dataclass
class ConsensusRun:
    members: tuple[str, ...]
    F: int
    views: dict[int, ViewRecord]
    commits: dict[str, list[str]]  # node -> committed block hashes by height (index 0 = height 1)
    events: list[dict]
    ledger: CostLedger
    honest: frozenset

    @property
    def committed_views(self) -> list[int]:
        return [v for v, rec in sorted(self.views.items()) if rec.committed is not None]

    def write_trace(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for ev in self.events:
                fh.write(json.dumps(ev, sort_keys=True) + "\n")


GENESIS = Block(hash="genesis", parent=None, view=0, height=0, proposer="")


class _Node:
    def __init__(self, nid: str):
        self.id = nid
        self.view = 1
        self.high_qc = QuorumCert("prepare", 0, GENESIS.hash, frozenset())
        self.locked_qc = self.high_qc
        self.voted: set[tuple[int, str]] = set()
        self.timer_epoch = 0
        self.committed: list[str] = []
        # leader-side bookkeeping, per view
        self.new_views: dict[int, dict[str, QuorumCert]] = {}
        self.votes: dict[tuple[int, str, str], set[str]] = {}
        self.proposed: set[int] = set()
        self.advanced: set[tuple[int, str, str]] = set()
        self.stopped = False


class _Sim:
    def __init__(self, cset, plan, net, rounds, seed, costs, ch, freqs, positions, chain, order):
        self.cset = cset
        self.plan = plan
        self.net = net
        self.rounds = rounds
        self.rng = np.random.default_rng(seed)
        self.costs = costs
        self.ch = ch
        self.freqs = freqs
        self.positions = positions
        self.kappa = costs.cap_switch_kv if chain == "pv" else costs.cap_switch_kr
        self.block_bits = costs.block_size_DBv if chain == "pv" else costs.rsu_block_bits
        self.chain = chain
        self.members = tuple(cset.members)
        self.order = tuple(order)
        self.N = len(self.members)
        self.F = cset.max_faulty
        self.quorum = 2 * self.F + 1
        self.nodes = {m: _Node(m) for m in self.members}
        self.byz = plan.byzantine_ids
        self.honest = frozenset(m for m in self.members if m not in self.byz)
        self.blocks: dict[str, Block] = {GENESIS.hash: GENESIS}
        self.signed: dict[tuple[str, int, str], set[str]] = {}
        self.queue: list = []
        self.seq = 0
        self.now = 0.0
        self.events: list[dict] = []
        self.views = {v: ViewRecord(v, self.leader_of(v)) for v in range(1, rounds + 1)}
        self.ledger = CostLedger()
        self.completed: set[tuple[int, str]] = set()
        self.pending: dict[tuple[int, str], list[tuple[str, float]]] = {}

    # -- helpers ---------------------------------------------------------
    def leader_of(self, view: int) -> str:
        return self.order[(view - 1) % len(self.order)]

    def push(self, at: float, item) -> None:
        heapq.heappush(self.queue, (at, self.seq, item))
        self.seq += 1

    def send(self, kind, sender, recipient, view, size, **kw) -> None:
        delay = 0.0 if sender == recipient else self.net.sample(self.rng)
        msg = SimMessage(kind=kind, sender=sender, recipient=recipient, view=view, payload_size=size,
                         deliver_at=self.now + delay, **kw)
        self.push(msg.deliver_at, msg)

    def block_bytes(self) -> int:
        return int(self.block_bits // 8)

    def make_block(self, parent: str, view: int, proposer: str, salt: str = "") -> Block:
        p = self.blocks[parent]
        h = hashlib.sha256(f"{parent}|{view}|{proposer}|{salt}".encode()).hexdigest()[:16]
        b = Block(hash=h, parent=parent, view=view, height=p.height + 1, proposer=proposer)
        self.blocks[h] = b
        return b

    def extends(self, child: str, ancestor: str) -> bool:
        cur: str | None = child
        while cur is not None:
            if cur == ancestor:
                return True
            cur = self.blocks[cur].parent
        return False

    def sign(self, phase: str, view: int, block: str, voter: str) -> None:
        self.signed.setdefault((phase, view, block), set()).add(voter)

    def qc_valid(self, qc: QuorumCert) -> bool:
        if qc.view == 0:
            return qc.block == GENESIS.hash
        signers = self.signed.get((qc.phase, qc.view, qc.block), set())
        return len(qc.voters) >= self.quorum and qc.voters <= signers and qc.voters <= set(self.members)

    # -- cost accounting ---------------------------------------------------
    def charge_replica(self, node: str, view: int, phase: str) -> None:
        cyc = phase_cycles("replica", phase, self.costs, self.F, self.chain)
        key = (view, phase)
        if key in self.completed:
            self.ledger.charge(node, "replica", phase, cyc, self.kappa, self.freqs[node])
        else:
            self.pending.setdefault(key, []).append((node, cyc))

    def complete_phase(self, view: int, phase: str, leader: str) -> None:
        key = (view, phase)
        if key in self.completed:
            return
        self.completed.add(key)
        if leader in self.honest:
            cyc = phase_cycles("leader", phase, self.costs, self.F, self.chain)
            self.ledger.charge(leader, "leader", phase, cyc, self.kappa, self.freqs[leader])
        for node, cyc in self.pending.pop(key, []):
            self.ledger.charge(node, "replica", phase, cyc, self.kappa, self.freqs[node])
        if phase in BLOCK_PHASES and self.positions is not None:
            lead = self.positions[leader]
            e = 0.0
            for m in self.members:
                if m == leader:
                    continue
                p = self.positions[m]
                e += self.block_bits / rate_bps(p, lead, self.ch) * self.ch.tx_power_Pt
                e += self.block_bits / rate_bps(lead, p, self.ch) * self.ch.tx_power_Pt
            self.ledger.charge_tx(e)
        if view in self.views:
            self.views[view].phases.append(phase)
        self.events.append({"t": self.now, "event": "phase", "view": view, "phase": phase, "leader": leader})

    # -- pacemaker -----------------------------------------------------------
    def arm_timer(self, node: _Node) -> None:
        node.timer_epoch += 1
        self.push(self.now + self.net.timeout, ("timeout", node.id, node.view, node.timer_epoch))

    def enter_view(self, node: _Node, view: int, reason: str) -> None:
        if view > self.rounds:
            node.stopped = True
            node.view = view
            return
        old = node.view
        node.view = view
        if reason != "start":
            self.events.append({"t": self.now, "event": "view_change", "node": node.id,
                                "from": old, "to": view, "reason": reason})
        self.arm_timer(node)
        self.send_new_view(node, view)

    def send_new_view(self, node: _Node, view: int) -> None:
        nid = node.id
        if nid in self.byz and self.plan.behavior == "silent":
            return
        leader = self.leader_of(view)
        if nid in self.byz:
            qc, valid = QuorumCert("prepare", 0, GENESIS.hash, frozenset()), self.plan.behavior != "vote_invalid"
        else:
            qc, valid = node.high_qc, True
            if nid != leader:
                self.charge_replica(nid, view, "new_view")
        self.send("new_view", nid, leader, view, VOTE_BYTES, qc=qc, valid=valid)

    # -- leader side ---------------------------------------------------------
    def on_new_view(self, node: _Node, msg: SimMessage) -> None:
        v = msg.view
        if self.leader_of(v) != node.id or v < node.view or v > self.rounds or not msg.valid:
            return
        if not self.qc_valid(msg.qc):
            return
        bucket = node.new_views.setdefault(v, {})
        bucket[msg.sender] = msg.qc
        if len(bucket) >= self.quorum and v not in node.proposed:
            if node.view < v:
                self.enter_view(node, v, "catch_up")
            self.propose(node, v, bucket)

    def propose(self, node: _Node, v: int, bucket: dict) -> None:
        node.proposed.add(v)
        nid = node.id
        if v in self.plan.leader_failures:
            self.events.append({"t": self.now, "event": "leader_failure", "view": v, "leader": nid})
            return
        if nid in self.byz and self.plan.behavior == "silent":
            return
        high = max(bucket.values(), key=lambda q: (q.view, q.block))
        if nid in self.honest:
            self.complete_phase(v, "new_view", nid)
        size = self.block_bytes()
        if nid in self.byz and self.plan.behavior == "equivocate":
            a = self.make_block(high.block, v, nid, "a")
            b = self.make_block(high.block, v, nid, "b")
            for i, r in enumerate(self.members):
                blk = a if i % 2 == 0 else b
                self.send("prepare", nid, r, v, size, block=blk, qc=high)
            return
        blk = self.make_block(high.block, v, nid)
        for r in self.members:
            self.send("prepare", nid, r, v, size, block=blk, qc=high)

    def on_vote(self, node: _Node, msg: SimMessage, phase: str) -> None:
        v = msg.view
        if self.leader_of(v) != node.id or node.view != v or not msg.valid:
            return
        if msg.sender not in self.signed.get((phase, v, msg.vote_for), set()):
            return
        key = (v, phase, msg.vote_for)
        voters = node.votes.setdefault(key, set())
        voters.add(msg.sender)
        if len(voters) >= self.quorum and key not in node.advanced:
            node.advanced.add(key)
            qc = QuorumCert(phase, v, msg.vote_for, frozenset(voters))
            nid = node.id
            if nid in self.byz and self.plan.behavior == "silent":
                return
            self.events.append({"t": self.now, "event": "qc", "view": v, "phase": phase,
                                "block": qc.block, "voters": sorted(qc.voters)})
            self.complete_phase(v, phase, nid)
            nxt = NEXT_PHASE[phase]
            if nxt == "decide":
                self.complete_phase(v, "decide", nid)
            for r in self.members:
                self.send(nxt, nid, r, v, self.block_bytes(), qc=qc)

    # -- replica side --------------------------------------------------------
    def accept_view(self, node: _Node, v: int) -> bool:
        if v < node.view or v > self.rounds:
            return False
        if v > node.view:
            node.view = v
        self.arm_timer(node)
        return True

    def vote(self, node: _Node, phase: str, v: int, block: str) -> None:
        nid = node.id
        leader = self.leader_of(v)
        if nid in self.byz:
            b = self.plan.behavior
            if b == "silent":
                return
            if b == "vote_invalid":
                self.send(VOTE_KIND[phase], nid, leader, v, VOTE_BYTES, vote_for=block, valid=False)
                return
            # equivocate: sign the real block and a fabricated sibling
            self.sign(phase, v, block, nid)
            self.send(VOTE_KIND[phase], nid, leader, v, VOTE_BYTES, vote_for=block)
            parent = self.blocks[block].parent or GENESIS.hash
            fake = self.make_block(parent, v, nid, f"fake-{phase}")
            self.sign(phase, v, fake.hash, nid)
            self.send(VOTE_KIND[phase], nid, leader, v, VOTE_BYTES, vote_for=fake.hash)
            return
        if (v, phase) in node.voted:
            return
        node.voted.add((v, phase))
        self.sign(phase, v, block, nid)
        if nid != leader:
            self.charge_replica(nid, v, phase)
        self.send(VOTE_KIND[phase], nid, leader, v, VOTE_BYTES, vote_for=block)

    def on_prepare(self, node: _Node, msg: SimMessage) -> None:
        v = msg.view
        if msg.sender != self.leader_of(v) or not self.qc_valid(msg.qc):
            return
        blk, high = msg.block, msg.qc
        if blk.parent != high.block or blk.view != v:
            return
        safe = self.extends(blk.hash, node.locked_qc.block) or high.view > node.locked_qc.view
        if not safe:
            return
        if not self.accept_view(node, v):
            return
        self.vote(node, "prepare", v, blk.hash)

    def on_phase_qc(self, node: _Node, msg: SimMessage, expect: str) -> None:
        v, qc = msg.view, msg.qc
        if msg.sender != self.leader_of(v) or qc.phase != expect or qc.view != v or not self.qc_valid(qc):
            return
        if not self.accept_view(node, v):
            return
        if expect == "prepare":
            if node.id in self.honest and qc.view > node.high_qc.view:
                node.high_qc = qc
            self.vote(node, "pre_commit", v, qc.block)
        elif expect == "pre_commit":
            if node.id in self.honest:
                node.locked_qc = qc
            self.vote(node, "commit", v, qc.block)

    def on_decide(self, node: _Node, msg: SimMessage) -> None:
        v, qc = msg.view, msg.qc
        if msg.sender != self.leader_of(v) or qc.phase != "commit" or qc.view != v or not self.qc_valid(qc):
            return
        if v < node.view:
            return
        if node.id not in self.honest:
            self.enter_view(node, v + 1, "decide")
            return
        chain = []
        cur = qc.block
        while cur is not None and self.blocks[cur].height > len(node.committed):
            chain.append(cur)
            cur = self.blocks[cur].parent
        for h in reversed(chain):
            node.committed.append(h)
            b = self.blocks[h]
            self.events.append({"t": self.now, "event": "commit", "node": node.id, "view": v,
                                "height": b.height, "block": h})
        if v in self.views and self.views[v].committed is None:
            self.views[v].committed = qc.block
        self.enter_view(node, v + 1, "decide")

    # -- loop ------------------------------------------------------------------
    def dispatch(self, msg: SimMessage) -> None:
        node = self.nodes[msg.recipient]
        self.events.append({"t": msg.deliver_at, "event": "deliver", "kind": msg.kind, "sender": msg.sender,
                            "recipient": msg.recipient, "view": msg.view, "size": msg.payload_size})
        if node.id in self.byz and self.plan.behavior == "silent":
            return
        k = msg.kind
        if k == "new_view":
            self.on_new_view(node, msg)
        elif k == "prepare":
            self.on_prepare(node, msg)
        elif k == "pre_commit":
            self.on_phase_qc(node, msg, "prepare")
        elif k == "commit":
            self.on_phase_qc(node, msg, "pre_commit")
        elif k == "decide":
            self.on_decide(node, msg)
        elif k == "vote_prepare":
            self.on_vote(node, msg, "prepare")
        elif k == "vote_precommit":
            self.on_vote(node, msg, "pre_commit")
        elif k == "vote_commit":
            self.on_vote(node, msg, "commit")

    def run(self) -> ConsensusRun:
        for m in self.members:
            self.enter_view(self.nodes[m], 1, "start")
        while self.queue:
            at, _, item = heapq.heappop(self.queue)
            self.now = at
            if isinstance(item, SimMessage):
                self.dispatch(item)
            else:
                _, nid, view, epoch = item
                node = self.nodes[nid]
                if node.stopped or node.view != view or node.timer_epoch != epoch:
                    continue
                if nid in self.byz and self.plan.behavior == "silent":
                    continue
                self.enter_view(node, view + 1, "timeout")
        return ConsensusRun(members=self.members, F=self.F, views=self.views,
                            commits={m: list(n.committed) for m, n in self.nodes.items() if m in self.honest},
                            events=self.events, ledger=self.ledger, honest=self.honest)


def _default_positions(members) -> dict:
    return {m: (100.0 * (i + 1), 0.0) for i, m in enumerate(members)}


def run_consensus(cset: ConsensusSet, plan: FaultPlan | None = None, net: LatencyModel | None = None,
                  rounds: int = 1, seed: int = 0, *, costs: ConsensusCostParams | None = None,
                  ch: ChannelParams | None = None, freqs: Mapping[str, float] | None = None,
                  positions: Mapping[str, tuple] | None = None, chain: str = "pv",
                  order=None) -> ConsensusRun:
    """Simulate ``rounds`` views of basic Hotstuff over the committee.

    Leaders rotate round-robin over ``order`` (default: ``cset.ranking`` if
    set, else the designated leader followed by the other members).
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    plan = plan or FaultPlan()
    if len(plan.byzantine_ids) > cset.max_faulty:
        raise ValueError("fault plan exceeds the committee's fault tolerance")
    if order is None:
        order = cset.ranking or (cset.leader, *cset.replicas)
    positions = dict(positions) if positions is not None else _default_positions(cset.members)
    for a in cset.members:
        for b in cset.members:
            if a != b and distance(positions[a], positions[b]) == 0:
                raise ValueError(f"coincident committee members {a}, {b}")
    sim = _Sim(cset, plan, net or LatencyModel(), rounds, seed, costs or ConsensusCostParams(),
               ch or ChannelParams(), freqs or {m: 2e9 for m in cset.members}, positions, chain, order)
    return sim.run()
