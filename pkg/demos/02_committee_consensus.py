"""
Committee selection and a few views of Hotstuff
===============================================

A connected dominating set of the parked-vehicle graph forms the committee.
We then run the protocol with one Byzantine replica and tally its cost.
"""
import warnings

from bpvec.consensus import FaultPlan, check_safety, consensus_total_energy, pbft_baseline_energy, run_consensus
from bpvec.scenario import generate_scenario
from bpvec.selection import select_baseline, select_committee

cfg = generate_scenario(n_rv=1, n_pv=25, n_rsu=1, seed=3)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    g, cds = select_committee(cfg.pvs, cfg.parking, cfg.channel, cfg.selection)
print(f"{len(g.nodes)} PVs pass the stay filter; CDS has {cds.size} members, heads {cds.heads}")

for strategy in ("random", "capacity_only", "communication_only"):
    alt = select_baseline(g, strategy, cds.size, seed=0)
    print(f"{strategy:>18}: {alt.members}")

freqs = {p.id: p.cpu_freq_fpk for p in cfg.pvs}
where = {p.id: p.position for p in cfg.pvs}
block = cfg.costs.tx_per_block
print(f"one block, Hotstuff: {consensus_total_energy(block, cds, cfg.channel, cfg.costs, freqs, where):.3f} J")
print(f"one block, PBFT:     {pbft_baseline_energy(cds, cfg.channel, cfg.costs, freqs, where, block):.3f} J")

# the CDS here is too small to tolerate a fault, so take a 7-member committee instead
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    _, big = select_committee(cfg.pvs, cfg.parking, cfg.channel, cfg.selection, size_n=7)
bad = big.replicas[:big.max_faulty]
run = run_consensus(big, FaultPlan.build(big, bad, "equivocate"), rounds=4, seed=1,
                    costs=cfg.costs, ch=cfg.channel, freqs=freqs, positions=where)
# views led by an equivocating node may be lost; safety is what matters
print("equivocating", bad, "-> committed views", run.committed_views, "conflicts", check_safety(run.events))
print(f"ledger: compute {run.ledger.compute_energy_Ev:.3f} J, radio {run.ledger.tx_energy_ET:.4f} J")
