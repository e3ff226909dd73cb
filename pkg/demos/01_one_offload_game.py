"""
One requesting vehicle, one round of pricing
============================================

Builds the default scenario, picks a committee of parked vehicles, and
solves the leader/follower pricing game for the first requesting vehicle.
"""
import warnings

import numpy as np

from bpvec.consensus import consensus_total_energy
from bpvec.experiments import DEFAULT_SCENARIO
from bpvec.game import build_instance, optimal_epsilon, rv_utility, solve_stackelberg
from bpvec.scenario import load_scenario
from bpvec.selection import select_committee

cfg = load_scenario(DEFAULT_SCENARIO)
pvs, rsus = cfg.pvs[:10], cfg.rsus[:3]

# vehicles expected to leave soon are dropped before the graph is built
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    graph, committee = select_committee(pvs, cfg.parking, cfg.channel, cfg.selection)
print("computing PVs:", len(graph.nodes), " committee:", committee.members, " leader:", committee.leader)

freqs = {p.id: p.cpu_freq_fpk for p in pvs}
where = {p.id: p.position for p in pvs}
e_pa = consensus_total_energy(1, committee, cfg.channel, cfg.costs, freqs, where)
print(f"consensus energy charged per task: {e_pa:.3e} J")

rv = cfg.rvs[0]
inst = build_instance(rv, list(graph.nodes), rsus, cfg.channel, cfg.costs, e_pa, 0.0,
                      price_unit_bits=cfg.game.price_unit_bits)

# the follower alone: utility is concave in the split, so the ratio is a clean peak
eps = np.linspace(0, 1, 11)
u = [rv_utility(inst, e, 0.5, 0.5) for e in eps]
print("u_rv(eps) at equal prices:", np.round(u, 4))
best = optimal_epsilon(inst, 0.5, 0.5)
print(f"best split at equal prices: eps={best.epsilon:.4f} ({best.regime})")

sol = solve_stackelberg(inst, cfg.game)
print(f"eps*={sol.epsilon_star:.4f}  p_pa*={sol.p_pa_star:.4f}  p_rsu*={sol.p_rsu_star:.4f}  "
      f"regime={sol.regime}  iterations={sol.iterations}")
print(f"utilities: rv {sol.u_rv:.4f}  pv {sol.u_pv:.3e}  rsu {sol.u_rsu:.3e}")
