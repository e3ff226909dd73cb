import warnings

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bpvec.scenario import (ChannelParams, ParkedVehicle, ParkingMixtureTable, SelectionParams,
                            generate_scenario)
from bpvec.selection import (DisconnectedGraphWarning, PvGraph, build_graph, filter_by_stay,
                             select_baseline, select_cds, select_committee, select_top_quality)

CH = ChannelParams()


def graph_from_nx(G: nx.Graph, quality=None, seed: int = 0) -> PvGraph:
    n = G.number_of_nodes()
    rng = np.random.default_rng(seed)
    adj = nx.to_numpy_array(G, nodelist=range(n)).astype(bool)
    q = rng.random(n) if quality is None else np.asarray(quality, float)
    nodes = tuple(ParkedVehicle(f"pv{i:02d}", (float(i), 0.0), 1e9) for i in range(n))
    return PvGraph(nodes=nodes, adjacency=adj, snr=adj.astype(float), quality=q / q.sum())


def random_connected(n: int, seed: int) -> nx.Graph:
    rng = np.random.default_rng(seed)
    while True:
        G = nx.gnp_random_graph(n, float(rng.uniform(0.1, 0.5)), seed=int(rng.integers(2**31)))
        if nx.is_connected(G):
            return G


def cds_ok(G: nx.Graph, g: PvGraph, members) -> bool:
    idx = [g.ids.index(m) for m in members]
    return nx.is_dominating_set(G, idx) and nx.is_connected(G.subgraph(idx))


def test_complete_graph_single_head():
    g = graph_from_nx(nx.complete_graph(4), quality=[0.1, 0.4, 0.3, 0.2])
    cs = select_cds(g)
    assert cs.members == ("pv01",) and cs.leader == "pv01"


def test_path_center_dominates():
    g = graph_from_nx(nx.path_graph(3), quality=[0.3, 0.4, 0.3])
    assert select_cds(g).members == ("pv01",)


@pytest.mark.parametrize("seed", range(100))
def test_cds_on_random_12_node_graphs(seed):
    G = random_connected(12, seed)
    g = graph_from_nx(G, seed=seed)
    cs = select_cds(g)
    assert cds_ok(G, g, cs.members)
    assert cs.leader == max(cs.members, key=lambda m: (g.quality[g.ids.index(m)], -g.ids.index(m)))


def test_relabeling_invariance():
    G = random_connected(15, 7)
    q = np.random.default_rng(7).random(15)
    perm = np.random.default_rng(8).permutation(15)
    g1 = graph_from_nx(G, quality=q)
    G2 = nx.relabel_nodes(G, {i: int(perm[i]) for i in range(15)})
    q2 = np.empty(15)
    q2[perm] = q
    g2 = graph_from_nx(G2, quality=q2)
    m1 = {int(m[2:]) for m in select_cds(g1).members}
    m2 = {int(m[2:]) for m in select_cds(g2).members}
    assert {int(perm[i]) for i in m1} == m2  # qualities distinct, so no tie-break involved


def test_disconnected_graph_warns_per_component():
    G = nx.disjoint_union(nx.path_graph(3), nx.path_graph(3))
    g = graph_from_nx(G, quality=[1, 2, 1, 1, 2, 1])
    with pytest.warns(DisconnectedGraphWarning):
        cs = select_cds(g)
    assert cs.disconnected and set(cs.members) == {"pv01", "pv04"}


def _pvs(positions, freqs=None, since=0.0):
    freqs = freqs or [1.5e9] * len(positions)
    return [ParkedVehicle(f"pv{i}", p, f, parked_since_tpk=since) for i, (p, f) in enumerate(zip(positions, freqs))]


def test_build_graph_quality():
    g = build_graph(_pvs([(0, 0), (100, 0)]), CH, SelectionParams())
    assert np.allclose(g.quality, [0.5, 0.5])
    assert g.adjacency.tolist() == [[False, True], [True, False]]
    pvs = _pvs([(0, 0), (50, 30), (300, 10), (120, 200), (90, 90)], [1e9, 1.2e9, 2e9, 2.5e9, 1.7e9])
    g = build_graph(pvs, CH, SelectionParams(weight_w1=0.0, weight_w2=1.0))
    f = np.array([pv.cpu_freq_fpk for pv in pvs])
    assert np.allclose(g.quality, f / f.sum(), rtol=0, atol=1e-15)
    g = build_graph(pvs, CH, SelectionParams())
    assert abs(g.quality.sum() - 1) <= 1e-9
    assert np.array_equal(g.adjacency, g.adjacency.T) and not g.adjacency.diagonal().any()
    with pytest.raises(ValueError):
        build_graph([], CH, SelectionParams())


def test_adjacency_matches_snr_threshold():
    params = SelectionParams()
    pvs = _pvs([(0, 0), (299, 0), (0, 301)])
    g = build_graph(pvs, CH, params)
    assert g.adjacency[0, 1] and not g.adjacency[0, 2]


def test_filter_by_stay():
    from bpvec.scenario import ParkingRow
    long_stays = ParkingMixtureTable(rows=(ParkingRow(1.0, 8 * 3600.0, 1.0, 8 * 3600.0, 1.0, 0.0),) * 24)
    pvs = _pvs([(0, 0), (10, 0)])
    assert len(filter_by_stay(pvs, long_stays, SelectionParams())) == 2  # fresh arrivals
    # default mixture: a fresh arrival is probably a short-stayer (p_stay ~ 0.940)...
    assert filter_by_stay(pvs, ParkingMixtureTable(), SelectionParams()) == []
    # ...one parked for an hour probably is not (p_stay ~ 0.977)
    assert len(filter_by_stay(_pvs([(0, 0)], since=3600.0), ParkingMixtureTable(), SelectionParams())) == 1
    assert len(filter_by_stay(pvs, ParkingMixtureTable(), SelectionParams(stay_threshold_pth=1e-12))) == 2
    # exponential half-hour stays: a 3-minute horizon leaves p_stay = exp(-0.1) ~ 0.905
    short = ParkingMixtureTable(rows=(ParkingRow(1.0, 1800.0, 1.0, 1800.0, 1.0, 0.0),) * 24)
    assert filter_by_stay(pvs, short, SelectionParams()) == []


@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0))
@settings(max_examples=25, deadline=None)
def test_raising_threshold_never_grows_set(a, b):
    cfg = generate_scenario(1, 25, 1, seed=3)
    lo, hi = sorted((a, b))
    s_lo = filter_by_stay(cfg.pvs, cfg.parking, SelectionParams(stay_threshold_pth=lo))
    s_hi = filter_by_stay(cfg.pvs, cfg.parking, SelectionParams(stay_threshold_pth=hi))
    assert set(p.id for p in s_hi) <= set(p.id for p in s_lo)


def test_baselines():
    pvs = _pvs([(0, 0), (50, 0), (100, 0), (150, 0)], [1e9, 2.4e9, 1.1e9, 1.3e9])
    g = build_graph(pvs, CH, SelectionParams())
    assert select_baseline(g, "capacity_only", 1).members == ("pv1",)
    assert select_baseline(g, "random", 2, seed=4) == select_baseline(g, "random", 2, seed=4)
    with pytest.raises(ValueError):
        select_baseline(g, "random", 5)


def test_communication_only_picks_star_hub():
    hub = (0.0, 0.0)
    leaves = [(200 * np.cos(a), 200 * np.sin(a)) for a in np.linspace(0, 2 * np.pi, 6, endpoint=False)]
    g = build_graph(_pvs([*leaves, hub]), CH, SelectionParams())
    # hub: six links at 200 m; each leaf: one link at 200 m plus longer ones
    assert g.snr[6].sum() > g.snr[:6].sum(axis=1).max()
    assert select_baseline(g, "communication_only", 1).members == ("pv6",)


def test_top_quality_pads_cds():
    G = random_connected(20, 3)
    g = graph_from_nx(G, seed=3)
    cds = select_cds(g)
    for n in range(1, 21):
        cs = select_top_quality(g, n)
        assert cs.size == n
        if n >= cds.size:
            assert set(cds.members) <= set(cs.members)


def test_select_committee_end_to_end():
    cfg = generate_scenario(1, 30, 1, seed=11)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DisconnectedGraphWarning)
        g, cs = select_committee(cfg.pvs, cfg.parking, cfg.channel, cfg.selection)
    assert set(cs.members) <= set(g.ids) and cs.leader in cs.members
