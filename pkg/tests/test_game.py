import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bpvec.consensus import consensus_total_energy
from bpvec.game import (InfeasibleInstance, OffloadInstance, best_response_iteration, build_instance,
                        closed_form_equilibrium, completion_times, m_coefficient, optimal_epsilon,
                        price_gradients, pv_price_response, pv_utility, rsu_price_response, rsu_utility,
                        rv_utility, solve_stackelberg)
from bpvec.scenario import BITS_PER_MB, GameSolverParams, RequestingVehicle, generate_scenario
from bpvec.selection import select_committee

from helpers import feasible_mask, grid_argmax, random_instance, random_prices, rv_utility_grid


def symmetric(**kw) -> OffloadInstance:
    rv = RequestingVehicle("rv", (0, 0), 4 * BITS_PER_MB, 0.2, 1.0)
    base = dict(rv=rv, gamma_pa=0.1, gamma_rsu=0.1, rate_to_pv_Rik=120.0, rate_to_rsu_Rij=120.0,
                pv_energy_terms=1e-9, rsu_energy_terms=1e-9, consensus_energy_pv_EpaBC=0.1,
                consensus_energy_rsu_ERSUBC=0.1, m_terms_pv=1e-10, m_terms_rsu=1e-10)
    base.update(kw)
    return OffloadInstance(**base)


seeds = st.integers(0, 2**32 - 1)


# -- completion times and utilities -----------------------------------------------


def test_completion_times():
    inst = symmetric(gamma_pa=0.08, gamma_rsu=0.12)
    assert completion_times(inst, 1.0)[0] == 0.0
    assert completion_times(inst, 0.0)[1] == 0.0
    t_pa, t_r = completion_times(inst, inst.eps_balance)
    assert t_pa == pytest.approx(t_r, rel=1e-15)
    with pytest.raises(ValueError):
        completion_times(inst, 1.5)


def test_rv_utility_vanishes():
    inst = symmetric(rv=RequestingVehicle("rv", (0, 0), 4 * BITS_PER_MB, 0.2, 1e-300), xi_v=0.0)
    inst = replace(inst, rv=replace(inst.rv, satisfaction_alpha=1.0))
    zero_alpha = replace(inst, rv=replace(inst.rv, satisfaction_alpha=1e-300))
    for e in np.linspace(0, 1, 11):
        assert abs(rv_utility(zero_alpha, e, 0.0, 0.0)) < 1e-300


def test_rv_utility_symmetric_about_half():
    inst = symmetric()
    for e in np.linspace(0, 0.5, 11):
        assert rv_utility(inst, e, 0.3, 0.3) == pytest.approx(rv_utility(inst, 1 - e, 0.3, 0.3), rel=1e-13)


@given(seeds)
def test_rv_utility_term_by_term(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng)
    p = random_prices(rng)[0]
    eps = rng.random(5)
    got = [rv_utility(inst, e, *p) for e in eps]
    assert np.allclose(got, rv_utility_grid(inst, eps, *p), rtol=1e-12, atol=1e-15)


def test_pv_rsu_utility_examples():
    inst = symmetric()
    d = inst.task_units
    assert pv_utility(inst, 1.0, 5.0) == pytest.approx(-inst.xi_v * inst.consensus_energy_pv_EpaBC)
    assert rsu_utility(inst, 0.0, 5.0) == pytest.approx(-inst.xi_r * inst.consensus_energy_rsu_ERSUBC)
    free = replace(inst, xi_v=0.0, xi_r=0.0)
    for e in (0.0, 0.3, 1.0):
        assert pv_utility(free, e, 0.7) == (1 - e) * d * 0.7
    plus = pv_utility(inst, 0.5, 0.7, "plus_as_printed") - pv_utility(inst, 0.5, 0.7, "minus_as_defined")
    assert plus == pytest.approx(2 * inst.xi_v * inst.consensus_energy_pv_EpaBC, rel=1e-12)


def test_pv_utility_with_consensus_energy_from_module():
    cfg = generate_scenario(1, 12, 2, seed=4)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g, cs = select_committee(cfg.pvs, cfg.parking, cfg.channel, cfg.selection)
    f = {p.id: p.cpu_freq_fpk for p in cfg.pvs}
    pos = {p.id: p.position for p in cfg.pvs}
    e_pa = consensus_total_energy(1, cs, cfg.channel, cfg.costs, f, pos)
    inst = build_instance(cfg.rvs[0], list(g.nodes), cfg.rsus, cfg.channel, cfg.costs, e_pa, 0.0)
    # recompute: payment - xi * (compute energy of half the task + per-RV consensus share)
    phi = np.array([pv.cpu_freq_fpk for pv in g.nodes])
    phi = phi / phi.sum()
    e_comp = sum(1e-27 * pv.cpu_freq_fpk**2 * ph * 24 for pv, ph in zip(g.nodes, phi)) * cfg.rvs[0].task_size_Dqi
    block = 4096
    expect = 0.5 * inst.task_units * 0.4 - cfg.costs.energy_unit_xi_v * (0.5 * e_comp + e_pa)
    assert e_pa == pytest.approx(consensus_total_energy(block, cs, cfg.channel, cfg.costs, f, pos) / block)
    assert pv_utility(inst, 0.5, 0.4) == pytest.approx(expect, rel=1e-12)


# -- follower --------------------------------------------------------------------


def test_symmetric_follower_is_balanced_half():
    e = optimal_epsilon(symmetric(), 0.3, 0.3)
    assert e.epsilon == 0.5 and e.regime == "balanced" and e.A == 0.0


def test_expensive_rsu_pushes_tasks_to_pvs():
    inst = symmetric(gamma_pa=0.08, gamma_rsu=0.1)
    e = optimal_epsilon(inst, 0.1, 50.0)
    assert e.epsilon < inst.eps_balance and e.regime == "pv_binding"
    assert abs(e.epsilon - grid_argmax(inst, 0.1, 50.0)) <= 5e-4


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_follower_matches_grid(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng)
    p = random_prices(rng)[0]
    assert abs(optimal_epsilon(inst, *p).epsilon - grid_argmax(inst, *p)) <= 5e-4


def test_follower_respects_deadlines():
    rng = np.random.default_rng(0)
    for _ in range(200):
        inst = random_instance(rng)
        e = optimal_epsilon(inst, *random_prices(rng)[0]).epsilon
        assert feasible_mask(inst, np.array([e]))[0]


def test_infeasible_deadline_signalled():
    inst = symmetric(rv=RequestingVehicle("rv", (0, 0), 4 * BITS_PER_MB, 0.01, 1.0))
    with pytest.raises(InfeasibleInstance):
        optimal_epsilon(inst, 0.1, 0.1)
    sol = solve_stackelberg(inst)
    assert not sol.feasible and not sol.converged and math.isnan(sol.epsilon_star)


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_concave_in_epsilon(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng)
    p = random_prices(rng)[0]
    h = 1e-3
    u = np.array([rv_utility(inst, e, *p) for e in np.arange(0, 1 + h / 2, h)])
    assert np.all(u[:-2] - 2 * u[1:-1] + u[2:] <= 1e-9)


# -- leader side ---------------------------------------------------------------------


def test_balanced_gradients():
    inst = symmetric()
    g = price_gradients(inst, 0.3, 0.3)
    assert g.deps_dpa == 0.0 and g.deps_drsu == 0.0
    assert g.d_pa == 0.5 * inst.task_units == g.d_rsu


def _fd(inst, p_pa, p_r, h):
    upa = lambda x: pv_utility(inst, optimal_epsilon(inst, x, p_r).epsilon, x)
    ur = lambda x: rsu_utility(inst, optimal_epsilon(inst, p_pa, x).epsilon, x)
    return (upa(p_pa + h) - upa(p_pa - h)) / (2 * h), (ur(p_r + h) - ur(p_r - h)) / (2 * h)


@given(seeds)
@settings(max_examples=60, deadline=None)
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng)
    p = random_prices(rng)[0]
    g = price_gradients(inst, *p)
    h = 1e-6 * min(p)
    fd = _fd(inst, *p, h)
    # skip points whose finite-difference stencil straddles a kink
    g_lo, g_hi = price_gradients(inst, p[0] - h, p[1]), price_gradients(inst, p[0] + h, p[1])
    if g.at_boundary or g_lo.deps_dpa != g_hi.deps_dpa:
        return
    assert fd[0] == pytest.approx(g.d_pa, rel=1e-5, abs=1e-12)
    r_lo, r_hi = price_gradients(inst, p[0], p[1] - h), price_gradients(inst, p[0], p[1] + h)
    if r_lo.deps_drsu == r_hi.deps_drsu:
        assert fd[1] == pytest.approx(g.d_rsu, rel=1e-5, abs=1e-12)


def test_closed_form_mirroring_and_ratio():
    zero_m = dict(m_terms_pv=0.0, m_terms_rsu=0.0, consensus_energy_pv_EpaBC=0.0, consensus_energy_rsu_ERSUBC=0.0)
    inst = symmetric(**zero_m)
    assert m_coefficient(inst) == 0.0
    cf = closed_form_equilibrium(inst, anchor_p_pa=0.7)
    assert cf.degenerate and cf.raw_p_rsu == pytest.approx(0.7)
    inst2 = symmetric(gamma_pa=0.05, gamma_rsu=0.1, **zero_m)
    assert rsu_price_response(inst2, 0.3) == pytest.approx(0.6, rel=1e-15)


@given(seeds)
@settings(max_examples=50, deadline=None)
def test_closed_form_solves_the_linear_pair(seed):
    inst = random_instance(np.random.default_rng(seed))
    g_pa, g_r, d, M = inst.gamma_pa, inst.gamma_rsu, inst.task_units, m_coefficient(inst)
    if abs(g_pa - g_r) < 1e-6:
        return
    # p_rsu - (g_r/g_pa) p_pa = -(g_r+g_pa) M / (d g_pa);  p_pa - (g_r/g_pa) p_rsu = (g_r+g_pa) M / (d g_r)
    A = np.array([[-g_r / g_pa, 1.0], [1.0, -g_r / g_pa]])
    b = np.array([-(g_r + g_pa) * M / (d * g_pa), (g_r + g_pa) * M / (d * g_r)])
    x = np.linalg.solve(A, b)
    cf = closed_form_equilibrium(inst)
    assert cf.raw_p_pa == pytest.approx(x[0], rel=1e-8, abs=1e-12)
    assert cf.raw_p_rsu == pytest.approx(x[1], rel=1e-8, abs=1e-12)
    assert rsu_price_response(inst, cf.raw_p_pa) == pytest.approx(cf.raw_p_rsu, abs=1e-6)
    assert pv_price_response(inst, cf.raw_p_rsu) == pytest.approx(cf.raw_p_pa, abs=1e-6)
    assert cf.p_pa >= 0.1 and cf.p_rsu >= 0.1


def test_regional_equilibrium_when_balance_is_lopsided():
    # with eps_bal well below 1/3 the price game has an interior equilibrium,
    # and exact best responses find the same one from any start
    rng = np.random.default_rng(21)
    found = 0
    for _ in range(40):
        inst = random_instance(rng, gamma_pa=0.04, gamma_rsu=0.25,
                               rv=RequestingVehicle("rv", (0, 0), 4 * BITS_PER_MB, 0.3, 1.0))
        ends = [best_response_iteration(inst, *p) for p in random_prices(rng, 10)]
        if all(e.converged for e in ends):
            found += 1
            pairs = np.array([[e.p_pa, e.p_rsu] for e in ends])
            assert np.ptp(pairs, axis=0).max() <= 1e-3
    assert found >= 30


# -- iterative solver---------------------------------------------------------------


def test_symmetric_instance_solution():
    sol = solve_stackelberg(symmetric())
    assert sol.converged and sol.epsilon_star == 0.5
    assert sol.p_pa_star == pytest.approx(sol.p_rsu_star, rel=1e-14)


def test_solution_invariants_on_random_instances():
    rng = np.random.default_rng(5)
    params = GameSolverParams()
    for _ in range(100):
        inst = random_instance(rng)
        sol = solve_stackelberg(inst, params)
        assert 0 <= sol.epsilon_star <= 1
        assert sol.p_pa_star >= 0.1 and sol.p_rsu_star >= 0.1
        assert sol.iterations <= params.max_iters


def test_initialization_does_not_change_result():
    rng = np.random.default_rng(6)
    for _ in range(100):
        inst = random_instance(rng)
        a = solve_stackelberg(inst)
        # +-20% around the documented starting point (0.5, 0.2, 0.5)
        b = solve_stackelberg(inst, epsilon0=0.5 * rng.uniform(0.8, 1.2), p_pa0=0.2 * rng.uniform(0.8, 1.2),
                              p_rsu0=0.5 * rng.uniform(0.8, 1.2))
        assert a.converged and b.converged
        assert abs(a.p_pa_star - b.p_pa_star) <= 1e-3 and abs(a.p_rsu_star - b.p_rsu_star) <= 1e-3


def test_iteration_cap_reports_not_converged():
    sol = solve_stackelberg(random_instance(np.random.default_rng(1)), GameSolverParams(max_iters=1))
    assert not sol.converged and sol.iterations == 1


def _grid_gain(profit, p0, floor=0.1):
    grid = np.concatenate([np.linspace(floor, 3 * p0 + 1, 400), p0 * np.linspace(0.5, 1.5, 201)])
    grid = grid[grid >= floor]
    base = profit(p0)
    best = max(profit(p) for p in grid)
    return (best - base) / max(abs(base), 1e-12)


def test_solver_output_is_mutual_best_response():
    """Neither leader can improve its utility by more than 1e-4 (relative) alone."""
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        inst = random_instance(rng)
        s = solve_stackelberg(inst)
        gain_pa = _grid_gain(lambda p: pv_utility(inst, optimal_epsilon(inst, p, s.p_rsu_star).epsilon, p),
                             s.p_pa_star)
        gain_r = _grid_gain(lambda p: rsu_utility(inst, optimal_epsilon(inst, s.p_pa_star, p).epsilon, p),
                            s.p_rsu_star)
        worst = max(worst, gain_pa, gain_r)
    assert worst <= 1e-4, f"a unilateral price change improves a leader by {worst:.3g} (relative)"
