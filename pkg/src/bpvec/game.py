"""Two-stage pricing/offloading game between PVs, RSUs and one requesting vehicle.

Stage two: the RV splits its task, a fraction ``eps`` to the RSUs and
``1 - eps`` to the PVs, maximizing a concave utility.  Stage one: the PV
coalition and the RSUs each set a price per unit of task.

Units: times in seconds, task sizes in bits, rates in MB/s, energy in
joules.  Prices are per ``price_unit_bits`` of task (one MB by default), so
the payment for the whole task is ``D / price_unit_bits * p``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .channel import rate
from .scenario import (BITS_PER_GB, BITS_PER_MB, ChannelParams, ConsensusCostParams, GameSolverParams,
                       ParkedVehicle, RequestingVehicle, Rsu, compute_capacity_shares)

REGIMES = ("pv_binding", "rsu_binding", "balanced")

# Algorithm start point, also used as the reference start for uniqueness checks
INITIAL_EPSILON = 0.5
INITIAL_P_PA = 0.2
INITIAL_P_RSU = 0.5


class InfeasibleInstance(ValueError):
    """No offloading ratio meets both completion-time deadlines."""


@dataclass(frozen=True)
class OffloadInstance:
    rv: RequestingVehicle
    gamma_pa: float  # s per unit of (1 - eps)
    gamma_rsu: float  # s per unit of eps
    rate_to_pv_Rik: float  # MB/s, the PV link attaining gamma_pa
    rate_to_rsu_Rij: float  # MB/s, the RSU link attaining gamma_rsu
    pv_energy_terms: float  # sum_k kappa_v f^2 phi C, J per bit of task
    rsu_energy_terms: float
    consensus_energy_pv_EpaBC: float  # J charged per RV
    consensus_energy_rsu_ERSUBC: float
    tx_power_Pt: float = 0.28183815
    xi_v: float = 1e-6
    xi_r: float = 1e-6
    price_unit_bits: float = BITS_PER_GB
    # sum kappa phi f^2 without the cycles-per-bit factor, as M_i is written
    m_terms_pv: float = 0.0
    m_terms_rsu: float = 0.0
    tx_per_block: int = 4096

    def __post_init__(self):
        if not (self.gamma_pa > 0 and self.gamma_rsu > 0):
            raise ValueError("gamma values must be > 0")
        if not (self.rate_to_pv_Rik > 0 and self.rate_to_rsu_Rij > 0):
            raise ValueError("rates must be > 0")

    @property
    def task_units(self) -> float:
        """Task size in price units (GB by default)."""
        return self.rv.task_size_Dqi / self.price_unit_bits

    @property
    def alpha(self) -> float:
        return self.rv.satisfaction_alpha

    @property
    def t_max(self) -> float:
        return self.rv.max_tolerance_Tmaxi

    @property
    def eps_balance(self) -> float:
        return self.gamma_pa / (self.gamma_pa + self.gamma_rsu)

    @property
    def pv_task_energy(self) -> float:
        """Compute energy if the whole task ran on the PVs."""
        return self.rv.task_size_Dqi * self.pv_energy_terms

    @property
    def rsu_task_energy(self) -> float:
        return self.rv.task_size_Dqi * self.rsu_energy_terms

    def feasible_interval(self) -> tuple[float, float]:
        lo = max(0.0, 1.0 - self.t_max / self.gamma_pa)
        hi = min(1.0, self.t_max / self.gamma_rsu)
        return lo, hi


@dataclass(frozen=True)
class EpsilonStar:
    epsilon: float
    regime: str
    pinned: bool  # held by a deadline or by [0, 1]; locally insensitive to prices
    A: float

    def __post_init__(self):
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "A", float(self.A))


@dataclass(frozen=True)
class PriceGradients:
    d_pa: float  # dU_pa / dp_pa
    d_rsu: float  # dU_rsu / dp_rsu
    deps_dpa: float
    deps_drsu: float
    at_boundary: bool


@dataclass(frozen=True)
class ClosedForm:
    p_pa: float
    p_rsu: float
    raw_p_pa: float
    raw_p_rsu: float
    clamped: bool
    degenerate: bool  # gamma_pa == gamma_rsu: a line of solutions, anchored on p_pa


@dataclass(frozen=True)
class OffloadSolution:
    epsilon_star: float
    p_pa_star: float
    p_rsu_star: float
    u_rv: float
    u_pv: float
    u_rsu: float
    regime: str
    iterations: int
    converged: bool
    feasible: bool = True
    floor_clamped: bool = False

    def __post_init__(self):
        for name in ("epsilon_star", "p_pa_star", "p_rsu_star", "u_rv", "u_pv", "u_rsu"):
            object.__setattr__(self, name, float(getattr(self, name)))


# ---------------------------------------------------------------------------
# instance construction
# ---------------------------------------------------------------------------


def _gamma(D: float, shares, cycles, freqs, rates_mbps) -> tuple[float, int]:
    per = [D * (phi * c / f + 1.0 / (r * BITS_PER_MB))
           for phi, c, f, r in zip(shares, cycles, freqs, rates_mbps)]
    k = int(np.argmax(per))
    return per[k], k


def build_instance(rv: RequestingVehicle, pvs: Sequence[ParkedVehicle], rsus: Sequence[Rsu],
                   ch: ChannelParams, costs: ConsensusCostParams, e_pa_bc: float, e_rsu_bc: float,
                   *, price_unit_bits: float = BITS_PER_GB, rate_pa: float | None = None,
                   rate_rsu: float | None = None) -> OffloadInstance:
    """Aggregate the providers into the per-RV coefficients.

    ``rate_pa``/``rate_rsu`` (MB/s) replace every RV-to-PV or RV-to-RSU link
    rate when given, which is how rate sweeps are run.
    """
    phi_p, phi_r = compute_capacity_shares(pvs, rsus)
    f_p = [pv.cpu_freq_fpk for pv in pvs]
    f_r = [r.cpu_freq_frj for r in rsus]
    c_p = [pv.cycles_per_bit_Cpk for pv in pvs]
    c_r = [r.cycles_per_bit_Crj for r in rsus]
    r_p = [rate_pa if rate_pa is not None else rate(rv.position, pv.position, ch) for pv in pvs]
    r_r = [rate_rsu if rate_rsu is not None else rate(rv.position, r.position, ch) for r in rsus]
    D = rv.task_size_Dqi
    g_pa, k = _gamma(D, phi_p, c_p, f_p, r_p)
    g_r, j = _gamma(D, phi_r, c_r, f_r, r_r)
    kv, kr = costs.cap_switch_kv, costs.cap_switch_kr
    return OffloadInstance(
        rv=rv, gamma_pa=g_pa, gamma_rsu=g_r, rate_to_pv_Rik=r_p[k], rate_to_rsu_Rij=r_r[j],
        pv_energy_terms=float(sum(kv * f**2 * phi * c for f, phi, c in zip(f_p, phi_p, c_p))),
        rsu_energy_terms=float(sum(kr * f**2 * phi * c for f, phi, c in zip(f_r, phi_r, c_r))),
        consensus_energy_pv_EpaBC=e_pa_bc, consensus_energy_rsu_ERSUBC=e_rsu_bc,
        tx_power_Pt=ch.tx_power_Pt, xi_v=costs.energy_unit_xi_v, xi_r=costs.energy_unit_xi_r,
        price_unit_bits=price_unit_bits,
        m_terms_pv=float(sum(kv * phi * f**2 for f, phi in zip(f_p, phi_p))),
        m_terms_rsu=float(sum(kr * phi * f**2 for f, phi in zip(f_r, phi_r))),
        tx_per_block=costs.tx_per_block,
    )


# ---------------------------------------------------------------------------
# utilities
# ---------------------------------------------------------------------------


def _check_eps(epsilon: float) -> None:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")


def completion_times(inst: OffloadInstance, epsilon: float) -> tuple[float, float]:
    _check_eps(epsilon)
    return (1.0 - epsilon) * inst.gamma_pa, epsilon * inst.gamma_rsu


def _tx_seconds(inst: OffloadInstance) -> tuple[float, float]:
    D_mb = inst.rv.task_size_Dqi / BITS_PER_MB
    return D_mb / inst.rate_to_pv_Rik, D_mb / inst.rate_to_rsu_Rij


def rv_utility(inst: OffloadInstance, epsilon: float, p_pa: float, p_rsu: float) -> float:
    t_pa, t_r = completion_times(inst, epsilon)
    T = max(t_pa, t_r)
    d = inst.task_units
    s_pv, s_r = _tx_seconds(inst)
    comm = inst.xi_v * inst.tx_power_Pt * (epsilon * s_r + (1.0 - epsilon) * s_pv)
    return (inst.alpha * (inst.t_max - T**2) - (1.0 - epsilon) * d * p_pa
            - epsilon * d * p_rsu - comm)


def _consensus_sign(mode: str) -> float:
    if mode == "minus_as_defined":
        return -1.0
    if mode == "plus_as_printed":
        return 1.0
    raise ValueError(f"unknown consensus_term_sign {mode!r}")


def pv_utility(inst: OffloadInstance, epsilon: float, p_pa: float,
               consensus_term_sign: str = "minus_as_defined") -> float:
    _check_eps(epsilon)
    share = 1.0 - epsilon
    return (share * inst.task_units * p_pa - inst.xi_v * share * inst.pv_task_energy
            + _consensus_sign(consensus_term_sign) * inst.xi_v * inst.consensus_energy_pv_EpaBC)


def rsu_utility(inst: OffloadInstance, epsilon: float, p_rsu: float,
                consensus_term_sign: str = "minus_as_defined") -> float:
    _check_eps(epsilon)
    return (epsilon * inst.task_units * p_rsu - inst.xi_r * epsilon * inst.rsu_task_energy
            + _consensus_sign(consensus_term_sign) * inst.xi_r * inst.consensus_energy_rsu_ERSUBC)


# ---------------------------------------------------------------------------
# stage two: offloading ratio
# ---------------------------------------------------------------------------


def marginal_A(inst: OffloadInstance, p_pa: float, p_rsu: float) -> float:
    """dU_rv/deps without the satisfaction term: PV-side cost minus RSU-side cost."""
    d = inst.task_units
    s_pv, s_r = _tx_seconds(inst)
    xp = inst.xi_v * inst.tx_power_Pt
    return (d * p_pa + xp * s_pv) - (d * p_rsu + xp * s_r)


def _curvatures(inst: OffloadInstance) -> tuple[float, float]:
    return 2 * inst.alpha * inst.gamma_pa**2, 2 * inst.alpha * inst.gamma_rsu**2


def _eps_unconstrained(inst: OffloadInstance, A: float) -> tuple[float, str]:
    a, r = _curvatures(inst)
    e = inst.eps_balance
    if A < -a * (1 - e):
        return max(0.0, 1.0 + A / a), "pv_binding"
    if A > r * e:
        return min(1.0, A / r), "rsu_binding"
    return e, "balanced"


def _eps_of_A(inst: OffloadInstance, A: float) -> float:
    lo, hi = inst.feasible_interval()
    return min(hi, max(lo, _eps_unconstrained(inst, A)[0]))


def _regime_of(inst: OffloadInstance, epsilon: float, rtol: float = 1e-9) -> str:
    t_pa, t_r = (1.0 - epsilon) * inst.gamma_pa, epsilon * inst.gamma_rsu
    top = max(t_pa, t_r)
    if top == 0 or abs(t_pa - t_r) <= rtol * top:
        return "balanced"
    return "pv_binding" if t_pa > t_r else "rsu_binding"


def optimal_epsilon(inst: OffloadInstance, p_pa: float, p_rsu: float,
                    rtol: float = 1e-9, *, deadlines: bool = True) -> EpsilonStar:
    """Utility-maximizing offloading ratio under both deadlines.

    The utility is concave in ``eps`` with a kink at the balance point, so
    the constrained maximizer is the unconstrained one clipped to the
    deadline-feasible interval.
    """
    if p_pa < 0 or p_rsu < 0:
        raise ValueError("prices must be >= 0")
    lo, hi = inst.feasible_interval() if deadlines else (0.0, 1.0)
    if lo > hi:
        raise InfeasibleInstance(
            f"deadline {inst.t_max:g}s unreachable: need eps >= {lo:.6g} and <= {hi:.6g}")
    A = marginal_A(inst, p_pa, p_rsu)
    unc, region = _eps_unconstrained(inst, A)
    eps = min(hi, max(lo, unc))
    pinned = eps != unc or (region != "balanced" and unc in (0.0, 1.0))
    regime = "balanced" if region == "balanced" and not pinned else _regime_of(inst, eps, rtol)
    return EpsilonStar(epsilon=eps, regime=regime, pinned=pinned, A=A)


def _A_breakpoints(inst: OffloadInstance) -> list[float]:
    a, r = _curvatures(inst)
    e = inst.eps_balance
    lo, hi = inst.feasible_interval()
    pts = {-a, -a * (1 - e), r * e, r, a * (lo - 1), a * (hi - 1), r * lo, r * hi}
    return sorted(pts)


def price_gradients(inst: OffloadInstance, p_pa: float, p_rsu: float,
                    epsilon_fn: Callable = optimal_epsilon, *, rtol: float = 1e-9) -> PriceGradients:
    """Analytic dU_pa/dp_pa and dU_rsu/dp_rsu at the follower's best response.

    In the PV-binding region eps = 1 + A / (2 alpha G_pa^2), in the
    RSU-binding region eps = A / (2 alpha G_rsu^2), and dA/dp_pa = -dA/dp_rsu
    = D.  A balanced or pinned ratio does not move with prices.
    """
    est = epsilon_fn(inst, p_pa, p_rsu)
    d = inst.task_units
    a, r = _curvatures(inst)
    if est.pinned or est.regime == "balanced":
        slope = 0.0
    elif est.regime == "pv_binding":
        slope = 1.0 / a
    else:
        slope = 1.0 / r
    de_pa, de_r = slope * d, -slope * d
    eps = est.epsilon
    g_pa = (1 - eps) * d - d * p_pa * de_pa + inst.xi_v * inst.pv_task_energy * de_pa
    g_r = eps * d + d * p_rsu * de_r - inst.xi_r * inst.rsu_task_energy * de_r
    scale = max(a, r)
    boundary = any(abs(est.A - bp) <= rtol * max(scale, abs(bp)) for bp in _A_breakpoints(inst))
    return PriceGradients(d_pa=g_pa, d_rsu=g_r, deps_dpa=de_pa, deps_drsu=de_r, at_boundary=boundary)


def finite_difference_gradients(inst: OffloadInstance, p_pa: float, p_rsu: float,
                                sign: str = "minus_as_defined", h: float = 1e-7,
                                one_sided: bool = False) -> tuple[float, float]:
    def upa(x):
        return pv_utility(inst, optimal_epsilon(inst, x, p_rsu).epsilon, x, sign)

    def ursu(x):
        return rsu_utility(inst, optimal_epsilon(inst, p_pa, x).epsilon, x, sign)

    if one_sided:
        return (upa(p_pa + h) - upa(p_pa)) / h, (ursu(p_rsu + h) - ursu(p_rsu)) / h
    return ((upa(p_pa + h) - upa(p_pa - h)) / (2 * h),
            (ursu(p_rsu + h) - ursu(p_rsu - h)) / (2 * h))


# ---------------------------------------------------------------------------
# stage one: best responses
# ---------------------------------------------------------------------------


def _eps_pieces(inst: OffloadInstance) -> list[tuple[float, float, float, float]]:
    """eps as a function of A: list of (A_from, A_to, slope, intercept)."""
    bps = _A_breakpoints(inst)
    edges = [-math.inf, *bps, math.inf]
    pieces = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        if math.isinf(lo) and math.isinf(hi):
            x0, x1 = -1.0, 1.0
        elif math.isinf(lo):
            x0, x1 = hi - 2.0, hi - 1.0
        elif math.isinf(hi):
            x0, x1 = lo + 1.0, lo + 2.0
        else:
            x0, x1 = lo + (hi - lo) / 3, lo + 2 * (hi - lo) / 3
        e0, e1 = _eps_of_A(inst, x0), _eps_of_A(inst, x1)
        s = (e1 - e0) / (x1 - x0)
        pieces.append((lo, hi, s, e0 - s * x0))
    return pieces


def _best_price(profit, pieces, p_of_A, stationary, floor: float) -> float:
    """Maximize a piecewise-quadratic profit over p >= floor; inf if unbounded."""
    cands = [floor]
    for a0, a1, s, t in pieces:
        p_lo, p_hi = sorted((p_of_A(a0), p_of_A(a1)))
        p_lo = max(p_lo, floor)
        if p_hi < floor:
            continue
        if math.isinf(p_hi):
            # profit on the last piece grows without bound unless it bends down
            if s == 0.0 and profit(p_lo + 1.0) > profit(p_lo):
                return math.inf
        for p in (p_lo, p_hi):
            if math.isfinite(p):
                cands.append(p)
        if s != 0.0:
            p = stationary(s, t)
            if p_lo <= p <= p_hi:
                cands.append(p)
    return max(cands, key=lambda p: (profit(p), -p))


def best_response_pv(inst: OffloadInstance, p_rsu: float, floor: float = 0.1,
                     sign: str = "minus_as_defined") -> float:
    """argmax over p_pa of the PV utility with eps at the follower's optimum."""
    d = inst.task_units
    b = marginal_A(inst, 0.0, 0.0)
    c = inst.xi_v * inst.pv_task_energy

    def stationary(s, t):
        return (s * c + 1 - t + s * d * p_rsu - s * b) / (2 * s * d)

    return _best_price(lambda p: pv_utility(inst, _eps_of_A(inst, d * (p - p_rsu) + b), p, sign),
                       _eps_pieces(inst), lambda A: (A - b) / d + p_rsu, stationary, floor)


def best_response_rsu(inst: OffloadInstance, p_pa: float, floor: float = 0.1,
                      sign: str = "minus_as_defined") -> float:
    d = inst.task_units
    b = marginal_A(inst, 0.0, 0.0)
    c = inst.xi_r * inst.rsu_task_energy

    def stationary(s, t):
        return (s * c + s * d * p_pa + s * b + t) / (2 * s * d)

    return _best_price(lambda p: rsu_utility(inst, _eps_of_A(inst, d * (p_pa - p) + b), p, sign),
                       _eps_pieces(inst), lambda A: p_pa + (b - A) / d, stationary, floor)


@dataclass(frozen=True)
class BestResponsePath:
    p_pa: float
    p_rsu: float
    rounds: int
    converged: bool
    diverged: bool


def best_response_iteration(inst: OffloadInstance, p_pa: float, p_rsu: float, *, floor: float = 0.1,
                            sign: str = "minus_as_defined", tol: float = 1e-12,
                            max_rounds: int = 500) -> BestResponsePath:
    """Alternate exact best responses (PV first) until the pair stops moving."""
    for k in range(1, max_rounds + 1):
        new_pa = best_response_pv(inst, p_rsu, floor, sign)
        if not math.isfinite(new_pa):
            return BestResponsePath(new_pa, p_rsu, k, False, True)
        new_r = best_response_rsu(inst, new_pa, floor, sign)
        if not math.isfinite(new_r):
            return BestResponsePath(new_pa, new_r, k, False, True)
        moved = abs(new_pa - p_pa) + abs(new_r - p_rsu)
        p_pa, p_rsu = new_pa, new_r
        if moved <= tol * max(1.0, p_pa, p_rsu):
            return BestResponsePath(p_pa, p_rsu, k, True, False)
    return BestResponsePath(p_pa, p_rsu, max_rounds, False, False)


# ---------------------------------------------------------------------------
# balanced regime: closed form
# ---------------------------------------------------------------------------


def m_coefficient(inst: OffloadInstance) -> float:
    """M_i exactly as written: both brackets weighted by G_rsu / (G_rsu + G_pa)."""
    w = inst.gamma_rsu / (inst.gamma_rsu + inst.gamma_pa)
    D = inst.rv.task_size_Dqi
    # the block energy over D_Bv / varpi is the per-RV share already stored
    pv = inst.xi_v * (w * D * inst.m_terms_pv + inst.consensus_energy_pv_EpaBC)
    rsu = inst.xi_v * (w * D * inst.m_terms_rsu + inst.consensus_energy_rsu_ERSUBC)
    return pv - rsu


def rsu_price_response(inst: OffloadInstance, p_pa: float) -> float:
    """Balanced-regime RSU response to a PV price (the first closed-form line)."""
    g_pa, g_r = inst.gamma_pa, inst.gamma_rsu
    return p_pa * g_r / g_pa - (g_r + g_pa) / (inst.task_units * g_pa) * m_coefficient(inst)


def pv_price_response(inst: OffloadInstance, p_rsu: float) -> float:
    g_pa, g_r = inst.gamma_pa, inst.gamma_rsu
    return p_rsu * g_r / g_pa + (g_r + g_pa) / (inst.task_units * g_r) * m_coefficient(inst)


def closed_form_equilibrium(inst: OffloadInstance, floor: float = 0.1,
                            anchor_p_pa: float | None = None) -> ClosedForm:
    """Joint fixed point of the two balanced-regime responses.

    Substituting one line into the other gives p_pa = (G_pa + G_rsu) M / (D G_rsu)
    and p_rsu = 0 whenever G_pa != G_rsu.  With G_pa == G_rsu both lines
    coincide; the pair is then anchored on ``anchor_p_pa`` (the floor by
    default).
    """
    g_pa, g_r = inst.gamma_pa, inst.gamma_rsu
    degenerate = abs(g_pa - g_r) <= 1e-12 * max(g_pa, g_r)
    if degenerate:
        raw_pa = floor if anchor_p_pa is None else anchor_p_pa
    else:
        raw_pa = (g_pa + g_r) * m_coefficient(inst) / (inst.task_units * g_r)
    raw_r = rsu_price_response(inst, raw_pa)
    p_pa, p_r = max(raw_pa, floor), max(raw_r, floor)
    return ClosedForm(p_pa=p_pa, p_rsu=p_r, raw_p_pa=raw_pa, raw_p_rsu=raw_r,
                      clamped=(p_pa != raw_pa or p_r != raw_r), degenerate=degenerate)


# ---------------------------------------------------------------------------
# Algorithm: gradient ascent on prices with an outer follower update
# ---------------------------------------------------------------------------


def _rel_sq(new: float, old: float) -> float:
    if old == 0:
        return 0.0 if new == 0 else math.inf
    return (new - old) ** 2 / old**2


def solve_stackelberg(inst: OffloadInstance, params: GameSolverParams | None = None, *,
                      epsilon0: float = INITIAL_EPSILON, p_pa0: float = INITIAL_P_PA,
                      p_rsu0: float = INITIAL_P_RSU) -> OffloadSolution:
    """Alternate the follower's ratio and the two leaders' price updates.

    Outside the balanced regime each leader climbs its own utility with step
    ``mu * floor * grad / D`` (prices in units of the floor, utility in units
    of the floor revenue of the whole task) and divides its price by
    ``omega`` whenever its utility is not positive.  In the balanced regime
    prices jump to the closed-form pair.  Every inner and outer step counts
    toward ``max_iters``.
    """
    params = params or GameSolverParams()
    sign = params.consensus_term_sign
    floor = params.price_floor
    inst = replace(inst, price_unit_bits=params.price_unit_bits) \
        if inst.price_unit_bits != params.price_unit_bits else inst
    d = inst.task_units
    step_scale = floor / d
    p_pa, p_r = max(p_pa0, floor), max(p_rsu0, floor)
    eps = epsilon0
    iters = 0
    clamped = False

    try:
        optimal_epsilon(inst, p_pa, p_r)
    except InfeasibleInstance:
        return OffloadSolution(math.nan, p_pa, p_r, math.nan, math.nan, math.nan, "infeasible",
                               0, False, feasible=False)

    def balanced_now(e):
        return _regime_of(inst, e, params.balance_rtol) == "balanced"

    def grads(pa, pr):
        g = price_gradients(inst, pa, pr, rtol=params.balance_rtol)
        if g.at_boundary:
            return finite_difference_gradients(inst, pa, pr, sign, h=1e-9 * max(pa, pr), one_sided=True)
        return g.d_pa, g.d_rsu

    converged = False
    while iters < params.max_iters:
        est = optimal_epsilon(inst, p_pa, p_r, params.balance_rtol)
        new_eps = est.epsilon
        iters += 1
        balanced = balanced_now(new_eps)
        cf = closed_form_equilibrium(inst, floor, anchor_p_pa=p_pa) if balanced else None

        # PV price loop
        while iters < params.max_iters:
            iters += 1
            e_now = optimal_epsilon(inst, p_pa, p_r).epsilon
            u = pv_utility(inst, e_now, p_pa, sign)
            if not balanced:
                if u <= 0:
                    nxt = p_pa / params.shrink_omega1
                else:
                    nxt = p_pa + params.lr_mu1 * step_scale * grads(p_pa, p_r)[0]
            else:
                nxt = p_pa / params.shrink_omega1 if u < 0 else cf.p_pa
            if nxt < floor:
                nxt, clamped = floor, True
            done = _rel_sq(nxt, p_pa) < params.tol_theta
            p_pa = nxt
            if done:
                break

        # RSU price loop
        while iters < params.max_iters:
            iters += 1
            e_now = optimal_epsilon(inst, p_pa, p_r).epsilon
            u = rsu_utility(inst, e_now, p_r, sign)
            if not balanced:
                if u <= 0:
                    nxt = p_r / params.shrink_omega2
                else:
                    nxt = p_r + params.lr_mu2 * step_scale * grads(p_pa, p_r)[1]
            else:
                nxt = p_r / params.shrink_omega2 if u < 0 else cf.p_rsu
            if nxt < floor:
                nxt, clamped = floor, True
            done = _rel_sq(nxt, p_r) < params.tol_theta
            p_r = nxt
            if done:
                break

        final = optimal_epsilon(inst, p_pa, p_r, params.balance_rtol).epsilon
        # a ratio that settled only because prices drifted into the balanced
        # band was last priced by the wrong branch; go round once more
        consistent = balanced_now(final) == balanced
        if consistent and _rel_sq(final, eps) < params.tol_theta and _rel_sq(final, new_eps) < params.tol_theta:
            eps = final
            converged = True
            break
        eps = final

    est = optimal_epsilon(inst, p_pa, p_r, params.balance_rtol)
    eps = est.epsilon
    return OffloadSolution(
        epsilon_star=eps, p_pa_star=p_pa, p_rsu_star=p_r,
        u_rv=rv_utility(inst, eps, p_pa, p_r), u_pv=pv_utility(inst, eps, p_pa, sign),
        u_rsu=rsu_utility(inst, eps, p_r, sign), regime=est.regime, iterations=iters,
        converged=converged, feasible=True, floor_clamped=clamped)
