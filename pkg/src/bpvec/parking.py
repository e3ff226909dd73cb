"""Parking residence-time model.

Residence time is a two-component Gamma mixture per arrival hour.  The
probability that a vehicle parked for ``t_p`` seconds stays at least
``tau`` more is the conditional survival ratio.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .scenario import ParkingMixtureTable, ParkingRow

_EPS = 1e-16
_MAX_ITER = 10_000
_TINY = 1e-300


def _gamma_series(k: float, x: float) -> float:
    # regularized P(k, x) by the power series, valid for x < k + 1
    term = 1.0 / k
    total = term
    a = k
    for _ in range(_MAX_ITER):
        a += 1.0
        term *= x / a
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + k * math.log(x) - math.lgamma(k))


def _gamma_cont_frac(k: float, x: float) -> float:
    # regularized Q(k, x) by the modified Lentz continued fraction, x >= k + 1
    b = x + 1.0 - k
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - k)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + k * math.log(x) - math.lgamma(k)) * h


def regularized_lower_gamma(k: float, x: float) -> float:
    """P(k, x) = gamma(k, x) / Gamma(k)."""
    if k <= 0:
        raise ValueError("shape must be > 0")
    if x < 0:
        raise ValueError("argument must be >= 0")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < k + 1.0:
        return min(1.0, _gamma_series(k, x))
    return max(0.0, 1.0 - _gamma_cont_frac(k, x))


def regularized_upper_gamma(k: float, x: float) -> float:
    """Q(k, x) = 1 - P(k, x), computed without cancellation for large x."""
    if k <= 0:
        raise ValueError("shape must be > 0")
    if x < 0:
        raise ValueError("argument must be >= 0")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < k + 1.0:
        return max(0.0, 1.0 - _gamma_series(k, x))
    return min(1.0, _gamma_cont_frac(k, x))


def lower_incomplete_gamma(k: float, x: float) -> float:
    """Unregularized lower incomplete gamma function gamma(k, x)."""
    return regularized_lower_gamma(k, x) * math.gamma(k)


def _arg(t: float, kappa: float, theta: float, mode: str) -> float:
    if mode == "theta_pow_kappa":
        return t / theta**kappa
    return t / theta


def residence_cdf(t_p: float, t_a: int, tbl: ParkingMixtureTable) -> float:
    if t_p < 0:
        raise ValueError("negative t_p")
    r = tbl.row(t_a)
    m = tbl.gamma_arg_mode
    f = (r.D1 * regularized_lower_gamma(r.kappa_s, _arg(t_p, r.kappa_s, r.theta_s, m))
         + r.D2 * regularized_lower_gamma(r.kappa_l, _arg(t_p, r.kappa_l, r.theta_l, m)))
    return min(1.0, max(0.0, f))


def residence_survival(t_p: float, t_a: int, tbl: ParkingMixtureTable) -> float:
    """1 - F(t_p), evaluated from the upper tails to keep precision far out."""
    if t_p < 0:
        raise ValueError("negative t_p")
    r = tbl.row(t_a)
    m = tbl.gamma_arg_mode
    s = (r.D1 * regularized_upper_gamma(r.kappa_s, _arg(t_p, r.kappa_s, r.theta_s, m))
         + r.D2 * regularized_upper_gamma(r.kappa_l, _arg(t_p, r.kappa_l, r.theta_l, m)))
    return min(1.0, max(0.0, s))


@dataclass(frozen=True)
class StayQuery:
    parked_so_far_tpk: float
    horizon_tau: float
    arrival_hour_ta: int

    def __post_init__(self):
        if self.parked_so_far_tpk < 0 or self.horizon_tau < 0:
            raise ValueError("durations must be >= 0")
        if not 0 <= self.arrival_hour_ta <= 23:
            raise ValueError("arrival hour must be in 0..23")


@dataclass(frozen=True)
class StayResult:
    probability: float
    departed: bool  # survival at t_p underflowed: vehicle treated as gone


def stay_probability_ex(q: StayQuery, tbl: ParkingMixtureTable) -> StayResult:
    if q.horizon_tau == 0:
        return StayResult(1.0, False)
    s0 = residence_survival(q.parked_so_far_tpk, q.arrival_hour_ta, tbl)
    if s0 <= 0.0:
        return StayResult(0.0, True)
    s1 = residence_survival(q.parked_so_far_tpk + q.horizon_tau, q.arrival_hour_ta, tbl)
    return StayResult(min(1.0, max(0.0, s1 / s0)), False)


def stay_probability(q: StayQuery, tbl: ParkingMixtureTable) -> float:
    """P[T > t_p + tau | T > t_p]; 0 when the vehicle is numerically certain to have left."""
    return stay_probability_ex(q, tbl).probability


def expanded_stay_fraction(q: StayQuery, row: ParkingRow, mode: str = "theta_pow_kappa",
                           *, as_printed: bool = False, lower_gamma=lower_incomplete_gamma) -> float:
    """Stay probability written as a single fraction of unregularized gamma terms.

    Multiplying numerator and denominator of the survival ratio by
    ``Gamma(k_s) Gamma(k_l)`` gives

        (D1 g_s(t') G_l + D2 g_l(t') G_s - G_s G_l) / (same at t_p)

    with ``t' = t_p + tau``.  ``as_printed=True`` pairs each lower gamma with
    its own complete gamma (``g_s G_s``) instead, which only coincides with
    the survival ratio when ``k_s == k_l``.
    """
    gs, gl = math.gamma(row.kappa_s), math.gamma(row.kappa_l)
    ms, ml = (gs, gl) if as_printed else (gl, gs)

    def part(t: float) -> float:
        return (row.D1 * lower_gamma(row.kappa_s, _arg(t, row.kappa_s, row.theta_s, mode)) * ms
                + row.D2 * lower_gamma(row.kappa_l, _arg(t, row.kappa_l, row.theta_l, mode)) * ml
                - gs * gl)

    return part(q.parked_so_far_tpk + q.horizon_tau) / part(q.parked_so_far_tpk)
