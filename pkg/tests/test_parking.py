import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from bpvec.parking import (StayQuery, expanded_stay_fraction, lower_incomplete_gamma,
                           regularized_lower_gamma, residence_cdf, stay_probability, stay_probability_ex)
from bpvec.scenario import ParkingMixtureTable, ParkingRow

DEFAULT = ParkingMixtureTable()


def table(row: ParkingRow, mode: str = "theta_pow_kappa") -> ParkingMixtureTable:
    return ParkingMixtureTable(rows=(row,) * 24, gamma_arg_mode=mode)


def test_lower_gamma_closed_form():
    assert lower_incomplete_gamma(1.0, 1.0) == pytest.approx(0.6321205588285577, rel=1e-12)
    assert lower_incomplete_gamma(3.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        lower_incomplete_gamma(0.0, 1.0)


def test_lower_gamma_against_quadrature():
    val, _ = integrate.quad(lambda t: t**1.5 * math.exp(-t), 0, 3.7, epsabs=0, epsrel=1e-13)
    # quadrature oracle is good to ~1e-13; the series itself is tighter
    assert lower_incomplete_gamma(2.5, 3.7) == pytest.approx(val, rel=1e-12)
    assert lower_incomplete_gamma(2.5, 3.7) == pytest.approx(special.gammainc(2.5, 3.7) * special.gamma(2.5), rel=1e-13)


@given(st.floats(0.05, 50), st.floats(0, 200))
def test_regularized_gamma_matches_scipy(k, x):
    assert regularized_lower_gamma(k, x) == pytest.approx(special.gammainc(k, x), rel=1e-12, abs=1e-300)


def test_cdf_limits_and_exponential_case():
    assert residence_cdf(0.0, 5, DEFAULT) == 0.0
    assert residence_cdf(1e9, 5, DEFAULT) == pytest.approx(1.0, abs=1e-12)
    tb = table(ParkingRow(1.0, 600.0, 2.0, 100.0, 1.0, 0.0))
    for t in (0.0, 10.0, 600.0, 5000.0):
        assert residence_cdf(t, 0, tb) == pytest.approx(1 - math.exp(-t / 600.0), rel=1e-12, abs=1e-15)
    with pytest.raises(ValueError):
        residence_cdf(-1.0, 0, DEFAULT)


rows = st.builds(lambda ks, ts, kl, tl, d1: ParkingRow(ks, ts, kl, tl, d1, 1 - d1),
                 st.floats(0.3, 3), st.floats(60, 3600), st.floats(0.3, 3), st.floats(3600, 40000),
                 st.floats(0, 1))


@given(rows, st.sampled_from(["theta", "theta_pow_kappa"]))
@settings(max_examples=60)
def test_cdf_monotone_and_bounded(row, mode):
    tb = table(row, mode)
    f = [residence_cdf(t, 3, tb) for t in np.linspace(0, 1e5, 60)]
    assert all(0 <= x <= 1 for x in f)
    assert all(a <= b for a, b in zip(f, f[1:]))


@given(rows, st.floats(0, 2e4), st.lists(st.floats(0, 2e4), min_size=2, max_size=6))
@settings(max_examples=60)
def test_stay_non_increasing_in_tau(row, tp, taus):
    tb = table(row, "theta")
    p = [stay_probability(StayQuery(tp, tau, 0), tb) for tau in sorted(taus)]
    assert all(a >= b - 1e-15 for a, b in zip(p, p[1:]))
    assert stay_probability(StayQuery(tp, 0.0, 0), tb) == 1.0


def test_memoryless_exponential():
    tb = table(ParkingRow(1.0, 1800.0, 1.0, 1800.0, 0.5, 0.5))
    for tp in (0.0, 100.0, 3600.0, 20000.0):
        assert stay_probability(StayQuery(tp, 900.0, 0), tb) == pytest.approx(math.exp(-0.5), rel=1e-12)


def test_generic_mixture_expansion_matches_survival_ratio():
    row = ParkingRow(kappa_s=1.5, theta_s=1200.0, kappa_l=2.5, theta_l=14400.0, D1=0.6, D2=0.4)
    q = StayQuery(3600.0, 1800.0, 0)
    ratio = stay_probability(q, table(row, "theta"))
    assert expanded_stay_fraction(q, row, "theta") == pytest.approx(ratio, abs=1e-9)


def test_printed_pairing_only_agrees_for_equal_shapes():
    q = StayQuery(3600.0, 1800.0, 0)
    same = ParkingRow(2.0, 1200.0, 2.0, 14400.0, 0.6, 0.4)
    assert expanded_stay_fraction(q, same, "theta", as_printed=True) == pytest.approx(
        stay_probability(q, table(same, "theta")), abs=1e-9)
    diff = ParkingRow(1.5, 1200.0, 2.5, 14400.0, 0.6, 0.4)
    assert abs(expanded_stay_fraction(q, diff, "theta", as_printed=True)
               - stay_probability(q, table(diff, "theta"))) > 1e-6


def test_departed_vehicle_flagged_not_raised():
    tb = table(ParkingRow(1.0, 1.0, 1.0, 1.0, 0.5, 0.5), "theta")
    r = stay_probability_ex(StayQuery(1e6, 10.0, 0), tb)
    assert r.probability == 0.0 and r.departed


def test_query_validation():
    with pytest.raises(ValueError):
        StayQuery(-1.0, 0.0, 0)
    with pytest.raises(ValueError):
        StayQuery(0.0, 0.0, 24)
