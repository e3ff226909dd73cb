import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bpvec.channel import link, rate, snr
from bpvec.scenario import ChannelParams

CH = ChannelParams()
# frozen from 0.28183815 * 1.63726e-9 / 1.2589e-13
SNR_AT_D0 = 3665.4406979823652
RATE_AT_D0 = 177.60246734525754  # 15 * log2(1 + SNR_AT_D0)


def test_snr_at_reference_distance():
    assert snr((0, 0), (100, 0), CH) == pytest.approx(SNR_AT_D0, rel=1e-7)


def test_rate_at_reference_distance():
    assert rate((0, 0), (100, 0), CH) == pytest.approx(RATE_AT_D0, rel=1e-6)


def test_zero_power_gives_zero_snr_and_rate():
    ch = ChannelParams(tx_power_Pt=0.0)  # rejected by validate(), still evaluable
    assert snr((0, 0), (50, 0), ch) == 0.0
    assert rate((0, 0), (50, 0), ch) == 0.0


def test_inverse_square():
    assert snr((0, 0), (200, 0), CH) == pytest.approx(snr((0, 0), (100, 0), CH) / 4, rel=1e-12)


def test_rate_of_unit_snr_is_bandwidth():
    d = 100 * math.sqrt(SNR_AT_D0)  # distance where snr == 1
    assert rate((0, 0), (d, 0), CH) == pytest.approx(CH.bandwidth_Wb, rel=1e-12)


def test_coincident_positions():
    with pytest.raises(ValueError, match="zero distance"):
        snr((1, 2), (1, 2), CH)


def test_rate_strictly_decreasing_in_distance():
    r = [rate((0, 0), (d, 0), CH) for d in np.linspace(1, 2000, 400)]
    assert all(a > b for a, b in zip(r, r[1:]))


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10))
def test_snr_scaling(kp, ke, kn):
    base = snr((0, 0), (130, 40), CH)
    ch = ChannelParams(tx_power_Pt=CH.tx_power_Pt * kp, transceiver_eta=CH.transceiver_eta * ke,
                       noise_N0=CH.noise_N0 * kn)
    assert snr((0, 0), (130, 40), ch) == pytest.approx(base * kp * ke / kn, rel=1e-12)


def test_link_metric_consistent():
    m = link((0, 0), (300, 400), CH)
    assert m.distance_m == 500.0 and m.snr > 0 and m.rate > 0
