"""Log-distance link model: SNR and Shannon-style rate between two positions."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .scenario import BITS_PER_MB, ChannelParams


@dataclass(frozen=True)
class LinkMetric:
    distance_m: float
    snr: float
    rate: float  # MB/s


def distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def snr_at_distance(d: float, ch: ChannelParams) -> float:
    if d <= 0:
        raise ValueError("zero distance")
    return ch.tx_power_Pt * ch.transceiver_eta * (ch.ref_distance_d0 / d) ** ch.pathloss_delta / ch.noise_N0


def snr(a, b, ch: ChannelParams) -> float:
    return snr_at_distance(distance(a, b), ch)


def rate_from_snr(s: float, ch: ChannelParams) -> float:
    return ch.bandwidth_Wb * math.log2(1.0 + s)


def rate(a, b, ch: ChannelParams) -> float:
    """Link rate in MB/s."""
    return rate_from_snr(snr(a, b, ch), ch)


def rate_bps(a, b, ch: ChannelParams) -> float:
    """Link rate in bits/s, the unit every time and energy formula uses."""
    return rate(a, b, ch) * BITS_PER_MB


def link(a, b, ch: ChannelParams) -> LinkMetric:
    d = distance(a, b)
    s = snr_at_distance(d, ch)
    return LinkMetric(distance_m=d, snr=s, rate=rate_from_snr(s, ch))
