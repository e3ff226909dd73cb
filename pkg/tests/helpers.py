"""Shared random-instance generators and brute-force oracles for the tests."""
from __future__ import annotations

import numpy as np

from bpvec.game import OffloadInstance
from bpvec.scenario import BITS_PER_GB, BITS_PER_MB, RequestingVehicle


def random_instance(rng: np.random.Generator, *, feasible: bool = True, unit_bits: float = BITS_PER_GB,
                    **over) -> OffloadInstance:
    """A generic instance: coefficients drawn independently of any layout."""
    while True:
        D = rng.uniform(2, 6) * BITS_PER_MB
        rv = RequestingVehicle("rv", (0.0, 0.0), D, float(rng.uniform(0.08, 0.3)),
                               float(rng.uniform(0.5, 2.0)))
        f_pv, f_r = rng.uniform(1e9, 2.5e9), rng.uniform(4e9, 6e9)
        kw = dict(
            rv=rv, gamma_pa=float(rng.uniform(0.03, 0.25)), gamma_rsu=float(rng.uniform(0.03, 0.25)),
            rate_to_pv_Rik=float(rng.uniform(50, 300)), rate_to_rsu_Rij=float(rng.uniform(50, 300)),
            pv_energy_terms=1e-27 * f_pv**2 * 24, rsu_energy_terms=1e-28 * f_r**2 * 24,
            consensus_energy_pv_EpaBC=float(rng.uniform(0.01, 0.5)),
            consensus_energy_rsu_ERSUBC=float(rng.uniform(0.001, 0.05)),
            xi_v=1e-6, xi_r=1e-6, price_unit_bits=unit_bits,
            m_terms_pv=1e-27 * f_pv**2, m_terms_rsu=1e-28 * f_r**2,
        )
        kw.update(over)
        inst = OffloadInstance(**kw)
        lo, hi = inst.feasible_interval()
        if not feasible or lo <= hi:
            return inst


def random_prices(rng: np.random.Generator, n: int = 1):
    # log-uniform over [0.1, 20] per GB spans all three follower regimes
    return np.exp(rng.uniform(np.log(0.1), np.log(20.0), size=(n, 2)))


def rv_utility_grid(inst: OffloadInstance, eps: np.ndarray, p_pa: float, p_rsu: float) -> np.ndarray:
    """Vectorized RV utility written out term by term from the model definition."""
    D_bits = inst.rv.task_size_Dqi
    d = D_bits / inst.price_unit_bits
    D_mb = D_bits / BITS_PER_MB
    T = np.maximum((1 - eps) * inst.gamma_pa, eps * inst.gamma_rsu)
    comm = inst.xi_v * inst.tx_power_Pt * (eps * D_mb / inst.rate_to_rsu_Rij
                                           + (1 - eps) * D_mb / inst.rate_to_pv_Rik)
    return (inst.rv.satisfaction_alpha * (inst.rv.max_tolerance_Tmaxi - T**2)
            - (1 - eps) * d * p_pa - eps * d * p_rsu - comm)


def feasible_mask(inst: OffloadInstance, eps: np.ndarray) -> np.ndarray:
    t = inst.rv.max_tolerance_Tmaxi
    return ((1 - eps) * inst.gamma_pa <= t) & (eps * inst.gamma_rsu <= t)


def grid_argmax(inst: OffloadInstance, p_pa: float, p_rsu: float, step: float = 1e-4) -> float:
    eps = np.linspace(0.0, 1.0, int(round(1 / step)) + 1)
    u = rv_utility_grid(inst, eps, p_pa, p_rsu)
    u[~feasible_mask(inst, eps)] = -np.inf
    return float(eps[int(np.argmax(u))])
