"""Small hand-built instances shared by the unit tests."""
from __future__ import annotations

import math

import numpy as np

from noma_vec.model import Allocation, ChannelSlot, ComputeBudget, TaskSpec


def one_pair_slot(h_u=1e-6, h_mu=1e-8, h_ms=1e-7, h_mn=1e-6, h_us=0.0, h_un=0.0,
                  sigma2=1e-10, B=180e3, p_cu=0.1, p_tvu=0.1) -> ChannelSlot:
    """One CU, one T-VU, one S-VU, one RSU."""
    a = lambda v: np.array([[float(v)]])
    return ChannelSlot(H_u=np.array([h_u]), H_mu=a(h_mu), H_ms=a(h_ms), H_mn=a(h_mn),
                       H_us=a(h_us), H_un=a(h_un), sigma2=sigma2, bandwidth_B=B,
                       p_cu=np.array([p_cu]), p_tvu=np.array([p_tvu]))


def one_pair_alloc(eps1=0.7, eps2=0.3, beta1=0.0, beta2=0.0, psi=1, assigned=True,
                   access="noma") -> Allocation:
    return Allocation(psi=np.array([[psi]], dtype=np.int8), svu=np.array([0]),
                      beta1=np.array([beta1]), beta2=np.array([beta2]), x_cu=np.array([0]),
                      x_tvu=np.array([0 if assigned else -1]), eps1=np.array([eps1]),
                      eps2=np.array([eps2]), serving_rsu=np.array([0]), access=access)


def tasks(D=1e5, C=500.0, T=0.1, M=1) -> TaskSpec:
    return TaskSpec(D=np.full(M, float(D)), C=np.full(M, float(C)), T_tol=T)


def budget(y_m=1e8, y_ms=1e9, y_mn=1e9, kappa=1e-28, P_cir=0.1, M=1) -> ComputeBudget:
    return ComputeBudget(y_m=np.full(M, float(y_m)), y_ms=np.full(M, float(y_ms)),
                         y_mn=np.full(M, float(y_mn)), kappa=kappa, P_cir=P_cir)


def scalar_rates(slot: ChannelSlot, e1: float, e2: float, psi: int = 1):
    """V2I and V2V rates of T-VU 0 written out term by term."""
    B, s2 = slot.bandwidth_B, slot.sigma2
    P, Pu = slot.p_tvu[0], slot.p_cu[0]
    h_ms, h_mn = slot.H_ms[0, 0], slot.H_mn[0, 0]
    q_rsu = Pu * slot.H_us[0, 0] + s2
    q_svu = psi * Pu * slot.H_un[0, 0] + s2
    if h_ms <= h_mn:
        g1 = e1 * P * h_ms / (q_rsu + e2 * P * h_ms)
        g2 = psi * e2 * P * h_mn / q_svu
    else:
        g1 = e1 * P * h_ms / q_rsu
        g2 = psi * e2 * P * h_mn / (q_svu + e1 * P * h_mn)
    return B * math.log2(1 + g1), B * math.log2(1 + g2)


def pair_instances(rng, xi_range=(1e5, 1e7), rate_floor=True):
    """A random (PairProblem, PowerInstance, xi) triple built from the same raw gains."""
    from noma_vec.oracle import PowerInstance
    from noma_vec.power import PairProblem

    lu = lambda lo, hi: 10 ** rng.uniform(math.log10(lo), math.log10(hi))
    s2 = 5.7e-15
    raw = dict(B=180e3, P=10 ** (rng.uniform(15, 30) / 10 - 3), h_ms=lu(1e-13, 1e-9),
               h_mn=lu(1e-12, 1e-8), cu_power=0.1, h_u=lu(1e-12, 1e-9), h_us=lu(1e-16, 1e-12),
               h_un=lu(1e-16, 1e-12), h_mu=lu(1e-16, 1e-12), sigma2=s2, cu_rate_min=3.6e5,
               r1_min=rng.uniform(0, 2e5) if rate_floor else 0.0,
               r2_min=rng.uniform(0, 2e5) if rate_floor else 0.0, static=0.2)
    prob = PairProblem(bandwidth=raw["B"], p_max=raw["P"], h_ms=raw["h_ms"], h_mn=raw["h_mn"],
                       i_rsu=raw["cu_power"] * raw["h_us"] + s2,
                       i_svu=raw["cu_power"] * raw["h_un"] + s2,
                       cu_signal=raw["cu_power"] * raw["h_u"], h_mu=raw["h_mu"], sigma2=s2,
                       cu_rate_min=raw["cu_rate_min"], r1_min=raw["r1_min"], r2_min=raw["r2_min"],
                       static_power=raw["static"])
    return prob, PowerInstance(**raw), 10 ** rng.uniform(*np.log10(xi_range))
