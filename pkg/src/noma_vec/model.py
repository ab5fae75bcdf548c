"""Closed-form link, delay, power and energy-efficiency evaluation.

Everything here is a pure function of a :class:`ChannelSlot`, task and
computing parameters and an :class:`Allocation`. Arrays follow the index
convention ``[m]`` for T-VUs, ``[u]`` for CUs, ``[n]`` for S-VUs and ``[s]``
for RSUs.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np


class IncompleteAllocationError(ValueError):
    """An operation needs a sub-channel or RSU that the allocation lacks."""


class SicOrder(enum.Enum):
    V2I_FIRST = "v2i_first"
    V2V_FIRST = "v2v_first"


@dataclass(frozen=True, eq=False)
class ChannelSlot:
    """Linear power gains for one time slot.

    ``p_cu`` and ``p_tvu`` carry the CU transmit power and the T-VU maximum
    transmit power in watts, since every SINR needs them.
    """
    H_u: np.ndarray      # (U,)   CU -> MBS
    H_mu: np.ndarray     # (M, U) T-VU -> MBS, seen on CU u's sub-channel
    H_ms: np.ndarray     # (M, S) T-VU -> RSU
    H_mn: np.ndarray     # (M, N) T-VU -> S-VU
    H_us: np.ndarray     # (U, S) CU -> RSU
    H_un: np.ndarray     # (U, N) CU -> S-VU
    sigma2: float
    bandwidth_B: float
    p_cu: np.ndarray     # (U,)
    p_tvu: np.ndarray    # (M,)

    @property
    def num_tvus(self) -> int:
        return self.H_ms.shape[0]

    @property
    def num_cus(self) -> int:
        return self.H_u.shape[0]


@dataclass(frozen=True, eq=False)
class TaskSpec:
    D: np.ndarray        # (M,) bits
    C: np.ndarray        # (M,) cycles per bit
    T_tol: float         # s


@dataclass(frozen=True, eq=False)
class ComputeBudget:
    y_m: np.ndarray      # (M,) local CPU, cycles/s
    y_ms: np.ndarray     # (M,) RSU CPU share
    y_mn: np.ndarray     # (M,) S-VU CPU share
    kappa: float
    P_cir: float

    def static_power(self) -> np.ndarray:
        return self.P_cir + self.kappa * (self.y_m ** 3 + self.y_ms ** 3 + self.y_mn ** 3)


@dataclass(frozen=True, eq=False)
class Allocation:
    """Decision variables for one slot.

    ``psi[m, n]`` is the effective offloading indicator (selection times
    social and mobility admissibility); ``svu[m]`` records which S-VU was
    selected even when the link turned out inactive. ``x_tvu[m] == -1``
    marks a T-VU excluded from this slot.
    """
    psi: np.ndarray
    svu: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    x_cu: np.ndarray
    x_tvu: np.ndarray
    eps1: np.ndarray
    eps2: np.ndarray
    serving_rsu: np.ndarray
    access: str = "noma"

    @classmethod
    def empty(cls, M: int, N: int, U: int, serving_rsu=None, access="noma") -> "Allocation":
        return cls(psi=np.zeros((M, N), dtype=np.int8), svu=np.full(M, -1),
                   beta1=np.zeros(M), beta2=np.zeros(M), x_cu=np.arange(U),
                   x_tvu=np.full(M, -1), eps1=np.zeros(M), eps2=np.zeros(M),
                   serving_rsu=np.zeros(M, dtype=int) if serving_rsu is None
                   else np.asarray(serving_rsu, dtype=int),
                   access=access)

    def replace(self, **changes) -> "Allocation":
        return replace(self, **changes)

    def cochannel_cu(self) -> np.ndarray:
        """CU index sharing each T-VU's sub-channel, -1 if unassigned."""
        sc_to_cu = np.full(max(self.x_cu.max(initial=-1) + 1, 1), -1)
        sc_to_cu[self.x_cu] = np.arange(self.x_cu.size)
        out = np.full(self.x_tvu.size, -1)
        ok = self.x_tvu >= 0
        out[ok] = sc_to_cu[self.x_tvu[ok]]
        return out

    def active_v2v(self) -> np.ndarray:
        M = self.svu.size
        act = np.zeros(M, dtype=bool)
        has = self.svu >= 0
        act[has] = self.psi[np.arange(M)[has], self.svu[has]] == 1
        return act


@dataclass(frozen=True, eq=False)
class RateReport:
    rate_cu: np.ndarray
    rate_v2i: np.ndarray
    rate_v2v: np.ndarray
    delay_local: np.ndarray
    delay_v2i: np.ndarray
    delay_v2v: np.ndarray
    total_rate: float
    total_power: float
    ee: float
    delay_ok: np.ndarray = field(default=None)
    outage: np.ndarray = field(default=None)   # excluded T-VUs that cannot finish locally


def sic_order(slot: ChannelSlot, m: int, n: int, s: int) -> SicOrder:
    """Receiver with the weaker channel is decoded first; ties go to V2I."""
    return SicOrder.V2I_FIRST if slot.H_ms[m, s] <= slot.H_mn[m, n] else SicOrder.V2V_FIRST


def _link_terms(slot: ChannelSlot, alloc: Allocation):
    M = slot.num_tvus
    idx = np.arange(M)
    u = alloc.cochannel_cu()
    assigned = u >= 0
    uu = np.where(assigned, u, 0)
    s = alloc.serving_rsu
    n = alloc.svu
    has_n = n >= 0
    nn = np.where(has_n, n, 0)
    psi = np.where(has_n, alloc.psi[idx, nn], 0).astype(float)

    P = slot.p_tvu
    h_ms = slot.H_ms[idx, s]
    h_mn = np.where(has_n, slot.H_mn[idx, nn], 0.0)
    v2i_first = ~has_n | (h_ms <= h_mn)
    i_rsu = slot.p_cu[uu] * slot.H_us[uu, s] + slot.sigma2
    i_svu = psi * slot.p_cu[uu] * slot.H_un[uu, nn] + slot.sigma2
    return dict(u=u, assigned=assigned, psi=psi, P=P, h_ms=h_ms, h_mn=h_mn,
                v2i_first=v2i_first, i_rsu=i_rsu, i_svu=i_svu)


def link_sinrs(slot: ChannelSlot, alloc: Allocation):
    """SINRs of the V2I and V2V streams for every T-VU.

    Returns ``(gamma_v2i, gamma_v2v, share_v2i, share_v2v)`` where the shares
    are the fraction of channel uses each stream occupies (1 under NOMA, 1/2
    under time-shared OMA with both streams active). Unassigned T-VUs get
    zero SINR.
    """
    t = _link_terms(slot, alloc)
    e1, e2, P = alloc.eps1, alloc.eps2, t["P"]
    if alloc.access == "oma":
        two = t["psi"] > 0
        g1 = e1 * P * t["h_ms"] / t["i_rsu"]
        g2 = t["psi"] * e2 * P * t["h_mn"] / t["i_svu"]
        share = np.where(two, 0.5, 1.0)
        g2 = np.where(two, g2, 0.0)
        sh2 = np.where(two, 0.5, 0.0)
    else:
        first = t["v2i_first"]
        g1 = e1 * P * t["h_ms"] / (t["i_rsu"] + np.where(first, e2 * P * t["h_ms"], 0.0))
        g2 = (t["psi"] * e2 * P * t["h_mn"]
              / (t["i_svu"] + np.where(first, 0.0, e1 * P * t["h_mn"])))
        share = np.ones_like(g1)
        sh2 = np.ones_like(g1)
    g1 = np.where(t["assigned"], g1, 0.0)
    g2 = np.where(t["assigned"], g2, 0.0)
    return g1, g2, share, sh2


def link_rates(slot: ChannelSlot, alloc: Allocation):
    """(rate_v2i, rate_v2v) in bit/s for every T-VU."""
    g1, g2, sh1, sh2 = link_sinrs(slot, alloc)
    B = slot.bandwidth_B
    return sh1 * B * np.log2(1.0 + g1), sh2 * B * np.log2(1.0 + g2)


def cu_rates(slot: ChannelSlot, alloc: Allocation) -> np.ndarray:
    """Uplink rate of every CU, including interference from its co-channel T-VU."""
    U = slot.num_cus
    B = slot.bandwidth_B
    sig = slot.p_cu * slot.H_u
    u = alloc.cochannel_cu()
    rates = B * np.log2(1.0 + sig / slot.sigma2)
    for m in np.flatnonzero(u >= 0):
        cu = u[m]
        P = slot.p_tvu[m]
        h = slot.H_mu[m, cu]
        if alloc.access == "oma" and alloc.active_v2v()[m]:
            r = 0.5 * B * (np.log2(1.0 + sig[cu] / (alloc.eps1[m] * P * h + slot.sigma2))
                           + np.log2(1.0 + sig[cu] / (alloc.eps2[m] * P * h + slot.sigma2)))
        else:
            q1 = (alloc.eps1[m] + alloc.eps2[m]) * P * h
            r = B * np.log2(1.0 + sig[cu] / (q1 + slot.sigma2))
        rates[cu] = r
    assert rates.shape == (U,)
    return rates


def cu_rate(slot: ChannelSlot, alloc: Allocation, u: int) -> float:
    return float(cu_rates(slot, alloc)[u])


def v2i_rate(slot: ChannelSlot, alloc: Allocation, m: int) -> float:
    if alloc.x_tvu[m] < 0:
        raise IncompleteAllocationError(f"T-VU {m} has no sub-channel")
    if not 0 <= alloc.serving_rsu[m] < slot.H_ms.shape[1]:
        raise IncompleteAllocationError(f"T-VU {m} has no serving RSU")
    return float(link_rates(slot, alloc)[0][m])


def v2v_rate(slot: ChannelSlot, alloc: Allocation, m: int, n: int) -> float:
    """V2V rate towards S-VU ``n``; zero when the link is inactive."""
    if alloc.psi[m, n] == 0 or alloc.svu[m] != n:
        return 0.0
    if alloc.x_tvu[m] < 0:
        raise IncompleteAllocationError(f"T-VU {m} has no sub-channel")
    return float(link_rates(slot, alloc)[1][m])


def delays(spec: TaskSpec, budget: ComputeBudget, alloc: Allocation, rates):
    """Local, V2I and V2V delays; an offloaded share with zero rate costs +inf."""
    r1, r2 = (np.asarray(r, dtype=float) for r in rates)
    D, C = spec.D, spec.C
    b1, b2 = alloc.beta1, alloc.beta2
    local = D * (1.0 - b1 - b2) * C / budget.y_m
    with np.errstate(divide="ignore", invalid="ignore"):
        tx1 = np.where(b1 > 0, D * b1 / r1, 0.0)
        tx2 = np.where(b2 > 0, D * b2 / r2, 0.0)
    d1 = tx1 + D * b1 * C / budget.y_ms
    d2 = tx2 + D * b2 * C / budget.y_mn
    return np.maximum(local, 0.0), d1, d2


def transmit_power(alloc: Allocation, p_tvu, formula: str = "sum") -> np.ndarray:
    """Per-T-VU average radiated power in watts."""
    p_tvu = np.asarray(p_tvu, dtype=float)
    if formula == "printed":
        tx = 2.0 * alloc.eps1 * p_tvu
    elif alloc.access == "oma":
        two = alloc.active_v2v()
        tx = np.where(two, 0.5 * (alloc.eps1 + alloc.eps2), alloc.eps1 + alloc.eps2) * p_tvu
    else:
        tx = (alloc.eps1 + alloc.eps2) * p_tvu
    return np.where(alloc.x_tvu >= 0, tx, 0.0)


def total_power(alloc: Allocation, budget: ComputeBudget, p_tvu, formula: str = "sum") -> float:
    """Circuit + computing + radiated power summed over all T-VUs."""
    return float(np.sum(budget.static_power() + transmit_power(alloc, p_tvu, formula)))


def system_ee(total_rate: float, total_power_w: float) -> float:
    if not total_power_w > 0:
        raise ValueError("energy efficiency undefined for non-positive total power")
    return float(total_rate) / float(total_power_w)


def subtractive_objective(report: RateReport, xi: float) -> float:
    return report.total_rate - xi * report.total_power


def evaluate(slot: ChannelSlot, spec: TaskSpec, budget: ComputeBudget,
             alloc: Allocation, delay_margin: float = 1e-9,
             formula: str = "sum") -> RateReport:
    r1, r2 = link_rates(slot, alloc)
    d_loc, d1, d2 = delays(spec, budget, alloc, (r1, r2))
    limit = spec.T_tol - delay_margin
    ok = (d_loc <= limit) & (d1 <= limit) & (d2 <= limit)
    total_rate = float(np.sum(r1 + r2))
    # an excluded T-VU that still has to offload keeps transmitting at full power for nothing
    outage = (alloc.x_tvu < 0) & (spec.D * spec.C / budget.y_m > limit)
    P = total_power(alloc, budget, slot.p_tvu, formula) + float(np.sum(slot.p_tvu[outage]))
    return RateReport(rate_cu=cu_rates(slot, alloc), rate_v2i=r1, rate_v2v=r2,
                      delay_local=d_loc, delay_v2i=d1, delay_v2v=d2,
                      total_rate=total_rate, total_power=P,
                      ee=system_ee(total_rate, P), delay_ok=ok, outage=outage)
