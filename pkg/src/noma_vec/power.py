"""NOMA power split for one T-VU sharing one CU's sub-channel.

The pair problem maximizes ``R_v2i + R_v2v - xi * P`` over the power
coefficients ``(eps1, eps2)``. Each rate term ``log2(1 + g)`` is replaced by
the tight lower bound ``b * log2(g) + c`` around the current SINR; with
``eps = 2**w`` the bounded problem is concave in ``w`` and every constraint
(sum cap, CU protection, decoding-order power ordering, minimum rates from the
delay budget) is convex. The bound is re-tightened at each new point until
the bounded objective stops moving. Because the true objective is not
concave, the tightening runs from two starts (the interior split and the
corner with the interfering stream at its floor) and keeps the better end.

Each convex step is solved exactly: for a fixed power of the second-decoded
stream the optimal power of the first-decoded stream is a clipped closed form
(the Lagrangian stationarity in that coordinate does not involve the other
one), and the remaining 1-D concave problem is maximized over the finite set
of its piecewise stationary points and breakpoints, each a root of at most a
quadratic. Multipliers of the active constraints are recovered from the KKT
system afterwards.

Inside this module the two NOMA streams are named by decoding order: ``f``
is decoded first (sees intra-pair interference), ``s`` second (clean after
SIC). Rates are handled in nats per channel use; ``K = xi * P * ln2 / B`` is
the power price in the same units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .config import SolverConfig
from .model import SicOrder

LN2 = math.log(2.0)
SINGLE, NOMA, OMA = 0, 1, 2
_TINY = 1e-12


@dataclass(frozen=True)
class SurrogateCoeffs:
    b1: float
    b2: float
    c1: float
    c2: float
    gamma_tilde_v2i: float
    gamma_tilde_v2v: float


def _coeffs(gt):
    gt = np.asarray(gt, dtype=float)
    b = gt / (1.0 + gt)
    c = np.log2(1.0 + gt) - b * np.log2(gt)
    return b, c


def surrogate_coeffs(gamma_tilde_v2i: float, gamma_tilde_v2v: float) -> SurrogateCoeffs:
    """Slope/intercept of ``b*log2(g) + c``, tight to ``log2(1+g)`` at ``g~``."""
    if not (gamma_tilde_v2i > 0 and gamma_tilde_v2v > 0):
        raise ValueError("expansion SINRs must be positive")
    b1, c1 = _coeffs(gamma_tilde_v2i)
    b2, c2 = _coeffs(gamma_tilde_v2v)
    return SurrogateCoeffs(float(b1), float(b2), float(c1), float(c2),
                           float(gamma_tilde_v2i), float(gamma_tilde_v2v))


def lower_bound_objective(coeffs: SurrogateCoeffs, gammas, xi: float, powers: float,
                          bandwidth: float = 1.0) -> float:
    """``B*(b1 log2 g1 + c1 + b2 log2 g2 + c2) - xi*P``; ``-inf`` outside the domain."""
    g1, g2 = gammas
    if not (g1 > 0 and g2 > 0):
        return -math.inf
    phi = coeffs.b1 * math.log2(g1) + coeffs.c1 + coeffs.b2 * math.log2(g2) + coeffs.c2
    return bandwidth * phi - xi * powers


# --- problem description ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PairBatch:
    """A stack of pair problems; every field is an array of the same length.

    ``a_v2i = P * H_ms / (P_u H_us + sigma2)`` and
    ``a_v2v = Psi * P * H_mn / (Psi P_u H_un + sigma2)`` are SNRs per unit
    power coefficient. ``cap`` bounds ``eps1 + eps2`` under NOMA (and each
    coefficient separately under OMA); it already folds in the CU protection.
    """
    mode: np.ndarray
    v2i_first: np.ndarray
    a_v2i: np.ndarray
    a_v2v: np.ndarray
    cap: np.ndarray
    r1_min: np.ndarray
    r2_min: np.ndarray
    p_max: np.ndarray
    static_power: np.ndarray
    bandwidth: float

    def __len__(self):
        return self.mode.size

    def take(self, idx) -> "PairBatch":
        return PairBatch(**{k: (v[idx] if isinstance(v, np.ndarray) else v)
                            for k, v in self.__dict__.items()})


@dataclass(frozen=True)
class PairProblem:
    """Physical description of one (CU, T-VU[, S-VU]) power subproblem."""
    bandwidth: float
    p_max: float          # T-VU maximum transmit power
    h_ms: float
    h_mn: float           # 0 when no active V2V link
    i_rsu: float          # P_u H_us + sigma2
    i_svu: float          # P_u H_un + sigma2
    cu_signal: float      # P_u H_u
    h_mu: float
    sigma2: float
    cu_rate_min: float
    r1_min: float = 0.0
    r2_min: float = 0.0
    static_power: float = 0.0
    access: str = "noma"
    two_stream: bool = True

    @property
    def order(self) -> SicOrder:
        return SicOrder.V2I_FIRST if self.h_ms <= self.h_mn else SicOrder.V2V_FIRST

    def batch(self) -> PairBatch:
        cap = qos_cap(self.cu_signal, self.h_mu * self.p_max, self.sigma2,
                      self.cu_rate_min, self.bandwidth)
        mode = (OMA if self.access == "oma" else NOMA) if self.two_stream else SINGLE
        a = np.array
        return PairBatch(mode=a([mode]), v2i_first=a([self.order is SicOrder.V2I_FIRST]),
                         a_v2i=a([self.p_max * self.h_ms / self.i_rsu]),
                         a_v2v=a([self.p_max * self.h_mn / self.i_svu]),
                         cap=a([min(1.0, cap)]), r1_min=a([self.r1_min]), r2_min=a([self.r2_min]),
                         p_max=a([self.p_max]), static_power=a([self.static_power]),
                         bandwidth=self.bandwidth)


def qos_cap(cu_signal, interference_per_eps, sigma2, rate_min, bandwidth):
    """Largest ``eps1 + eps2`` keeping the CU rate at or above ``rate_min``.

    Negative when the CU misses its target even without interference.
    """
    thr = 2.0 ** (np.asarray(rate_min) / bandwidth) - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        budget = np.where(thr > 0, np.asarray(cu_signal) / thr - sigma2, np.inf)
        cap = np.where(interference_per_eps > 0, budget / interference_per_eps,
                       np.where(budget >= 0, np.inf, -1.0))
    return cap


@dataclass
class PowerSolution:
    eps1: float
    eps2: float
    w1: float
    w2: float
    dual_multipliers: dict
    converged: bool
    iterations: int
    feasible: bool
    objective: float                    # true R - xi*P of the pair, bit/s
    stationarity_residual: float = 0.0
    slack: dict = field(default_factory=dict)   # -g_i of each constraint g_i <= 0
    violated: list = field(default_factory=list)
    true_trace: list = field(default_factory=list)
    surrogate_trace: list = field(default_factory=list)


# --- vectorized pieces ---------------------------------------------------------

def _pos_root(a, b, c):
    """Non-negative root of ``a x^2 + b x + c`` for ``a >= 0``, ``c <= 0``."""
    disc = np.sqrt(np.maximum(b * b - 4.0 * a * c, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(b >= 0, -2.0 * c / (b + disc), (-b + disc) / (2.0 * a))
    return r


def _true_nats(batch: PairBatch, e1, e2):
    """Sum of stream rates in nats/channel use."""
    two = batch.mode != SINGLE
    oma = batch.mode == OMA
    f1 = batch.v2i_first
    g1_noma = e1 * batch.a_v2i / (1.0 + np.where(f1, e2 * batch.a_v2i, 0.0))
    g2_noma = e2 * batch.a_v2v / (1.0 + np.where(f1, 0.0, e1 * batch.a_v2v))
    r_noma = np.log1p(g1_noma) + np.where(two, np.log1p(g2_noma), 0.0)
    r_oma = 0.5 * (np.log1p(e1 * batch.a_v2i) + np.log1p(e2 * batch.a_v2v))
    return np.where(oma, r_oma, r_noma)


def radiated_fraction(batch: PairBatch, e1, e2):
    return np.where(batch.mode == OMA, 0.5 * (e1 + e2), e1 + e2)


def pair_objective(batch: PairBatch, e1, e2, xi: float) -> np.ndarray:
    """True ``R - xi * (P_static + P_tx)`` in bit/s for every pair."""
    rate = batch.bandwidth / LN2 * _true_nats(batch, e1, e2)
    return rate - xi * (batch.static_power + radiated_fraction(batch, e1, e2) * batch.p_max)


def _min_sinr(rate, bandwidth, share=1.0):
    return 2.0 ** (np.asarray(rate) / (share * bandwidth)) - 1.0


def _solve_single(a, K, lo, hi):
    """max ln(1 + e a) - K e on [lo, hi]; exact."""
    with np.errstate(divide="ignore"):
        free = np.where(K > 0, 1.0 / np.where(K > 0, K, 1.0) - 1.0 / a, np.inf)
    return np.clip(free, lo, hi)


def _phi(es, a, bf, bs, K, tau, cap, order):
    free = np.where(K > 0, bf / np.where(K > 0, K, 1.0), np.inf)
    lo = np.maximum(np.where(order, es, 0.0), tau * (1.0 / a + es))
    ef = np.minimum(np.maximum(free, lo), cap - es)
    val = bf * (np.log(ef) - np.log1p(a * es)) + bs * np.log(es) - K * (ef + es)
    return ef, val


def _solve_sca_step(a, bf, bs, K, tau, cap, e_lo, e_hi, order):
    """Exact maximizer of the bounded objective over the feasible polygon.

    Shapes are (P,); returns ``(eps_f, eps_s)``.
    """
    Kp = np.where(K > 0, K, np.nan)
    s = cap
    cands = [
        e_lo, e_hi,
        _pos_root(K * a, bf * a - bs * a + K, -bs),                      # eps_f interior
        _pos_root(bs * a, bf + bf * a * s - bs * s * a + bs, -bs * s),   # sum cap active
        _pos_root(2 * K * a, -(bs * a - 2 * K), -(bf + bs)),             # ordering active
        bs / (Kp * (1.0 + tau)),                                         # first-stream rate active
        s - bf / Kp,
        bf / Kp,
        bf / (Kp * np.where(tau > 0, tau, np.nan)) - 1.0 / a,
        np.where(tau < 1, tau / (a * (1.0 - np.where(tau < 1, tau, 0.0))), np.nan),
    ]
    C = np.stack(cands, axis=1)
    C = np.where(np.isfinite(C), C, e_lo[:, None])
    C = np.clip(C, e_lo[:, None], e_hi[:, None])
    ef, val = _phi(C, a[:, None], bf[:, None], bs[:, None], K[:, None], tau[:, None],
                   cap[:, None], order[:, None])
    best = np.argmax(np.where(np.isfinite(val), val, -np.inf), axis=1)
    r = np.arange(C.shape[0])
    return ef[r, best], C[r, best]


def _noma_ranges(a, tau_f, tau_s, a_s, cap, order):
    e_lo = np.maximum(tau_s / a_s, _TINY * cap)
    hi_rate = (cap - tau_f / a) / (1.0 + tau_f)
    e_hi = np.minimum(np.where(order, 0.5 * cap, cap), hi_rate)
    return e_lo, e_hi


def solve_power_batch(batch: PairBatch, xi: float, cfg: SolverConfig | None = None,
                      init=None, trace: bool = False):
    """Solve every pair in ``batch``.

    ``init`` optionally gives ``(eps1, eps2)`` arrays to start the bound
    tightening from. Returns a dict of arrays: ``eps1``, ``eps2``,
    ``objective`` (true, bit/s), ``feasible``, ``iterations``, ``converged``,
    and, when ``trace`` is set, per-iteration true and bounded objectives.
    """
    cfg = cfg or SolverConfig()
    n = len(batch)
    B = batch.bandwidth
    K = xi * batch.p_max * LN2 / B
    e1 = np.zeros(n)
    e2 = np.zeros(n)
    feas = np.zeros(n, dtype=bool)
    iters = np.zeros(n, dtype=int)
    conv = np.ones(n, dtype=bool)
    traces = {"true": [], "surrogate": []}
    cap = batch.cap
    ok_cap = cap > 0

    # single stream: V2I only, full slot
    idx = np.flatnonzero((batch.mode == SINGLE) & ok_cap)
    if idx.size:
        a = batch.a_v2i[idx]
        lo = _min_sinr(batch.r1_min[idx], B) / a
        hi = cap[idx]
        good = (lo <= hi * (1 + 1e-12)) & (a > 0)
        e1[idx] = np.where(good, _solve_single(a, K[idx], np.minimum(lo, hi), hi), 0.0)
        feas[idx] = good

    # OMA: two independent half-slot streams
    idx = np.flatnonzero((batch.mode == OMA) & ok_cap)
    if idx.size:
        hi = cap[idx]
        for arr, a, rmin in ((e1, batch.a_v2i[idx], batch.r1_min[idx]),
                             (e2, batch.a_v2v[idx], batch.r2_min[idx])):
            lo = _min_sinr(rmin, B, 0.5) / a
            good = (lo <= hi * (1 + 1e-12)) & (a > 0)
            # half-slot rate and half-slot power: same optimum as the full-slot problem
            arr[idx] = np.where(good, _solve_single(a, K[idx], np.minimum(lo, hi), hi), 0.0)
            feas[idx] = good if arr is e1 else feas[idx] & good

    idx = np.flatnonzero((batch.mode == NOMA) & ok_cap)
    if idx.size:
        res = _solve_noma(batch.take(idx), K[idx], cfg, None if init is None else
                          (np.asarray(init[0])[idx], np.asarray(init[1])[idx]), trace)
        e1[idx], e2[idx], feas[idx], iters[idx], conv[idx] = res[:5]
        if trace:
            traces = res[5]

    obj = np.where(feas, pair_objective(batch, e1, e2, xi), -np.inf)
    out = dict(eps1=e1, eps2=e2, objective=obj, feasible=feas, iterations=iters, converged=conv)
    if trace:
        out["trace"] = traces
    return out


def _solve_noma(batch: PairBatch, K, cfg: SolverConfig, init, trace):
    f1 = batch.v2i_first
    a_f = np.where(f1, batch.a_v2i, batch.a_v2v)
    a_s = np.where(f1, batch.a_v2v, batch.a_v2i)
    r_f = np.where(f1, batch.r1_min, batch.r2_min)
    r_s = np.where(f1, batch.r2_min, batch.r1_min)
    B = batch.bandwidth
    tau_f = _min_sinr(r_f, B)
    tau_s = _min_sinr(r_s, B)
    cap = batch.cap
    order = np.full(a_f.shape, bool(cfg.enforce_order))
    e_lo, e_hi = _noma_ranges(a_f, tau_f, tau_s, a_s, cap, order)
    feas = (e_lo <= e_hi * (1 + 1e-12)) & (a_f > 0) & (a_s > 0)
    e_hi = np.maximum(e_hi, e_lo)

    if init is None:
        ef0 = cfg.sca_init_first * cap
        es0 = (1.0 - cfg.sca_init_first) * cap
    else:
        i1, i2 = init
        ef0 = np.where(f1, i1, i2)
        es0 = np.where(f1, i2, i1)
        bad = ~((ef0 > 0) & (es0 > 0))
        ef0 = np.where(bad, cfg.sca_init_first * cap, ef0)
        es0 = np.where(bad, (1.0 - cfg.sca_init_first) * cap, es0)

    n = a_f.size
    scale = B / LN2
    static = K / LN2 * B * batch.static_power / batch.p_max   # xi * P_static

    def true_val(ef_, es_):
        return (np.log1p(ef_ * a_f / (1.0 + a_f * es_)) + np.log1p(es_ * a_s)
                - K * (ef_ + es_))

    def run(ef, es):
        iters = np.zeros(n, dtype=int)
        active = feas.copy()
        prev = np.full(n, np.nan)
        tr_true, tr_sur = [], []
        for _ in range(cfg.max_sca_iters):
            if not active.any():
                break
            gf = ef * a_f / (1.0 + a_f * es)
            gs = es * a_s
            bf = gf / (1.0 + gf)
            bs = gs / (1.0 + gs)
            with np.errstate(invalid="ignore", divide="ignore"):
                cf = np.log1p(gf) - bf * np.log(gf)
                cs = np.log1p(gs) - bs * np.log(gs)
                nef, nes = _solve_sca_step(a_f, bf, bs, K, tau_f, cap, e_lo, e_hi, order)
                g_f = nef * a_f / (1.0 + a_f * nes)
                sur = bf * np.log(g_f) + cf + bs * np.log(nes * a_s) + cs - K * (nef + nes)
            ef = np.where(active, nef, ef)
            es = np.where(active, nes, es)
            iters += active
            if trace:
                tr_true.append(np.where(feas, true_val(ef, es), np.nan))
                tr_sur.append(np.where(feas, sur, np.nan))
            sur_bits = scale * sur - static
            done = np.abs(sur_bits - prev) <= cfg.sca_tol * np.maximum(np.abs(sur_bits), scale * 1e-6)
            prev = np.where(active, sur_bits, prev)
            active &= ~done
        return ef, es, iters, ~active, tr_true, tr_sur

    # the objective is not concave in eps: a second start with the interfering
    # (second-decoded) stream at its floor catches the corner optimum that a
    # slow ascent from the interior would take many iterations to reach
    es1 = e_lo
    ef1 = np.clip(np.maximum(ef0, tau_f * (1.0 / a_f + es1)), es1 if cfg.enforce_order else 0.0,
                  cap - es1)
    runs = [run(ef0, es0), run(ef1, es1)]
    vals = [np.where(feas, true_val(r[0], r[1]), -np.inf) for r in runs]
    pick = vals[1] > vals[0]
    ef, es, iters, conv = (np.where(pick, b, a) for a, b in zip(runs[0][:4], runs[1][:4]))
    tr_true, tr_sur = [], []
    if trace:
        L = max(len(runs[0][4]), len(runs[1][4]))
        pad = lambda tr: [tr[min(i, len(tr) - 1)] for i in range(L)] if tr else [np.full(n, np.nan)] * L
        tr_true = [np.where(pick, b, a) for a, b in zip(pad(runs[0][4]), pad(runs[1][4]))]
        tr_sur = [np.where(pick, b, a) for a, b in zip(pad(runs[0][5]), pad(runs[1][5]))]
    e1 = np.where(f1, ef, es)
    e2 = np.where(f1, es, ef)
    e1 = np.where(feas, e1, 0.0)
    e2 = np.where(feas, e2, 0.0)
    return e1, e2, feas, iters, conv, {"true": tr_true, "surrogate": tr_sur}


# --- scalar interface ---------------------------------------------------------

def _kkt(batch: PairBatch, K: float, e1: float, e2: float, cfg: SolverConfig):
    """Multipliers of the bounded problem at its solution, in log-power coordinates."""
    f1 = bool(batch.v2i_first[0])
    a_f = float(batch.a_v2i[0] if f1 else batch.a_v2v[0])
    a_s = float(batch.a_v2v[0] if f1 else batch.a_v2i[0])
    r_f = float(batch.r1_min[0] if f1 else batch.r2_min[0])
    r_s = float(batch.r2_min[0] if f1 else batch.r1_min[0])
    B = batch.bandwidth
    tau_f = float(_min_sinr(r_f, B))
    tau_s = float(_min_sinr(r_s, B))
    cap = float(batch.cap[0])
    ef, es = (e1, e2) if f1 else (e2, e1)
    gf = ef * a_f / (1.0 + a_f * es)
    gs = es * a_s
    bf, bs = gf / (1 + gf), gs / (1 + gs)
    grad = np.array([bf - K * ef, -bf * a_f * es / (1 + a_f * es) + bs - K * es])
    names = ["power_cap", "power_order", "rate_first", "rate_second"]
    gvals = [ef + es - cap, (es - ef) if cfg.enforce_order else -np.inf,
             tau_f * (1 / a_f + es) - ef, tau_s / a_s - es]
    grads = [np.array([ef, es]), np.array([-1.0, 1.0]),
             np.array([-ef, tau_f * es]), np.array([0.0, -1.0])]
    scale = [cap, max(ef, es), max(ef, 1e-300), max(es, 1e-300)]
    active = [i for i in range(4) if gvals[i] >= -1e-7 * scale[i]]
    lam = np.zeros(4)
    if active:
        A = np.stack([grads[i] for i in active], axis=1)
        sol, _ = nnls(A, grad)
        lam[active] = sol
        resid = grad - A @ sol
    else:
        resid = grad
    rel = float(np.linalg.norm(resid) / max(np.linalg.norm(grad), 1.0))
    stream = {True: ("v2i", "v2v"), False: ("v2v", "v2i")}[f1]
    label = {"power_cap": "power_cap", "power_order": "power_order",
             "rate_first": f"rate_{stream[0]}", "rate_second": f"rate_{stream[1]}"}
    slack = {label[names[i]]: float(-gvals[i]) for i in range(4)}
    return {label[names[i]]: float(lam[i]) for i in range(4)}, rel, slack


def solve_power(problem: PairProblem | PairBatch, xi: float, cfg: SolverConfig | None = None,
                init=None) -> PowerSolution:
    """Solve a single pair problem and report multipliers and traces."""
    cfg = cfg or SolverConfig()
    batch = problem.batch() if isinstance(problem, PairProblem) else problem
    if len(batch) != 1:
        raise ValueError("solve_power takes one pair; use solve_power_batch")
    res = solve_power_batch(batch, xi, cfg,
                            init=None if init is None else (np.atleast_1d(init[0]),
                                                            np.atleast_1d(init[1])),
                            trace=True)
    e1, e2 = float(res["eps1"][0]), float(res["eps2"][0])
    feasible = bool(res["feasible"][0])
    duals, resid, slack, violated = {}, 0.0, {}, []
    if not feasible:
        violated = _violations(batch)
    elif batch.mode[0] == NOMA:
        K = xi * float(batch.p_max[0]) * LN2 / batch.bandwidth
        duals, resid, slack = _kkt(batch, K, e1, e2, cfg)
    tt = [float(t[0]) for t in res["trace"]["true"]] if res["trace"]["true"] else []
    st = [float(t[0]) for t in res["trace"]["surrogate"]] if res["trace"]["surrogate"] else []
    scale = batch.bandwidth / LN2
    static = xi * float(batch.static_power[0])
    return PowerSolution(
        eps1=e1, eps2=e2,
        w1=math.log2(e1) if e1 > 0 else -math.inf,
        w2=math.log2(e2) if e2 > 0 else -math.inf,
        dual_multipliers=duals, converged=bool(res["converged"][0]),
        iterations=int(res["iterations"][0]), feasible=feasible,
        objective=float(res["objective"][0]), stationarity_residual=resid,
        slack=slack, violated=violated,
        true_trace=[scale * v - static for v in tt],
        surrogate_trace=[scale * v - static for v in st])


def _violations(batch: PairBatch) -> list[str]:
    out = []
    if batch.cap[0] <= 0:
        out.append("cu_qos")
    B = batch.bandwidth
    if batch.mode[0] == SINGLE:
        if _min_sinr(batch.r1_min[0], B) / batch.a_v2i[0] > batch.cap[0]:
            out.append("delay_v2i")
        return out
    share = 0.5 if batch.mode[0] == OMA else 1.0
    t1 = _min_sinr(batch.r1_min[0], B, share) / batch.a_v2i[0] if batch.a_v2i[0] > 0 else np.inf
    t2 = _min_sinr(batch.r2_min[0], B, share) / batch.a_v2v[0] if batch.a_v2v[0] > 0 else np.inf
    if t1 > batch.cap[0]:
        out.append("delay_v2i")
    if t2 > batch.cap[0]:
        out.append("delay_v2v")
    if not out:
        out.append("delay_joint")
    return out
