"""Server selection, task splitting and the Dinkelbach outer loop.

One slot is solved by alternating two blocks until the energy efficiency
settles: (i) pick an S-VU and a task split for every T-VU in turn, given the
current radio solution; (ii) for the resulting selection, solve the power
subproblem of every (CU, T-VU) pair and match T-VUs to CU sub-channels. The
parameter ``xi`` is reset to the EE achieved after each pass.

The comparison schemes reuse this loop with a different selection rule or
access discipline (see :class:`Variant`).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .assignment import build_weight_matrix, kuhn_munkres
from .config import Config, SolverConfig
from .model import Allocation, ChannelSlot, ComputeBudget, RateReport, TaskSpec, evaluate
from .power import NOMA, OMA, SINGLE, PairBatch, qos_cap, solve_power_batch
from .scenario import Scenario

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Variant:
    """Selection rule and access discipline of an algorithm."""
    name: str = "jccraa"
    selection: str = "social"     # "social" | "nearest" | "none"
    access: str = "noma"          # "noma" | "oma"


JCCRAA = Variant()


@dataclass
class CandidateSet:
    tvu: int
    order: list                  # S-VU indices, best first
    scores: dict


@dataclass
class SlotResult:
    allocation: Allocation
    report: RateReport
    xi_trajectory: list
    iterations: int
    converged: bool
    reverted: bool
    excluded: np.ndarray          # T-VUs left without a sub-channel
    records: list = field(default_factory=list)

    @property
    def ee(self) -> float:
        return self.report.ee


@dataclass
class RunResult:
    algorithm: str
    slots: list

    @property
    def ee(self) -> float:
        """EE summed over slots."""
        return float(sum(s.ee for s in self.slots))

    @property
    def iterations(self) -> float:
        return float(np.mean([s.iterations for s in self.slots]))

    @property
    def infeasible_fraction(self) -> float:
        return float(np.mean([s.excluded.mean() if s.excluded.size else 0.0 for s in self.slots]))

    @property
    def converged(self) -> bool:
        return all(s.converged for s in self.slots)


# --- task split ---------------------------------------------------------------

def _split_core(D, C, y_m, y_ms, y_mn, r1, r2, limit):
    D, C, r1, r2 = (np.asarray(x, dtype=float) for x in (D, C, r1, r2))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        b1 = np.where(r1 > 0, limit / (D * (1.0 / r1 + C / y_ms)), 0.0)
        b2 = np.where(r2 > 0, limit / (D * (1.0 / r2 + C / y_mn)), 0.0)
    b1 = np.clip(b1, 0.0, 1.0)
    b2 = np.clip(b2, 0.0, 1.0)
    need = np.maximum(0.0, 1.0 - limit * y_m / (D * C))
    beta1 = b1
    beta2 = np.minimum(b2, 1.0 - beta1)
    ok = beta1 + beta2 >= need - 1e-12
    return beta1, beta2, ok


def choose_task_split(spec: TaskSpec, budget: ComputeBudget, rates, T_tol: float | None = None,
                      margin: float = 1e-9):
    """Largest feasible offload ``beta1 + beta2`` given link rates.

    V2I takes as much as its rate allows, V2V the remainder up to its own cap,
    local CPU the rest. Returns ``(beta1, beta2, feasible)`` arrays.
    """
    T = spec.T_tol if T_tol is None else T_tol
    r1, r2 = rates
    return _split_core(spec.D, spec.C, budget.y_m, budget.y_ms, budget.y_mn, r1, r2, T - margin)


def min_rate(D, beta, C, y, limit):
    """Rate keeping ``D*beta/R + D*beta*C/y`` within ``limit``; ``inf`` if the CPU alone overruns it."""
    D, beta = np.asarray(D, dtype=float), np.asarray(beta, dtype=float)
    slack = limit - D * beta * C / y
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(beta > 0, np.where(slack > 0, D * beta / slack, np.inf), 0.0)
    return r


# --- server selection ---------------------------------------------------------

@dataclass
class _SlotCtx:
    slot: ChannelSlot
    spec: TaskSpec
    budget: ComputeBudget
    serving: np.ndarray
    trust: np.ndarray             # (M, N) delta * k
    dist: np.ndarray              # (M, N)
    sel: np.ndarray               # selection mask (M, N) for the variant
    cfg: SolverConfig
    variant: Variant
    cu_rate_min: float


def _stream_rates(ctx: _SlotCtx, m, n_arr, e1, e2, u):
    """Predicted (R_v2i, R_v2v) of T-VU ``m`` towards each candidate S-VU."""
    sl = ctx.slot
    s = ctx.serving[m]
    P = sl.p_tvu[m]
    B = sl.bandwidth_B
    if u >= 0:
        i_rsu = sl.p_cu[u] * sl.H_us[u, s] + sl.sigma2
        i_svu = sl.p_cu[u] * sl.H_un[u, n_arr] + sl.sigma2
    else:
        i_rsu = np.median(sl.p_cu * sl.H_us[:, s]) + sl.sigma2
        i_svu = np.median(sl.p_cu[:, None] * sl.H_un[:, n_arr], axis=0) + sl.sigma2
    h_ms = sl.H_ms[m, s]
    h_mn = sl.H_mn[m, n_arr]
    psi = ctx.trust[m, n_arr]
    if ctx.variant.access == "oma":
        g1 = e1 * P * h_ms / i_rsu * np.ones_like(h_mn)
        g2 = psi * e2 * P * h_mn / (psi * (i_svu - sl.sigma2) + sl.sigma2)
        sh = np.where(psi > 0, 0.5, 1.0)
        return sh * B * np.log2(1 + g1), np.where(psi > 0, 0.5, 0.0) * B * np.log2(1 + g2)
    first = h_ms <= h_mn
    g1 = e1 * P * h_ms / (i_rsu + np.where(first & (psi > 0), e2 * P * h_ms, 0.0))
    g2 = psi * e2 * P * h_mn / (psi * (i_svu - sl.sigma2) + sl.sigma2
                                 + np.where(first, 0.0, e1 * P * h_mn))
    return B * np.log2(1 + g1), B * np.log2(1 + g2)


def sm_sstsa(ctx: _SlotCtx, xi: float, eps1, eps2, cu_of_tvu, eligible):
    """Select at most one S-VU per T-VU and fix the task split.

    Returns ``(svu, psi_eff, beta1, beta2, feasible, candidates)``; ``svu[m]``
    is -1 for RSU-only offloading and ``feasible[m]`` is False when not even
    that admits a split at the predicted rates.
    """
    cfg = ctx.cfg
    M, N = ctx.trust.shape
    D, C = ctx.spec.D, ctx.spec.C
    bud = ctx.budget
    limit = ctx.spec.T_tol - cfg.delay_margin_s
    available = np.ones(N, dtype=bool)
    svu = np.full(M, -1)
    b1 = np.zeros(M)
    b2 = np.zeros(M)
    feas = np.zeros(M, dtype=bool)
    cands = []
    for m in range(M):
        if not eligible[m]:
            continue
        u = cu_of_tvu[m]
        has_cur = u >= 0 and eps1[m] > 0
        two_cur = has_cur and eps2[m] > 0
        e1 = eps1[m] if two_cur else cfg.init_eps1
        e2 = eps2[m] if two_cur else cfg.init_eps2
        u_est = u if has_cur else -1
        pool = np.flatnonzero(available & ctx.sel[m] & (ctx.slot.H_mn[m] > 0))
        if pool.size:
            r1, r2 = _stream_rates(ctx, m, pool, e1, e2, u_est)
            if ctx.variant.selection == "nearest":
                score = -ctx.dist[m, pool]
            else:
                score = r2 - xi * e2 * ctx.slot.p_tvu[m]
            order = np.lexsort((pool, -score))
            cands.append(CandidateSet(m, [int(pool[i]) for i in order],
                                      {int(pool[i]): float(score[i]) for i in order}))
            for i in order:
                bb1, bb2, ok = _split_core(D[m], C[m], bud.y_m[m], bud.y_ms[m], bud.y_mn[m],
                                           r1[i], r2[i], limit)
                if ok:
                    n = int(pool[i])
                    svu[m], b1[m], b2[m], feas[m] = n, bb1, bb2, True
                    available[n] = False
                    break
        if svu[m] < 0:
            e1f = eps1[m] if has_cur else cfg.init_eps1
            sl = ctx.slot
            s = ctx.serving[m]
            i_rsu = (sl.p_cu[u] * sl.H_us[u, s] if has_cur
                     else np.median(sl.p_cu * sl.H_us[:, s])) + sl.sigma2
            r1 = sl.bandwidth_B * np.log2(1 + e1f * sl.p_tvu[m] * sl.H_ms[m, s] / i_rsu)
            bb1, bb2, ok = _split_core(D[m], C[m], bud.y_m[m], bud.y_ms[m], bud.y_mn[m],
                                       r1, 0.0, limit)
            b1[m], b2[m], feas[m] = bb1, 0.0, bool(ok)
    idx = np.arange(M)
    has = svu >= 0
    psi_eff = np.zeros((M, N), dtype=np.int8)
    psi_eff[idx[has], svu[has]] = ctx.trust[idx[has], svu[has]]
    b2 = np.where(has & (psi_eff[idx, np.maximum(svu, 0)] == 1), b2, 0.0)
    return svu, psi_eff, b1, b2, feas, cands


# --- pair problems ------------------------------------------------------------

def pair_batch(ctx: _SlotCtx, svu, psi_eff, beta1, beta2, tvus) -> tuple[PairBatch, np.ndarray]:
    """Power subproblems for every CU paired with each T-VU in ``tvus``."""
    sl = ctx.slot
    U = sl.num_cus
    tvus = np.asarray(tvus, dtype=int)
    k = tvus.size
    uu = np.repeat(np.arange(U)[:, None], k, axis=1)       # (U, k)
    mm = np.repeat(tvus[None, :], U, axis=0)
    s = ctx.serving[mm]
    n = np.maximum(svu[mm], 0)
    active = (svu[mm] >= 0) & (psi_eff[mm, n] == 1)
    P = sl.p_tvu[mm]
    h_ms = sl.H_ms[mm, s]
    h_mn = np.where(active, sl.H_mn[mm, n], 0.0)
    a1 = P * h_ms / (sl.p_cu[uu] * sl.H_us[uu, s] + sl.sigma2)
    a2 = np.where(active, P * h_mn / (sl.p_cu[uu] * sl.H_un[uu, n] + sl.sigma2), 0.0)
    cap = np.minimum(1.0, qos_cap(sl.p_cu[uu] * sl.H_u[uu], P * sl.H_mu[mm, uu], sl.sigma2,
                                  ctx.cu_rate_min, sl.bandwidth_B))
    two = active if ctx.variant.selection != "none" else np.zeros_like(active)
    mode = np.where(two, OMA if ctx.variant.access == "oma" else NOMA, SINGLE)
    limit = ctx.spec.T_tol - ctx.cfg.delay_margin_s
    D, C, bud = ctx.spec.D, ctx.spec.C, ctx.budget
    r1 = min_rate(D[mm], beta1[mm], C[mm], bud.y_ms[mm], limit)
    r2 = min_rate(D[mm], beta2[mm], C[mm], bud.y_mn[mm], limit)
    static = bud.static_power()[mm]
    f = lambda x: np.asarray(x, dtype=float).ravel()
    batch = PairBatch(mode=mode.ravel(), v2i_first=(h_ms <= h_mn).ravel() | ~active.ravel(),
                      a_v2i=f(a1), a_v2v=f(a2), cap=f(cap), r1_min=f(r1), r2_min=f(r2),
                      p_max=f(P), static_power=f(static), bandwidth=sl.bandwidth_B)
    finite = np.isfinite(batch.r1_min) & np.isfinite(batch.r2_min)
    return batch, finite.reshape(U, k)


# --- outer loop ---------------------------------------------------------------

def _context(scn: Scenario, t: int, cfg: SolverConfig, variant: Variant) -> _SlotCtx:
    slot = scn.slots[t]
    trust = scn.trust(t)
    dist = scn.distances(t)
    M, N = trust.shape
    if variant.selection == "social":
        sel = trust.astype(bool)
    elif variant.selection == "nearest":
        sel = np.ones((M, N), dtype=bool)
    else:
        sel = np.zeros((M, N), dtype=bool)
    return _SlotCtx(slot=slot, spec=scn.tasks, budget=scn.budget, serving=scn.serving[t],
                    trust=trust, dist=dist, sel=sel, cfg=cfg, variant=variant,
                    cu_rate_min=scn.config.cu_rate_min_bps)


class _Pairs:
    """Best known power solution and task split of every (CU, T-VU) pair."""

    def __init__(self, U, M):
        self.obj = np.full((U, M), -np.inf)
        self.ok = np.zeros((U, M), dtype=bool)
        self.eps = np.zeros((2, U, M))
        self.b1 = np.zeros((U, M))
        self.b2 = np.zeros((U, M))

    def reset(self, tvus):
        self.obj[:, tvus] = -np.inf
        self.ok[:, tvus] = False

    def solve(self, ctx, svu, psi_eff, b1, b2, tvus, xi, e1, e2):
        """Solve every CU for each T-VU in ``tvus``; a pair keeps the better of old and new."""
        if not tvus.size:
            return
        U = ctx.slot.num_cus
        k = tvus.size
        batch, finite = pair_batch(ctx, svu, psi_eff, b1, b2, tvus)
        res = solve_power_batch(batch, xi, ctx.cfg, init=(np.tile(e1[tvus], U), np.tile(e2[tvus], U)))
        obj = res["objective"].reshape(U, k)
        take = res["feasible"].reshape(U, k) & finite & (~self.ok[:, tvus] | (obj > self.obj[:, tvus]))
        rr, cc = np.nonzero(take)
        mm = tvus[cc]
        self.obj[rr, mm] = obj[rr, cc]
        self.ok[rr, mm] = True
        self.eps[0, rr, mm] = res["eps1"].reshape(U, k)[rr, cc]
        self.eps[1, rr, mm] = res["eps2"].reshape(U, k)[rr, cc]
        self.b1[rr, mm] = b1[mm]
        self.b2[rr, mm] = b2[mm]

    def match(self, must):
        """KM on the pair weights; T-VUs that cannot finish locally are covered first."""
        if not self.ok.any():
            return np.full(self.obj.shape[1], -1)
        w = np.where(self.ok, self.obj, 0.0)
        bonus = 2.0 * w.shape[1] * max(1.0, float(np.abs(w).max()))
        return kuhn_munkres(build_weight_matrix(w + bonus * must[None, :], self.ok)).cu_of_tvu


def _min_offload(ctx, tvus):
    """Smallest RSU share meeting the local deadline; > 1 when none does."""
    limit = ctx.spec.T_tol - ctx.cfg.delay_margin_s
    D, C, y = ctx.spec.D[tvus], ctx.spec.C[tvus], ctx.budget.y_m[tvus]
    need = np.maximum(0.0, 1.0 - limit * y / (D * C))
    # the RSU alone must then finish its share in time
    over = D * need * C / ctx.budget.y_ms[tvus] >= limit
    return np.where(over, 2.0, need)


def _allocation(ctx, svu, psi_eff, b1, b2, cu, e1, e2) -> Allocation:
    M = svu.size
    U = ctx.slot.num_cus
    x_tvu = np.where(cu >= 0, cu, -1)      # SC index equals CU index (x_cu = arange)
    keep = cu >= 0
    return Allocation(psi=psi_eff, svu=svu.copy(), beta1=np.where(keep, b1, 0.0),
                      beta2=np.where(keep, b2, 0.0), x_cu=np.arange(U), x_tvu=x_tvu,
                      eps1=np.where(keep, e1, 0.0), eps2=np.where(keep, e2, 0.0),
                      serving_rsu=np.where(ctx.serving >= 0, ctx.serving, 0),
                      access=ctx.variant.access)


def _step(ctx, xi, svu, psi_eff, b1, b2, cand, e1, e2, must, eligible, records, tag):
    """Power + matching for a fixed selection; returns ``(allocation, cu_of_tvu)``."""
    M = svu.size
    svu = svu.copy()
    psi_eff = psi_eff.copy()
    pairs = _Pairs(ctx.slot.num_cus, M)
    pairs.solve(ctx, svu, psi_eff, b1, b2, cand, xi, e1, e2)
    # the largest split pins a rate floor; the smallest one the deadline allows is tried too
    need = _min_offload(ctx, cand)
    lo1 = b1.copy()
    lo2 = b2.copy()
    lo1[cand] = need
    lo2[cand] = 0.0
    pairs.solve(ctx, svu, psi_eff, lo1, lo2, cand[need <= 1.0], xi, e1, e2)
    cun = pairs.match(must)
    # T-VUs still left out get one more try RSU-only
    lost = np.flatnonzero(eligible & (cun < 0))
    if lost.size:
        svu[lost] = -1
        psi_eff[lost] = 0
        need = _min_offload(ctx, lost)
        lo1 = np.zeros(M)
        lo1[lost] = need
        pairs.reset(lost)
        pairs.solve(ctx, svu, psi_eff, lo1, np.zeros(M), lost[need <= 1.0], xi, e1, e2)
        cun = pairs.match(must)
        records.append(dict(tag, fallback=[int(m) for m in lost]))
    got = np.flatnonzero(cun >= 0)
    out = np.zeros((4, M))
    out[0, got] = pairs.b1[cun[got], got]
    out[1, got] = pairs.b2[cun[got], got]
    out[2, got] = pairs.eps[0, cun[got], got]
    out[3, got] = pairs.eps[1, cun[got], got]
    return _allocation(ctx, svu, psi_eff, *out[:2], cun, *out[2:]), cun


def solve_slot(scn: Scenario, t: int, cfg: SolverConfig, variant: Variant = JCCRAA,
               trace: bool = False) -> SlotResult:
    ctx = _context(scn, t, cfg, variant)
    sl = ctx.slot
    M, N = ctx.trust.shape
    eligible = ctx.serving >= 0
    must = _min_offload(ctx, np.arange(M)) > 0
    e1 = np.zeros(M)
    e2 = np.zeros(M)
    cu = np.full(M, -1)
    xi = 0.0
    traj = [xi]
    records = []
    best = None
    converged = reverted = False
    it = 0
    score = lambda a: evaluate(sl, ctx.spec, ctx.budget, a, cfg.delay_margin_s, cfg.power_formula)
    while it < cfg.max_outer_iters:
        it += 1
        tag = dict(slot=t, iteration=it)
        svu, psi_eff, b1, b2, feas, _ = sm_sstsa(ctx, xi, e1, e2, cu, eligible)
        alloc, cun = _step(ctx, xi, svu, psi_eff, b1, b2, np.flatnonzero(eligible & feas),
                           e1, e2, must, eligible, records, tag)
        rep = score(alloc)
        if best is not None and cfg.keep_incumbent and rep.ee < best[1].ee:
            # the new selection lost ground: redo the step on the incumbent's selection and split
            inc = best[0]
            alloc, cun = _step(ctx, xi, inc.svu, inc.psi, inc.beta1, inc.beta2,
                               np.flatnonzero(inc.x_tvu >= 0), e1, e2, must, eligible,
                               records, dict(tag, incumbent=True))
            rep = score(alloc)
            reverted = True
        xi_new = rep.ee
        alpha = abs(xi_new - xi)
        rec = dict(tag, xi=xi_new, alpha=alpha, assigned=int((cun >= 0).sum()),
                   v2v=int(alloc.active_v2v().sum()))
        if best is not None and cfg.keep_incumbent and xi_new < best[1].ee:
            rec["rejected"] = True
            records.append(rec)
            converged = alpha < cfg.conv_tol * max(xi, 1e-300)
            break
        records.append(rec)
        best = (alloc, rep)
        traj.append(xi_new)
        xi = xi_new
        e1, e2, cu = alloc.eps1, alloc.eps2, cun
        if alpha < cfg.conv_tol * max(xi, 1e-300):
            converged = True
            break
    alloc, rep = best
    if trace:
        for r in (r for r in records if "xi" in r):
            log.debug("slot %(slot)d iter %(iteration)d xi=%(xi).6g alpha=%(alpha).3g", r)
    return SlotResult(allocation=alloc, report=rep, xi_trajectory=traj, iterations=it,
                      converged=converged, reverted=reverted,
                      excluded=alloc.x_tvu < 0, records=records)


def run_variant(scn: Scenario, config: Config | SolverConfig, variant: Variant = JCCRAA) -> RunResult:
    cfg = config.solver if isinstance(config, Config) else config
    return RunResult(variant.name, [solve_slot(scn, t, cfg, variant) for t in range(scn.num_slots)])


def jccraa(scn: Scenario, config: Config | SolverConfig) -> RunResult:
    """Joint selection, split, power and spectrum allocation for every slot."""
    return run_variant(scn, config, JCCRAA)
