"""Brute-force references for tests.

Nothing here imports the solver, power or assignment modules: every rate,
power and delay is recomputed from the raw gains with scalar formulas so a
shared bug cannot cancel out.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar


# --- assignment ---------------------------------------------------------------

def brute_force_assignment(w) -> tuple[tuple, float]:
    """Best injection of T-VUs (columns) into CUs (rows) by enumeration.

    Non-finite entries are forbidden pairs; a T-VU with no usable CU in the
    chosen injection is left out. Returns ``(cu_of_tvu, total)``.
    """
    w = np.asarray(w, dtype=float)
    U, M = w.shape
    if U > 8:
        raise ValueError("brute_force_assignment is limited to U <= 8")
    best, best_key = None, None
    for rows in itertools.permutations(range(U), M):
        vals = [w[r, m] for m, r in enumerate(rows)]
        ok = [math.isfinite(v) for v in vals]
        key = (sum(ok), sum(v for v, o in zip(vals, ok) if o))
        if best_key is None or key > best_key:
            best_key = key
            best = tuple(r if o else -1 for r, o in zip(rows, ok))
    if best is None:
        return (), 0.0
    return best, float(best_key[1])


# --- one pair -----------------------------------------------------------------

@dataclass(frozen=True)
class PowerInstance:
    """Raw physical inputs of one (CU, T-VU[, S-VU]) power problem."""
    B: float
    P: float              # T-VU max power, W
    h_ms: float
    h_mn: float           # 0 when there is no V2V stream
    cu_power: float
    h_u: float
    h_us: float
    h_un: float
    h_mu: float
    sigma2: float
    cu_rate_min: float = 0.0
    r1_min: float = 0.0
    r2_min: float = 0.0
    static: float = 0.0
    enforce_order: bool = True


@dataclass(frozen=True)
class GridSpec:
    n1: int = 400
    n2: int = 400
    lo: float = 0.0
    hi: float = 1.0


def _pair_rates(inst: PowerInstance, e1, e2):
    """V2I and V2V rates (bit/s) with the decoding order set by the gains."""
    noise_rsu = inst.cu_power * inst.h_us + inst.sigma2
    noise_svu = inst.cu_power * inst.h_un + inst.sigma2
    sig1 = e1 * inst.P * inst.h_ms
    sig2 = e2 * inst.P * inst.h_mn
    if inst.h_mn <= 0:
        return inst.B * np.log2(1 + sig1 / noise_rsu), np.zeros_like(np.asarray(sig2, float))
    if inst.h_ms <= inst.h_mn:        # RSU decodes first, sees the V2V stream
        g1 = sig1 / (noise_rsu + e2 * inst.P * inst.h_ms)
        g2 = sig2 / noise_svu
    else:
        g1 = sig1 / noise_rsu
        g2 = sig2 / (noise_svu + e1 * inst.P * inst.h_mn)
    return inst.B * np.log2(1 + g1), inst.B * np.log2(1 + g2)


def _pair_feasible(inst: PowerInstance, e1, e2, rtol=0.0):
    r1, r2 = _pair_rates(inst, e1, e2)
    tot = e1 + e2
    cu = inst.B * np.log2(1 + inst.cu_power * inst.h_u / (tot * inst.P * inst.h_mu + inst.sigma2))
    ok = (tot <= 1 + 1e-12) & (e1 >= 0) & (e2 >= 0)
    ok &= cu >= inst.cu_rate_min * (1 - rtol)
    ok &= r1 >= inst.r1_min * (1 - rtol)
    if inst.h_mn > 0:
        ok &= r2 >= inst.r2_min * (1 - rtol)
        if inst.enforce_order:
            ok &= np.where(inst.h_ms <= inst.h_mn, e1 >= e2 * (1 - rtol), e2 >= e1 * (1 - rtol))
    return ok


def pair_value(inst: PowerInstance, e1, e2, xi):
    r1, r2 = _pair_rates(inst, e1, e2)
    return r1 + r2 - xi * (inst.static + (e1 + e2) * inst.P)


def grid_search_power(inst: PowerInstance, xi: float, grid: GridSpec = GridSpec()):
    """Exhaustive search of the true pair objective on a uniform grid.

    Returns ``(e1, e2, value)``; ``value`` is ``-inf`` if no grid point is feasible.
    """
    if grid.n1 < 100 or grid.n2 < 100:
        raise ValueError("grid resolution must be at least 100 x 100")
    g1 = np.linspace(grid.lo, grid.hi, grid.n1)
    g2 = np.linspace(grid.lo, grid.hi, grid.n2) if inst.h_mn > 0 else np.zeros(1)
    E1, E2 = np.meshgrid(g1, g2, indexing="ij")
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(_pair_feasible(inst, E1, E2), pair_value(inst, E1, E2, xi), -np.inf)
    i = np.unravel_index(np.argmax(val), val.shape)
    if not np.isfinite(val[i]):
        return math.nan, math.nan, -math.inf
    return float(E1[i]), float(E2[i]), float(val[i])


def _split_ok(r1, r2, D, C, y_m, y_ms, y_mn, limit):
    """Some task split meets every delay budget at these rates (array-friendly)."""
    r1, r2 = np.asarray(r1, dtype=float), np.asarray(r2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        c1 = np.where(r1 > 0, np.minimum(1.0, limit / (D * (1.0 / r1 + C / y_ms))), 0.0)
        c2 = np.where(r2 > 0, np.minimum(1.0, limit / (D * (1.0 / r2 + C / y_mn))), 0.0)
    need = max(0.0, 1.0 - limit * y_m / (D * C))
    return np.minimum(1.0, c1 + c2) >= need - 1e-12


def best_pair_point(inst: PowerInstance, xi: float, split=None):
    """Global maximizer of the pair objective: dense grid, then local polish.

    ``split`` is an optional predicate on ``(r1, r2)`` for the delay budgets.
    """
    two = inst.h_mn > 0
    pts = np.unique(np.concatenate([np.geomspace(1e-7, 1.0, 160), np.linspace(0.0, 1.0, 161)]))
    if two:
        E1, E2 = np.meshgrid(pts, pts, indexing="ij")
    else:
        E1, E2 = pts, np.zeros_like(pts)
    with np.errstate(divide="ignore", invalid="ignore"):
        feas = _pair_feasible(inst, E1, E2)
        if split is not None:
            r1, r2 = _pair_rates(inst, E1, E2)
            feas &= split(r1, r2)
        val = np.where(feas, pair_value(inst, E1, E2, xi), -np.inf)
    flat = np.argsort(val, axis=None)[::-1][:6]
    scale = inst.B
    best = (math.nan, math.nan, -math.inf)

    def accept(e1, e2):
        nonlocal best
        e1, e2 = float(np.clip(e1, 0, 1)), float(np.clip(e2, 0, 1))
        if not _pair_feasible(inst, e1, e2):
            return
        if split is not None and not bool(split(*_pair_rates(inst, e1, e2))):
            return
        v = float(pair_value(inst, e1, e2, xi))
        if v > best[2]:
            best = (e1, e2, v)

    for f in flat:
        if not np.isfinite(val.flat[f]):
            break
        e1, e2 = float(E1.flat[f]), float(E2.flat[f])
        accept(e1, e2)
        if two:
            cons = [{"type": "ineq", "fun": lambda x: _margins(inst, x[0], x[1], split)}]
            res = minimize(lambda x: -pair_value(inst, x[0], x[1], xi) / scale, [e1, e2],
                           method="SLSQP", bounds=[(0, 1), (0, 1)], constraints=cons,
                           options={"ftol": 1e-15, "maxiter": 500})
            accept(*res.x)
            accept(res.x[0] * (1 - 1e-12), res.x[1] * (1 - 1e-12))
        else:
            lo, hi = _single_interval(inst, split)
            if lo <= hi:
                res = minimize_scalar(lambda x: -pair_value(inst, x, 0.0, xi) / scale,
                                      bounds=(lo, hi), method="bounded",
                                      options={"xatol": 1e-14})
                accept(res.x, 0.0)
                accept(lo, 0.0)
                accept(hi, 0.0)
    return best


def _margins(inst, e1, e2, split):
    r1, r2 = _pair_rates(inst, e1, e2)
    tot = e1 + e2
    cu = inst.B * math.log2(1 + inst.cu_power * inst.h_u / (tot * inst.P * inst.h_mu + inst.sigma2))
    out = [1 - tot, (cu - inst.cu_rate_min) / inst.B, (r1 - inst.r1_min) / inst.B,
           (r2 - inst.r2_min) / inst.B]
    if inst.enforce_order:
        out.append(e1 - e2 if inst.h_ms <= inst.h_mn else e2 - e1)
    if split is not None:
        out.append(1.0 if bool(split(r1, r2)) else -1.0)
    return np.array(out, dtype=float)


def _single_interval(inst, split):
    """Feasible interval of eps1 when only the V2I stream exists."""
    def ok(e):
        e = np.asarray(e, dtype=float)
        good = _pair_feasible(inst, e, np.zeros_like(e))
        if split is not None:
            good &= split(*_pair_rates(inst, e, np.zeros_like(e)))
        return good
    grid = np.linspace(0.0, 1.0, 20001)
    with np.errstate(divide="ignore", invalid="ignore"):
        mask = ok(grid)
    if not mask.any():
        return 1.0, 0.0
    i, j = np.flatnonzero(mask)[[0, -1]]
    # feasibility is an interval in eps1: sharpen both ends by bisection
    a, b = (grid[i - 1], grid[i]) if i > 0 else (grid[0], grid[0])
    while b - a > 1e-15:
        mid = 0.5 * (a + b)
        a, b = (a, mid) if ok(mid) else (mid, b)
    lo = b
    a, b = (grid[j], grid[j + 1]) if j + 1 < grid.size else (grid[j], grid[j])
    while b - a > 1e-15:
        mid = 0.5 * (a + b)
        a, b = (mid, b) if ok(mid) else (a, mid)
    return lo, a


# --- full micro instance ------------------------------------------------------

@dataclass
class OracleResult:
    ee: float
    feasible: bool
    cu_of_tvu: tuple = ()
    svu_of_tvu: tuple = ()
    eps: tuple = ()
    configs: int = 0
    notes: list = field(default_factory=list)


def exhaustive_small_instance_ee(scn, cfg, t: int = 0) -> OracleResult:
    """Best EE over every spectrum pairing, trusted S-VU choice, split and power.

    For a fixed ``xi`` the subtractive objective separates over T-VUs; each
    (T-VU, CU, S-VU) block is maximized globally and the blocks are combined
    by enumerating the discrete choices. ``xi`` is then updated to the ratio
    at the maximizer until the subtractive optimum reaches zero.
    """
    sl = scn.slots[t]
    M, N = sl.H_mn.shape
    U = sl.H_u.shape[0]
    if M > 2 or U > 3 or N > 2:
        raise ValueError("micro instances only: M <= 2, U <= 3, N <= 2")
    trust = scn.trust(t)
    serving = scn.serving[t]
    D, C = scn.tasks.D, scn.tasks.C
    bud = scn.budget
    limit = scn.tasks.T_tol - cfg.delay_margin_s
    static = [bud.P_cir + bud.kappa * (bud.y_m[m] ** 3 + bud.y_ms[m] ** 3 + bud.y_mn[m] ** 3)
              for m in range(M)]
    total_static = float(sum(static))
    B = sl.bandwidth_B

    def local_only_ok(m):
        return D[m] * C[m] / bud.y_m[m] <= limit

    def inst(m, u, n):
        s = serving[m]
        return PowerInstance(B=B, P=float(sl.p_tvu[m]), h_ms=float(sl.H_ms[m, s]),
                             h_mn=0.0 if n < 0 else float(sl.H_mn[m, n]),
                             cu_power=float(sl.p_cu[u]), h_u=float(sl.H_u[u]),
                             h_us=float(sl.H_us[u, s]),
                             h_un=0.0 if n < 0 else float(sl.H_un[u, n]),
                             h_mu=float(sl.H_mu[m, u]), sigma2=float(sl.sigma2),
                             cu_rate_min=scn.config.cu_rate_min_bps,
                             static=0.0, enforce_order=cfg.enforce_order)

    def splitter(m):
        return lambda r1, r2: _split_ok(r1, r2, D[m], C[m], bud.y_m[m], bud.y_ms[m],
                                        bud.y_mn[m], limit)

    # discrete options per T-VU: (cu, svu), cu = -1 means no sub-channel
    options = {}
    for m in range(M):
        opts = [(-1, -1)]
        if serving[m] >= 0:
            for u in range(U):
                opts.append((u, -1))
                for n in range(N):
                    if trust[m, n] == 1 and sl.H_mn[m, n] > 0:
                        opts.append((u, n))
        options[m] = opts
    combos = [c for c in itertools.product(*(options[m] for m in range(M)))
              if _distinct([o[0] for o in c]) and _distinct([o[1] for o in c])]
    cache = {}

    def block(m, opt, xi):
        u, n = opt
        if u < 0:
            return (0.0, 0.0, 0.0, 0.0)           # eps1, eps2, rate, tx
        key = (m, u, n, xi)
        if key not in cache:
            ins = inst(m, u, n)
            e1, e2, v = best_pair_point(ins, xi, splitter(m))
            if not math.isfinite(v):
                cache[key] = None
            else:
                r1, r2 = _pair_rates(ins, e1, e2)
                cache[key] = (e1, e2, float(r1 + r2), (e1 + e2) * ins.P)
        return cache[key]

    def evaluate(xi):
        best = None
        for c in combos:
            # T-VUs left without a sub-channel must manage locally
            if any(o[0] < 0 and not local_only_ok(m) for m, o in enumerate(c)):
                continue
            parts = [block(m, o, xi) for m, o in enumerate(c)]
            if any(p is None for p in parts):
                continue
            rate = sum(p[2] for p in parts)
            power = total_static + sum(p[3] for p in parts)
            f = rate - xi * power
            if best is None or f > best[0]:
                best = (f, rate, power, c, parts)
        return best

    xi = 0.0
    best = evaluate(xi)
    if best is None or best[2] <= 0:
        return OracleResult(ee=0.0, feasible=False, configs=len(combos), notes=["no feasible point"])
    for _ in range(60):
        ee = best[1] / best[2]
        if ee <= xi * (1 + 1e-14):
            break
        xi = ee
        nxt = evaluate(xi)
        if nxt is None:
            break
        best_ee = best[1] / best[2]
        if nxt[1] / nxt[2] >= best_ee:
            best = nxt
        if abs(nxt[0]) <= 1e-12 * max(nxt[1], 1.0):
            break
    f, rate, power, c, parts = best
    return OracleResult(ee=rate / power, feasible=True,
                        cu_of_tvu=tuple(o[0] for o in c), svu_of_tvu=tuple(o[1] for o in c),
                        eps=tuple((p[0], p[1]) for p in parts), configs=len(combos))


def _distinct(xs):
    xs = [x for x in xs if x >= 0]
    return len(xs) == len(set(xs))


# --- constraint checker -------------------------------------------------------

@dataclass
class CheckReport:
    violations: list
    exogenous_cus: list
    excluded_tvus: list

    @property
    def ok(self) -> bool:
        return not self.violations


def check_allocation(slot, tasks, budget, alloc, cu_rate_min: float, trust=None,
                     delay_margin: float = 1e-9, rtol: float = 1e-6) -> CheckReport:
    """Check every P1 constraint of ``alloc`` from first principles.

    CUs that miss their target even without a co-channel T-VU are reported
    as exogenous, not as violations.
    """
    v = []
    U = slot.H_u.shape[0]
    M, N = slot.H_mn.shape
    x_cu = [int(x) for x in alloc.x_cu]
    if sorted(x_cu) != list(range(U)):
        v.append("spectrum: CUs do not occupy distinct sub-channels one-to-one")
    taken = [int(f) for f in alloc.x_tvu if f >= 0]
    if len(taken) != len(set(taken)):
        v.append("spectrum: a sub-channel carries more than one T-VU")
    if any(f >= U for f in taken):
        v.append("spectrum: sub-channel index out of range")
    cu_on_sc = {x_cu[u]: u for u in range(U)}
    limit = tasks.T_tol - delay_margin
    oma = alloc.access == "oma"
    B = slot.bandwidth_B
    s2 = slot.sigma2
    host = {}
    excluded = []
    for m in range(M):
        row = [int(alloc.psi[m, n]) for n in range(N)]
        if sum(row) > 1:
            v.append(f"T-VU {m}: more than one S-VU selected")
        if trust is not None and any(row[n] > trust[m, n] for n in range(N)):
            v.append(f"T-VU {m}: selected S-VU fails the social-mobility test")
        b1, b2 = float(alloc.beta1[m]), float(alloc.beta2[m])
        e1, e2 = float(alloc.eps1[m]), float(alloc.eps2[m])
        if not (0 <= b1 <= 1 and 0 <= b2 <= 1 and b1 + b2 <= 1 + 1e-12):
            v.append(f"T-VU {m}: task split outside the simplex")
        if not (0 <= e1 <= 1 and 0 <= e2 <= 1):
            v.append(f"T-VU {m}: power coefficient outside [0, 1]")
        if not oma and e1 + e2 > 1 + 1e-12:
            v.append(f"T-VU {m}: eps1 + eps2 = {e1 + e2:.12g} > 1")
        f = int(alloc.x_tvu[m])
        d_loc = tasks.D[m] * (1 - b1 - b2) * tasks.C[m] / budget.y_m[m]
        if f < 0:
            excluded.append(m)
            if b1 > 0 or b2 > 0 or e1 > 0 or e2 > 0:
                v.append(f"T-VU {m}: no sub-channel but offloads or transmits")
            continue
        u = cu_on_sc.get(f)
        host[u] = m
        s = int(alloc.serving_rsu[m])
        n = next((k for k in range(N) if row[k] == 1), -1)
        P = slot.p_tvu[m]
        i_rsu = slot.p_cu[u] * slot.H_us[u, s] + s2
        g_ms = P * slot.H_ms[m, s]
        if n >= 0:
            g_mn = P * slot.H_mn[m, n]
            i_svu = slot.p_cu[u] * slot.H_un[u, n] + s2
            if oma:
                r1 = 0.5 * B * math.log2(1 + e1 * g_ms / i_rsu)
                r2 = 0.5 * B * math.log2(1 + e2 * g_mn / i_svu)
            elif slot.H_ms[m, s] <= slot.H_mn[m, n]:
                r1 = B * math.log2(1 + e1 * g_ms / (i_rsu + e2 * g_ms))
                r2 = B * math.log2(1 + e2 * g_mn / i_svu)
            else:
                r1 = B * math.log2(1 + e1 * g_ms / i_rsu)
                r2 = B * math.log2(1 + e2 * g_mn / (i_svu + e1 * g_mn))
        else:
            r1 = B * math.log2(1 + e1 * g_ms / i_rsu)
            r2 = 0.0
            if b2 > 0:
                v.append(f"T-VU {m}: beta2 > 0 without an S-VU")
        d1 = (tasks.D[m] * b1 / r1 if b1 > 0 else 0.0) + tasks.D[m] * b1 * tasks.C[m] / budget.y_ms[m] \
            if (b1 == 0 or r1 > 0) else math.inf
        d2 = (tasks.D[m] * b2 / r2 if b2 > 0 else 0.0) + tasks.D[m] * b2 * tasks.C[m] / budget.y_mn[m] \
            if (b2 == 0 or r2 > 0) else math.inf
        for name, d in (("local", d_loc), ("v2i", d1), ("v2v", d2)):
            if d > limit * (1 + rtol):
                v.append(f"T-VU {m}: {name} delay {d:.6g} s exceeds {limit:.6g} s")
    exogenous = []
    for u in range(U):
        sig = slot.p_cu[u] * slot.H_u[u]
        alone = B * math.log2(1 + sig / s2)
        if u not in host:
            if alone < cu_rate_min:
                exogenous.append(u)
            continue
        m = host[u]
        P = slot.p_tvu[m]
        h = slot.H_mu[m, u]
        e1, e2 = float(alloc.eps1[m]), float(alloc.eps2[m])
        if oma and alloc.psi[m].sum() == 1:
            rate = 0.5 * B * (math.log2(1 + sig / (e1 * P * h + s2)) + math.log2(1 + sig / (e2 * P * h + s2)))
        else:
            rate = B * math.log2(1 + sig / ((e1 + e2) * P * h + s2))
        if rate < cu_rate_min * (1 - rtol):
            v.append(f"CU {u}: rate {rate:.6g} below {cu_rate_min:.6g}")
    return CheckReport(violations=v, exogenous_cus=exogenous, excluded_tvus=excluded)
