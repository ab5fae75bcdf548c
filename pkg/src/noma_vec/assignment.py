"""CU / T-VU spectrum matching (max-weight assignment).

Every CU owns one sub-channel, so placing a T-VU on a sub-channel is the same
as pairing it with that CU. The pair weight is the optimal subtractive
objective of the pair's power subproblem.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    w: np.ndarray         # (U, M); -inf where the pair is infeasible
    feasible: np.ndarray  # (U, M) bool

    @property
    def shape(self):
        return self.w.shape

    @classmethod
    def from_array(cls, w) -> "WeightMatrix":
        w = np.asarray(w, dtype=float)
        return cls(w=w, feasible=np.isfinite(w))


@dataclass(frozen=True)
class Matching:
    cu_of_tvu: np.ndarray   # (M,), -1 when unmatched
    total: float
    unmatchable: tuple      # T-VUs with an all-infeasible column

    def as_indicator(self, U: int) -> np.ndarray:
        X = np.zeros((U, self.cu_of_tvu.size), dtype=np.int8)
        ok = self.cu_of_tvu >= 0
        X[self.cu_of_tvu[ok], np.flatnonzero(ok)] = 1
        return X


def build_weight_matrix(objective, feasible) -> WeightMatrix:
    """Pack per-pair power-subproblem optima into a ``(U, M)`` weight matrix."""
    obj = np.asarray(objective, dtype=float)
    feas = np.asarray(feasible, dtype=bool)
    if obj.shape != feas.shape or obj.ndim != 2:
        raise ValueError("objective and feasible must be matching (U, M) arrays")
    if np.isnan(obj).any():
        raise ValueError("missing pair solution (NaN weight)")
    return WeightMatrix(w=np.where(feas, obj, -np.inf), feasible=feas & np.isfinite(obj))


def _hungarian_min(cost: np.ndarray) -> np.ndarray:
    """Min-cost assignment of every row of an ``n x m`` matrix (n <= m).

    Shortest augmenting paths with row/column potentials; returns the column
    of each row. Plain lists: the matrices here are small enough that numpy
    call overhead would dominate.
    """
    n, m = cost.shape
    C = cost.tolist()
    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)        # p[j]: row (1-based) matched to column j
    way = [0] * (m + 1)
    cols = range(1, m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = C[i0 - 1]
            ui = u[i0]
            delta = inf
            j1 = 0
            for j in cols:
                if not used[j]:
                    cur = row[j - 1] - ui - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col = np.full(n, -1)
    for j in cols:
        if p[j]:
            col[p[j] - 1] = j - 1
    return col


def kuhn_munkres(w: WeightMatrix | np.ndarray) -> Matching:
    """Exact max-weight matching of T-VUs (columns) to distinct CUs (rows).

    Infeasible entries become a large negative finite sentinel, so the number
    of feasible pairs is maximized first and their weight second; a T-VU that
    ends up on a sentinel entry is reported unmatched.
    """
    wm = w if isinstance(w, WeightMatrix) else WeightMatrix.from_array(w)
    W = wm.w
    U, M = W.shape
    if M > U:
        raise ValueError(f"need U >= M, got U={U}, M={M}")
    cu = np.full(M, -1)
    ok = wm.feasible & np.isfinite(W)
    rows = np.flatnonzero(ok.any(axis=1))
    cols = np.flatnonzero(ok.any(axis=0))
    if rows.size and cols.size:
        finite = W[ok]
        sentinel = -1e6 * max(1.0, float(np.abs(finite).max())) * max(M, 1)
        sub = np.where(ok[np.ix_(rows, cols)], W[np.ix_(rows, cols)], sentinel)
        cost = sub.max() - sub
        # CUs or T-VUs without any feasible partner cannot change the optimum; drop them
        # and let the smaller side be the rows of the solver
        if rows.size >= cols.size:
            cu[cols] = rows[_hungarian_min(cost.T)]
        else:
            cu[cols[_hungarian_min(cost)]] = rows
        hit = np.flatnonzero(cu >= 0)
        cu[hit[~ok[cu[hit], hit]]] = -1
    matched = cu >= 0
    total = float(W[cu[matched], np.flatnonzero(matched)].sum())
    unmatchable = tuple(int(m) for m in np.flatnonzero(~ok.any(axis=0)))
    return Matching(cu_of_tvu=cu, total=total, unmatchable=unmatchable)
