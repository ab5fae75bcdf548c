import dataclasses
import math

import numpy as np
import pytest

from helpers import one_pair_alloc, one_pair_slot
from noma_vec.baselines import (ALGORITHMS, NOMA_MDSS, noma_mdss_tscra, oma_jccra, rsu_sapc,
                                run_algorithm)
from noma_vec.config import Config
from noma_vec.model import link_rates
from noma_vec.oracle import check_allocation
from noma_vec.scenario import generate_scenario
from noma_vec.solver import JCCRAA, _context, jccraa, sm_sstsa

SMALL = Config().with_scenario(num_tvus=6, num_svus=6, num_cus=10, num_scs=10)
# tasks small enough that the local CPU alone meets the deadline
LIGHT = Config().with_scenario(num_tvus=1, num_svus=3, num_cus=2, num_scs=2, task_bits_fixed=1e4)


def _first_pick(cfg, variant, seed, trust=None):
    scn = generate_scenario(cfg, seed)
    ctx = _context(scn, 0, cfg.solver, variant)
    if trust is not None:
        ctx.trust[:] = trust
        if variant is JCCRAA:
            ctx.sel[:] = trust.astype(bool)
    M = ctx.trust.shape[0]
    z = np.zeros(M)
    svu, psi, *_ = sm_sstsa(ctx, 0.0, z, z, np.full(M, -1), np.ones(M, dtype=bool))
    return scn, svu, psi


def test_mdss_picks_nearest_even_without_a_social_tie():
    no_ties = LIGHT.with_scenario(social_density=0.0)
    scn, svu, psi = _first_pick(no_ties, NOMA_MDSS, 3)
    assert svu[0] == int(np.argmin(scn.distances(0)[0]))
    assert psi[0].sum() == 0            # selected but carries no V2V traffic
    _, svu_j, _ = _first_pick(no_ties, JCCRAA, 3)
    assert svu_j[0] == -1


def test_mdss_and_jccraa_agree_when_nearest_is_trusted_and_best():
    cfg = LIGHT.with_scenario(num_svus=1)
    trust = np.ones((1, 1), dtype=np.int8)
    _, a, _ = _first_pick(cfg, NOMA_MDSS, 2, trust)
    _, b, _ = _first_pick(cfg, JCCRAA, 2, trust)
    assert a[0] == b[0] == 0


def test_rsu_sapc_never_uses_v2v():
    for seed in range(5):
        s = rsu_sapc(generate_scenario(SMALL, seed), SMALL).slots[0]
        assert np.all(s.report.rate_v2v == 0.0)
        assert np.all(s.allocation.beta2 == 0.0) and np.all(s.allocation.eps2 == 0.0)


def test_rsu_sapc_equals_jccraa_without_v2v_channels():
    for seed in range(4):
        scn = generate_scenario(SMALL, seed)
        sl = dataclasses.replace(scn.slots[0], H_mn=np.zeros_like(scn.slots[0].H_mn))
        scn = dataclasses.replace(scn, slots=(sl,))
        assert jccraa(scn, SMALL).ee == rsu_sapc(scn, SMALL).ee


def test_oma_and_noma_coincide_for_a_single_stream():
    sl = one_pair_slot(h_us=1e-9, h_un=1e-9)
    n = link_rates(sl, one_pair_alloc(eps1=0.8, eps2=0.0, psi=0))
    o = link_rates(sl, one_pair_alloc(eps1=0.8, eps2=0.0, psi=0, access="oma"))
    assert n[0][0] == o[0][0] and n[1][0] == o[1][0] == 0.0


def test_noma_region_contains_time_sharing():
    """For every half-slot OMA rate pair, some NOMA split serves both streams at least as fast."""
    rng = np.random.default_rng(0)
    for _ in range(1000):
        h_ms, h_mn = 10 ** rng.uniform(-10, -6, 2)
        sl = one_pair_slot(h_ms=h_ms, h_mn=h_mn, h_us=0.0, h_un=0.0)
        oma = link_rates(sl, one_pair_alloc(eps1=1.0, eps2=1.0, access="oma"))
        r_oma = (oma[0][0], oma[1][0])
        weak = 0 if h_ms <= h_mn else 1         # stream decoded first
        lo, hi = 0.0, 1.0                        # power share of the weak stream
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            e = (mid, 1 - mid) if weak == 0 else (1 - mid, mid)
            r = link_rates(sl, one_pair_alloc(eps1=e[0], eps2=e[1]))
            if r[weak][0] >= r_oma[weak]:
                hi = mid
            else:
                lo = mid
        e = (hi, 1 - hi) if weak == 0 else (1 - hi, hi)
        r = link_rates(sl, one_pair_alloc(eps1=e[0], eps2=e[1]))
        assert r[weak][0] >= r_oma[weak] * (1 - 1e-9)
        assert r[1 - weak][0] >= r_oma[1 - weak] * (1 - 1e-9)


@pytest.mark.parametrize("name", sorted(ALGORITHMS))
def test_every_algorithm_emits_feasible_allocations(name):
    for seed in range(4):
        scn = generate_scenario(SMALL, seed)
        s = run_algorithm(name, scn, SMALL).slots[0]
        rep = check_allocation(scn.slots[0], scn.tasks, scn.budget, s.allocation,
                               SMALL.scenario.cu_rate_min_bps,
                               scn.trust(0) if ALGORITHMS[name].selection != "none" else None)
        assert rep.ok, rep.violations


@pytest.mark.parametrize("fn", [noma_mdss_tscra, rsu_sapc, oma_jccra])
def test_baselines_deterministic(fn):
    scn = generate_scenario(SMALL, 6)
    assert fn(scn, SMALL).ee == fn(scn, SMALL).ee


def test_unknown_algorithm():
    with pytest.raises(ValueError, match="unknown algorithm"):
        run_algorithm("greedy", generate_scenario(SMALL, 0), SMALL)


def test_jccraa_not_worse_on_average():
    ee = {n: [] for n in ALGORITHMS}
    for seed in range(12):
        scn = generate_scenario(SMALL, seed)
        for n in ALGORITHMS:
            ee[n].append(run_algorithm(n, scn, SMALL).ee)
    ref = np.mean(ee["jccraa"])
    assert all(ref >= np.mean(v) * (1 - 1e-12) for v in ee.values())
    assert math.isfinite(ref) and ref > 0
