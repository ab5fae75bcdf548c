"""Reproducible world states: road traffic, channels, social ties, tasks.

Random draws come from independent child streams of one seed, each keyed by
what it generates. Entity draws are made at a fixed capacity
(``crn_capacity``) and sliced, so two configs that differ only in the number
of T-VUs, S-VUs or CUs share the realizations of the common entities. Sweeps
rely on this to compare sweep points on common random numbers.
"""
from __future__ import annotations

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Config, ScenarioConfig, config_to_dict, dbm_to_watt, validate_config
from .model import ChannelSlot, ComputeBudget, TaskSpec

SCENARIO_FORMAT = "noma-vec-scenario/1"
SPEED_OF_LIGHT = 299_792_458.0
D0 = 1.0

_TRAFFIC, _CU, _SOCIAL, _TASK, _SHADOW, _FADING = range(6)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass(frozen=True)
class MobilityParams:
    psi_weight: float
    zeta_th: float
    d_max: float
    v_max: float

    @classmethod
    def from_config(cls, sc: ScenarioConfig) -> "MobilityParams":
        return cls(psi_weight=sc.psi_weight, zeta_th=sc.zeta_th,
                   d_max=2.0 * sc.rsu_radius_m, v_max=sc.speed_max - sc.speed_min)


@dataclass(frozen=True, eq=False)
class SocialGraph:
    delta: np.ndarray    # (M, N) in {0, 1}


@dataclass(frozen=True, eq=False)
class Topology:
    area_m: float
    mbs_pos: np.ndarray      # (2,)
    rsu_pos: np.ndarray      # (S, 2)
    rsu_radius: float
    cu_pos: np.ndarray       # (U, 2)
    lane_y: np.ndarray       # (lanes,)
    lane_dir: np.ndarray     # (lanes,) +1 / -1 along x
    tvu_lane: np.ndarray     # (M,)
    svu_lane: np.ndarray     # (N,)
    tvu_x0: np.ndarray
    svu_x0: np.ndarray
    tvu_speed: np.ndarray
    svu_speed: np.ndarray
    slot_duration: float

    def _pos(self, x0, lane, speed, t):
        x = step_mobility(x0, speed * self.lane_dir[lane], self.slot_duration * t, self.area_m)
        return np.stack([x, self.lane_y[lane]], axis=-1)

    def tvu_positions(self, t: int) -> np.ndarray:
        return self._pos(self.tvu_x0, self.tvu_lane, self.tvu_speed, t)

    def svu_positions(self, t: int) -> np.ndarray:
        return self._pos(self.svu_x0, self.svu_lane, self.svu_speed, t)

    def tvu_velocity(self) -> np.ndarray:
        v = self.tvu_speed * self.lane_dir[self.tvu_lane]
        return np.stack([v, np.zeros_like(v)], axis=-1)

    def svu_velocity(self) -> np.ndarray:
        v = self.svu_speed * self.lane_dir[self.svu_lane]
        return np.stack([v, np.zeros_like(v)], axis=-1)

    def serving_rsu(self, t: int) -> np.ndarray:
        """Nearest RSU whose coverage disc contains the T-VU, -1 if none."""
        d = _dist(self.tvu_positions(t), self.rsu_pos)
        best = np.argmin(d, axis=1)
        inside = d[np.arange(d.shape[0]), best] <= self.rsu_radius
        return np.where(inside, best, -1)


@dataclass(frozen=True, eq=False)
class Scenario:
    config: ScenarioConfig
    seed: int
    topology: Topology
    social: SocialGraph
    tasks: TaskSpec
    budget: ComputeBudget
    p_tvu: np.ndarray
    slots: tuple
    serving: np.ndarray        # (T, M)

    @property
    def num_slots(self) -> int:
        return len(self.slots)

    @property
    def mobility_params(self) -> MobilityParams:
        return MobilityParams.from_config(self.config)

    def distances(self, t: int) -> np.ndarray:
        return _dist(self.topology.tvu_positions(t), self.topology.svu_positions(t))

    def proximity(self, t: int) -> np.ndarray:
        mp = self.mobility_params
        dv = _dist(self.topology.tvu_velocity(), self.topology.svu_velocity())
        return proximity(self.distances(t), dv, mp)

    def mobility(self, t: int) -> np.ndarray:
        return mobility_indicator(self.proximity(t), self.config.zeta_th)

    def trust(self, t: int) -> np.ndarray:
        return trust_indicator(self.mobility(t), self.social.delta)


def _dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))


def step_mobility(x, velocity, dt, length):
    """Advance along the road axis; vehicles leaving the area re-enter on the other side."""
    return np.mod(np.asarray(x, dtype=float) + np.asarray(velocity, dtype=float) * dt, length)


def lane_positions(speeds, rng: np.random.Generator, spacing_factor: float = 2.5,
                   start: float = 0.0) -> np.ndarray:
    """Unwrapped positions along one lane with exponential gaps of mean ``spacing_factor * v``."""
    gaps = rng.exponential(spacing_factor * np.asarray(speeds, dtype=float))
    return start + np.cumsum(gaps)


def f_norm(x, x_max):
    return np.minimum(np.asarray(x, dtype=float) / x_max, 1.0)


def proximity(dd, dv, mp: MobilityParams):
    return mp.psi_weight * f_norm(dd, mp.d_max) + (1.0 - mp.psi_weight) * f_norm(dv, mp.v_max)


def proximity_score(scenario: Scenario, m: int, n: int, t: int) -> float:
    return float(scenario.proximity(t)[m, n])


def mobility_indicator(rho, zeta_th):
    return (np.asarray(rho) < zeta_th).astype(np.int8)


def trust_indicator(k, delta):
    return (np.asarray(k) * np.asarray(delta)).astype(np.int8)


def pathloss_db(d, alpha, carrier_ghz):
    pl0 = 20.0 * math.log10(4.0 * math.pi * carrier_ghz * 1e9 * D0 / SPEED_OF_LIGHT)
    return pl0 + 10.0 * alpha * np.log10(np.maximum(d, D0) / D0)


def generate_social_graph(sc: ScenarioConfig, seed: int) -> SocialGraph:
    cap_m, cap_n = _caps(sc)[:2]
    rng = _stream(seed, _SOCIAL)
    delta = (rng.random((cap_m, cap_n)) < sc.social_density).astype(np.int8)
    return SocialGraph(delta=delta[: sc.num_tvus, : sc.num_svus])


def _caps(sc: ScenarioConfig):
    c = sc.crn_capacity
    return max(c, sc.num_tvus), max(c, sc.num_svus), max(c, sc.num_cus)


def build_topology(sc: ScenarioConfig, seed: int) -> Topology:
    cap_m, cap_n, cap_u = _caps(sc)
    L = sc.area_m
    lanes = sc.num_lanes
    rng = _stream(seed, _TRAFFIC)
    per_lane = math.ceil((cap_m + cap_n) / lanes)
    xs, lane_ix, speeds = [], [], []
    for k in range(lanes):
        v = rng.uniform(sc.speed_min, sc.speed_max, per_lane)
        x = lane_positions(v, rng, sc.spacing_factor, start=rng.uniform(0.0, L))
        xs.append(np.mod(x, L))
        lane_ix.append(np.full(per_lane, k))
        speeds.append(v)
    xs, lane_ix, speeds = map(np.concatenate, (xs, lane_ix, speeds))
    perm = rng.permutation(xs.size)
    t_ix = perm[: sc.num_tvus]
    s_ix = perm[::-1][: sc.num_svus]

    half = lanes * sc.lane_width_m / 2.0
    lane_y = sc.road_y_m - half + sc.lane_width_m * (np.arange(lanes) + 0.5)
    lane_dir = np.where(np.arange(lanes) < lanes // 2, 1.0, -1.0)
    rsu_x = (np.arange(sc.num_rsus) + 0.5) * L / sc.num_rsus
    rsu_pos = np.stack([rsu_x, np.full(sc.num_rsus, sc.road_y_m + half + sc.rsu_offset_m)], -1)
    cu_pos = _stream(seed, _CU).uniform(0.0, L, (cap_u, 2))[: sc.num_cus]
    return Topology(area_m=L, mbs_pos=np.array([L / 2, L / 2]), rsu_pos=rsu_pos,
                    rsu_radius=sc.rsu_radius_m, cu_pos=cu_pos, lane_y=lane_y, lane_dir=lane_dir,
                    tvu_lane=lane_ix[t_ix], svu_lane=lane_ix[s_ix],
                    tvu_x0=xs[t_ix], svu_x0=xs[s_ix],
                    tvu_speed=speeds[t_ix], svu_speed=speeds[s_ix],
                    slot_duration=sc.slot_duration_s)


def _large_scale(sc: ScenarioConfig, seed: int):
    """Per-drop log-normal shadowing in dB, drawn at capacity."""
    cap_m, cap_n, cap_u = _caps(sc)
    S = sc.num_rsus
    rng = _stream(seed, _SHADOW)
    return dict(
        ms=rng.normal(0.0, sc.shadow_db_v2i, (cap_m, S)),
        mn=rng.normal(0.0, sc.shadow_db_v2v, (cap_m, cap_n)),
        m_mbs=rng.normal(0.0, sc.shadow_db_v2i, cap_m),
        u_mbs=rng.normal(0.0, sc.shadow_db_cu, cap_u),
        us=rng.normal(0.0, sc.shadow_db_cu, (cap_u, S)),
        un=rng.normal(0.0, sc.shadow_db_cu, (cap_u, cap_n)),
    )


def fading(sc: ScenarioConfig, seed: int, t: int):
    """Unit-mean exponential (Rayleigh power) fading for slot ``t``, drawn at capacity."""
    cap_m, cap_n, cap_u = _caps(sc)
    S = sc.num_rsus
    rng = _stream(seed, _FADING, t)
    return dict(
        ms=rng.exponential(1.0, (cap_m, S)),
        mn=rng.exponential(1.0, (cap_m, cap_n)),
        mu=rng.exponential(1.0, (cap_m, cap_u)),
        u=rng.exponential(1.0, cap_u),
        us=rng.exponential(1.0, (cap_u, S)),
        un=rng.exponential(1.0, (cap_u, cap_n)),
    )


def _gain(d, alpha, shadow_db, fade, carrier):
    return 10.0 ** (-(pathloss_db(d, alpha, carrier) + shadow_db) / 10.0) * fade


def step_channels(topology: Topology, t: int, seed: int, sc: ScenarioConfig,
                  p_tvu: np.ndarray) -> ChannelSlot:
    M, N, U = sc.num_tvus, sc.num_svus, sc.num_cus
    sh = _large_scale(sc, seed)
    fd = fading(sc, seed, t)
    tv = topology.tvu_positions(t)
    sv = topology.svu_positions(t)
    mbs = topology.mbs_pos[None, :]
    cu = topology.cu_pos
    rsu = topology.rsu_pos
    fc = sc.carrier_ghz
    d_m_mbs = _dist(tv, mbs)[:, 0]
    H_mu = _gain(d_m_mbs[:, None], sc.alpha_v2i, sh["m_mbs"][:M, None], fd["mu"][:M, :U], fc)
    return ChannelSlot(
        H_u=_gain(_dist(cu, mbs)[:, 0], sc.alpha_cu, sh["u_mbs"][:U], fd["u"][:U], fc),
        H_mu=H_mu,
        H_ms=_gain(_dist(tv, rsu), sc.alpha_v2i, sh["ms"][:M], fd["ms"][:M], fc),
        H_mn=_gain(_dist(tv, sv), sc.alpha_v2v, sh["mn"][:M, :N], fd["mn"][:M, :N], fc),
        H_us=_gain(_dist(cu, rsu), sc.alpha_cu, sh["us"][:U], fd["us"][:U], fc),
        H_un=_gain(_dist(cu, sv), sc.alpha_cu, sh["un"][:U, :N], fd["un"][:U, :N], fc),
        sigma2=sc.noise_w, bandwidth_B=sc.bandwidth_hz,
        p_cu=np.full(U, sc.p_cu_w), p_tvu=np.asarray(p_tvu, dtype=float))


def generate_scenario(config: Config | ScenarioConfig, seed: int) -> Scenario:
    sc = config.scenario if isinstance(config, Config) else config
    with warnings.catch_warnings():
        # range warnings belong to config loading, not to every drop
        warnings.simplefilter("ignore")
        validate_config({"scenario": dataclasses.asdict(sc)})
    cap_m = _caps(sc)[0]
    M = sc.num_tvus
    topo = build_topology(sc, seed)
    rng = _stream(seed, _TASK)
    D = rng.uniform(sc.task_bits_min, sc.task_bits_max, cap_m)[:M]
    p_dbm = rng.uniform(sc.p_tvu_dbm_min, sc.p_tvu_dbm_max, cap_m)[:M]
    if sc.task_bits_fixed is not None:
        D = np.full(M, float(sc.task_bits_fixed))
    tasks = TaskSpec(D=D, C=np.full(M, sc.cycles_per_bit), T_tol=sc.delay_tol_s)
    budget = ComputeBudget(y_m=np.full(M, sc.cpu_local_hz), y_ms=np.full(M, sc.cpu_rsu_hz),
                           y_mn=np.full(M, sc.cpu_svu_hz), kappa=sc.kappa, P_cir=sc.p_circuit_w)
    p_tvu = dbm_to_watt(p_dbm)
    slots = tuple(step_channels(topo, t, seed, sc, p_tvu) for t in range(sc.num_slots))
    serving = np.stack([topo.serving_rsu(t) for t in range(sc.num_slots)])
    return Scenario(config=sc, seed=int(seed), topology=topo, social=generate_social_graph(sc, seed),
                    tasks=tasks, budget=budget, p_tvu=p_tvu, slots=slots, serving=serving)


# --- trace files -----------------------------------------------------------

def _arr(a):
    return np.asarray(a).tolist()


def scenario_to_dict(scn: Scenario) -> dict:
    topo = scn.topology
    return {
        "format": SCENARIO_FORMAT,
        "seed": scn.seed,
        "config": config_to_dict(Config(scenario=scn.config))["scenario"],
        "topology": {k: (_arr(v) if isinstance(v, np.ndarray) else v)
                     for k, v in topo.__dict__.items()},
        "delta": _arr(scn.social.delta),
        "tasks": {"D": _arr(scn.tasks.D), "C": _arr(scn.tasks.C), "T_tol": scn.tasks.T_tol},
        "budget": {"y_m": _arr(scn.budget.y_m), "y_ms": _arr(scn.budget.y_ms),
                   "y_mn": _arr(scn.budget.y_mn), "kappa": scn.budget.kappa,
                   "P_cir": scn.budget.P_cir},
        "p_tvu": _arr(scn.p_tvu),
        "serving": _arr(scn.serving),
        "slots": [{k: (_arr(v) if isinstance(v, np.ndarray) else v)
                   for k, v in s.__dict__.items()} for s in scn.slots],
    }


def dump_scenario(scn: Scenario, path: str | Path) -> None:
    text = json.dumps(scenario_to_dict(scn), sort_keys=True, separators=(",", ":"))
    Path(path).write_text(text + "\n")


def scenario_from_dict(d: dict) -> Scenario:
    if d.get("format") != SCENARIO_FORMAT:
        raise ValueError(f"unsupported scenario format {d.get('format')!r}")
    sc = validate_config({"scenario": d["config"]}).scenario
    arr = np.asarray
    tp = d["topology"]
    int_keys = {"tvu_lane", "svu_lane"}
    topo = Topology(**{k: (arr(v, dtype=int) if k in int_keys else
                           arr(v, dtype=float) if isinstance(v, list) else v)
                       for k, v in tp.items()})
    slots = tuple(ChannelSlot(**{k: (arr(v, dtype=float) if isinstance(v, list) else v)
                                 for k, v in s.items()}) for s in d["slots"])
    t = d["tasks"]
    b = d["budget"]
    return Scenario(config=sc, seed=d["seed"], topology=topo,
                    social=SocialGraph(delta=arr(d["delta"], dtype=np.int8).reshape(
                        sc.num_tvus, sc.num_svus)),
                    tasks=TaskSpec(D=arr(t["D"], float), C=arr(t["C"], float), T_tol=t["T_tol"]),
                    budget=ComputeBudget(y_m=arr(b["y_m"], float), y_ms=arr(b["y_ms"], float),
                                         y_mn=arr(b["y_mn"], float), kappa=b["kappa"],
                                         P_cir=b["P_cir"]),
                    p_tvu=arr(d["p_tvu"], float), slots=slots,
                    serving=arr(d["serving"], dtype=int).reshape(len(slots), sc.num_tvus))


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))
