"""Configuration dataclasses, defaults and validation.

All physical quantities are stored in linear SI units (W, Hz, bit/s, s).
dBm values appear only in the raw config surface and are converted here.

Defaults tagged ``# paper`` come from the simulation setup of the source
study; everything tagged ``# decision`` is a documented choice made for this
package because the source leaves it open.
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib


class ConfigError(ValueError):
    """Raised when a raw configuration violates the model assumptions.

    ``errors`` lists every violation found, not just the first.
    """

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class PaperRangeWarning(UserWarning):
    """A value lies outside the range used in the reference simulations."""


def dbm_to_watt(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(w):
    return 10.0 * math.log10(w) + 30.0


@dataclass(frozen=True)
class ScenarioConfig:
    # population
    num_tvus: int = 20                 # M, decision
    num_svus: int = 20                 # N, decision
    num_cus: int = 60                  # U, decision
    num_scs: int = 60                  # F = U, paper assumption
    num_rsus: int = 4                  # S, decision (covers the whole road)
    num_slots: int = 1                 # T, decision
    # geometry
    area_m: float = 1000.0             # paper: 1000 m x 1000 m
    road_y_m: float = 700.0            # decision: road centre line
    num_lanes: int = 6                 # paper
    lane_width_m: float = 4.0          # paper
    rsu_radius_m: float = 150.0        # paper
    rsu_offset_m: float = 5.0          # decision: distance beyond road edge
    # mobility
    speed_min: float = 10.0            # decision, m/s
    speed_max: float = 25.0            # decision, m/s
    spacing_factor: float = 2.5        # paper: mean gap 2.5 v
    slot_duration_s: float = 0.1       # decision
    psi_weight: float = 0.5            # decision
    zeta_th: float = 0.5               # decision
    social_density: float = 0.6        # decision
    # tasks and computing
    task_bits_min: float = 1e4         # paper
    task_bits_max: float = 1e5         # paper
    task_bits_fixed: float | None = None  # overrides the range (task-size sweep)
    cycles_per_bit: float = 500.0      # decision
    delay_tol_s: float = 0.1           # decision
    cpu_local_hz: float = 1e8          # decision: local CPU clears 2e4 bits per deadline
    cpu_rsu_hz: float = 1e9            # decision
    cpu_svu_hz: float = 1e9            # decision
    kappa: float = 1e-28               # decision
    p_circuit_w: float = 0.1           # decision
    # radio
    p_cu_dbm: float = 20.0             # paper
    p_tvu_dbm_min: float = 15.0        # paper
    p_tvu_dbm_max: float = 30.0        # paper
    bandwidth_hz: float = 180e3        # decision: one LTE resource block
    noise_dbm_per_hz: float = -174.0   # decision
    noise_figure_db: float = 9.0       # decision
    carrier_ghz: float = 2.0           # decision
    alpha_v2v: float = 3.0             # decision
    alpha_v2i: float = 3.5             # decision
    alpha_cu: float = 3.5              # decision
    shadow_db_v2v: float = 3.0         # decision
    shadow_db_v2i: float = 8.0         # decision
    shadow_db_cu: float = 8.0          # decision
    cu_rate_min_bps: float = 3.6e5     # decision: R_th,u = 2 bit/s/Hz
    # draws are made at this capacity and sliced so nested sizes share realizations
    crn_capacity: int = 64             # decision

    @property
    def noise_w(self) -> float:
        return dbm_to_watt(self.noise_dbm_per_hz + self.noise_figure_db
                           + 10.0 * math.log10(self.bandwidth_hz))

    @property
    def p_cu_w(self) -> float:
        return dbm_to_watt(self.p_cu_dbm)


@dataclass(frozen=True)
class SolverConfig:
    max_outer_iters: int = 20          # L1, paper
    conv_tol: float = 1e-3             # relative Dinkelbach tolerance
    max_sca_iters: int = 20            # decision
    sca_tol: float = 1e-5              # relative change of the surrogate objective
    delay_margin_s: float = 1e-9       # strict delay inequalities become <= T_tol - margin
    init_eps1: float = 0.5             # power split before the first selection pass
    init_eps2: float = 0.25            # decision
    sca_init_first: float = 2.0 / 3.0  # SCA start: fraction of the sum cap for the stronger-power stream
    enforce_order: bool = True         # eps of the first-decoded stream >= the other
    power_formula: str = "sum"         # "sum": (eps1+eps2)P, "printed": 2*eps1*P
    keep_incumbent: bool = True        # on an EE drop, redo the step with the incumbent selection


@dataclass(frozen=True)
class Config:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def with_scenario(self, **changes) -> "Config":
        return dataclasses.replace(self, scenario=dataclasses.replace(self.scenario, **changes))

    def with_solver(self, **changes) -> "Config":
        return dataclasses.replace(self, solver=dataclasses.replace(self.solver, **changes))


_POSITIVE = {
    "num_tvus", "num_svus", "num_cus", "num_scs", "num_rsus", "num_slots",
    "area_m", "num_lanes", "lane_width_m", "rsu_radius_m", "speed_min", "speed_max",
    "spacing_factor", "slot_duration_s", "task_bits_min", "task_bits_max",
    "cycles_per_bit", "delay_tol_s", "cpu_local_hz", "cpu_rsu_hz", "cpu_svu_hz",
    "kappa", "bandwidth_hz", "carrier_ghz", "crn_capacity",
    "max_outer_iters", "conv_tol", "max_sca_iters", "sca_tol",
}


def _coerce(cls, raw: Mapping[str, Any], section: str, errors: list[str]):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            errors.append(f"[{section}] unknown key {key!r}")
            continue
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:  # pragma: no cover - defensive
        errors.append(f"[{section}] {exc}")
        return cls()


def validate_config(raw: Mapping[str, Any] | None) -> Config:
    """Build a :class:`Config` from a nested mapping, filling defaults.

    Raises :class:`ConfigError` listing every violation. Values that are
    legal but outside the reference simulation ranges only warn.
    """
    raw = dict(raw or {})
    errors: list[str] = []
    for key in raw:
        if key not in ("scenario", "solver", "sweep"):
            errors.append(f"unknown section [{key}]")
    sc = _coerce(ScenarioConfig, raw.get("scenario", {}), "scenario", errors)
    so = _coerce(SolverConfig, raw.get("solver", {}), "solver", errors)

    for obj, section in ((sc, "scenario"), (so, "solver")):
        for f in fields(obj):
            v = getattr(obj, f.name)
            if f.name in _POSITIVE and not (isinstance(v, (int, float)) and v > 0):
                errors.append(f"[{section}] {f.name} must be positive, got {v!r}")

    if sc.num_scs != sc.num_cus:
        errors.append(f"num_scs ({sc.num_scs}) must equal num_cus ({sc.num_cus}): "
                      "the model assumes F = U with one sub-channel per cellular user")
    if sc.num_tvus > sc.num_cus:
        errors.append(f"num_tvus ({sc.num_tvus}) must not exceed num_cus ({sc.num_cus}): "
                      "every T-VU must share the sub-channel of a distinct CU")
    if sc.speed_max <= sc.speed_min:
        errors.append("speed_max must exceed speed_min")
    if sc.task_bits_max < sc.task_bits_min:
        errors.append("task_bits_max must be >= task_bits_min")
    if sc.task_bits_fixed is not None and not sc.task_bits_fixed > 0:
        errors.append("task_bits_fixed must be positive")
    if not 0.0 <= sc.psi_weight <= 1.0:
        errors.append("psi_weight must lie in [0, 1]")
    if not 0.0 < sc.zeta_th <= 1.0:
        errors.append("zeta_th must lie in (0, 1]")
    if not 0.0 <= sc.social_density <= 1.0:
        errors.append("social_density must lie in [0, 1]")
    if sc.p_tvu_dbm_max < sc.p_tvu_dbm_min:
        errors.append("p_tvu_dbm_max must be >= p_tvu_dbm_min")
    if sc.p_circuit_w < 0:
        errors.append("p_circuit_w must be non-negative")
    if sc.cu_rate_min_bps < 0:
        errors.append("cu_rate_min_bps must be non-negative")
    if not (0 <= so.init_eps2 <= so.init_eps1 and so.init_eps1 + so.init_eps2 <= 1):
        errors.append("initial split must satisfy 0 <= eps2 <= eps1 and eps1 + eps2 <= 1")
    if not 0.5 <= so.sca_init_first < 1.0:
        errors.append("sca_init_first must lie in [0.5, 1)")
    if so.power_formula not in ("sum", "printed"):
        errors.append("power_formula must be 'sum' or 'printed'")
    if errors:
        raise ConfigError(errors)

    for name in ("p_tvu_dbm_min", "p_tvu_dbm_max"):
        v = getattr(sc, name)
        if not 15.0 <= v <= 30.0:
            warnings.warn(f"{name}={v} dBm lies outside the reference range [15, 30] dBm",
                          PaperRangeWarning, stacklevel=2)
    for name in ("task_bits_min", "task_bits_max"):
        v = getattr(sc, name)
        if not 1e4 <= v <= 1e5:
            warnings.warn(f"{name}={v} bits lies outside the reference range [1e4, 1e5]",
                          PaperRangeWarning, stacklevel=2)
    return Config(scenario=sc, solver=so)


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return validate_config({})
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return validate_config(raw)


def config_to_dict(cfg: Config) -> dict:
    return {"scenario": dataclasses.asdict(cfg.scenario),
            "solver": dataclasses.asdict(cfg.solver)}
