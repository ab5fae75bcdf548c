"""Comparison schemes built from the same selection, power and matching blocks."""
from __future__ import annotations

from .config import Config, SolverConfig
from .scenario import Scenario
from .solver import JCCRAA, RunResult, Variant, run_variant

NOMA_MDSS = Variant(name="noma_mdss_tscra", selection="nearest", access="noma")
RSU_SAPC = Variant(name="rsu_sapc", selection="none", access="noma")
OMA_JCCRA = Variant(name="oma_jccra", selection="social", access="oma")

ALGORITHMS = {v.name: v for v in (JCCRAA, NOMA_MDSS, RSU_SAPC, OMA_JCCRA)}


def noma_mdss_tscra(scn: Scenario, config: Config | SolverConfig) -> RunResult:
    """Nearest free S-VU regardless of social tie or mobility match.

    An untrusted pick carries no V2V traffic but still occupies the S-VU.
    """
    return run_variant(scn, config, NOMA_MDSS)


def rsu_sapc(scn: Scenario, config: Config | SolverConfig) -> RunResult:
    """RSU-only offloading: one V2I stream per shared sub-channel."""
    return run_variant(scn, config, RSU_SAPC)


def oma_jccra(scn: Scenario, config: Config | SolverConfig) -> RunResult:
    """Social selection, but V2I and V2V split the slot in time instead of superposing."""
    return run_variant(scn, config, OMA_JCCRA)


def run_algorithm(name: str, scn: Scenario, config: Config | SolverConfig) -> RunResult:
    try:
        variant = ALGORITHMS[name]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}") from None
    return run_variant(scn, config, variant)
