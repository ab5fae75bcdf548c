"""Energy-efficient NOMA offloading for socially aware vehicular edge computing.

Typical use::

    from noma_vec import Config, generate_scenario, jccraa
    cfg = Config()
    result = jccraa(generate_scenario(cfg, seed=1), cfg)
    print(result.ee)
"""
from .assignment import Matching, WeightMatrix, build_weight_matrix, kuhn_munkres
from .baselines import ALGORITHMS, noma_mdss_tscra, oma_jccra, rsu_sapc, run_algorithm
from .config import Config, ConfigError, ScenarioConfig, SolverConfig, load_config, validate_config
from .model import Allocation, RateReport, evaluate, system_ee
from .power import PairProblem, PowerSolution, solve_power
from .scenario import Scenario, generate_scenario, load_scenario, dump_scenario
from .solver import RunResult, SlotResult, choose_task_split, jccraa, sm_sstsa

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "Allocation", "Config", "ConfigError", "Matching", "PairProblem",
    "PowerSolution", "RateReport", "RunResult", "Scenario", "ScenarioConfig", "SlotResult",
    "SolverConfig", "WeightMatrix", "build_weight_matrix", "choose_task_split", "dump_scenario",
    "evaluate", "generate_scenario", "jccraa", "kuhn_munkres", "load_config", "load_scenario",
    "noma_mdss_tscra", "oma_jccra", "rsu_sapc", "run_algorithm", "sm_sstsa", "solve_power",
    "system_ee", "validate_config",
]
