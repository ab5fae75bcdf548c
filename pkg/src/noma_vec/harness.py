"""Monte Carlo sweeps over the three experiment axes, plus the command line.

Every drop index maps to one scenario seed shared by all axis values and all
algorithms (common random numbers), so differences between curve points come
from the swept parameter and not from fresh draws.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .baselines import ALGORITHMS, run_algorithm
from .config import Config, ConfigError, config_to_dict, tomllib, validate_config
from .plotting import write_line_chart
from .scenario import dump_scenario, generate_scenario

log = logging.getLogger(__name__)

AXES = ("num_tvus", "task_size", "num_scs")
AXIS_LABEL = {"num_tvus": "Number of T-VUs M", "task_size": "Task size D (bits)",
              "num_scs": "Number of sub-channels F"}
DEFAULT_VALUES = {"num_tvus": (10, 20, 30, 40, 50),
                  "task_size": (2e4, 4e4, 6e4, 8e4, 1e5),
                  "num_scs": (30, 40, 50, 60)}
REFERENCE = "jccraa"
COMPARISON = "noma_mdss_tscra"
SUMMARY_FIELDS = ("algorithm", "axis_name", "axis_value", "mean_ee_bits_per_joule", "std_ee",
                  "ci95_lo", "ci95_hi", "infeasible_rate", "mean_iters", "drops", "seed")
DROP_FIELDS = ("algorithm", "axis_name", "axis_value", "drop", "scenario_seed",
               "ee_bits_per_joule", "iterations", "converged", "excluded", "total_rate_bps",
               "total_power_w")

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


class ExperimentInfeasible(RuntimeError):
    """No drop of any cell produced a served T-VU."""


def drop_seed(master_seed: int, drop: int) -> int:
    """Scenario seed of a drop; independent of axis, value and algorithm."""
    return int(np.random.SeedSequence([int(master_seed), int(drop)]).generate_state(1)[0])


def apply_axis(config: Config, axis: str, value) -> Config:
    if axis == "num_tvus":
        return config.with_scenario(num_tvus=int(value))
    if axis == "task_size":
        return config.with_scenario(task_bits_fixed=float(value))
    if axis == "num_scs":
        return config.with_scenario(num_cus=int(value), num_scs=int(value))
    raise ValueError(f"unknown sweep axis {axis!r}")


@dataclass(frozen=True)
class SweepConfig:
    axis: str
    values: tuple
    drops: int = 100
    algorithms: tuple = tuple(ALGORITHMS)
    base: Config = field(default_factory=Config)
    master_seed: int = 2024

    def __post_init__(self):
        errors = []
        if self.axis not in AXES:
            errors.append(f"axis must be one of {AXES}, got {self.axis!r}")
        vals = tuple(self.values)
        if not vals or any(b <= a for a, b in zip(vals, vals[1:])):
            errors.append(f"axis values must be non-empty and strictly increasing, got {vals}")
        if not (isinstance(self.drops, int) and self.drops >= 1):
            errors.append(f"drops must be a positive integer, got {self.drops!r}")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown or not self.algorithms:
            errors.append(f"unknown algorithms {unknown}; choose from {sorted(ALGORITHMS)}")
        if errors:
            raise ConfigError(errors)
        # every axis point must itself be a valid configuration
        for v in vals:
            try:
                validate_config(config_to_dict(apply_axis(self.base, self.axis, v)))
            except ConfigError as exc:
                raise ConfigError([f"{self.axis}={v}: {e}" for e in exc.errors]) from None


@dataclass(frozen=True)
class CellStats:
    mean: float
    std: float
    ci95_lo: float
    ci95_hi: float
    infeasible_rate: float
    mean_iters: float
    samples: tuple


def cell_stats(ee, excluded, iterations) -> CellStats:
    ee = np.asarray(ee, dtype=float)
    n = ee.size
    mean = float(ee.mean())
    std = float(ee.std(ddof=1)) if n > 1 else 0.0
    half = float(stats.t.ppf(0.975, n - 1) * std / math.sqrt(n)) if n > 1 else 0.0
    return CellStats(mean, std, mean - half, mean + half, float(np.mean(excluded)),
                     float(np.mean(iterations)), tuple(float(x) for x in ee))


@dataclass
class SweepResult:
    sweep: SweepConfig
    cells: dict                    # (algorithm, value) -> CellStats
    drops: list                    # per-drop rows in output order
    diagnostics: list = field(default_factory=list)
    files: dict = field(default_factory=dict)

    def series(self, algorithm: str) -> list[float]:
        return [self.cells[(algorithm, v)].mean for v in self.sweep.values]

    def gains(self, reference: str = REFERENCE, other: str = COMPARISON) -> list[float]:
        """Relative EE gain of ``reference`` over ``other`` at each axis value."""
        return [a / b - 1.0 if b > 0 else math.inf
                for a, b in zip(self.series(reference), self.series(other))]


def _run_drop(job):
    base, axis, value, drop, seed, algorithms = job
    cfg = apply_axis(base, axis, value)
    scn = generate_scenario(cfg, seed)
    out = []
    for name in algorithms:
        res = run_algorithm(name, scn, cfg)
        slot_diag = [dict(iterations=s.iterations, converged=bool(s.converged),
                          reverted=bool(s.reverted), xi=[float(x) for x in s.xi_trajectory],
                          excluded=[int(m) for m in np.flatnonzero(s.excluded)])
                     for s in res.slots]
        out.append(dict(algorithm=name, ee=res.ee, iterations=res.iterations,
                        converged=res.converged, excluded=res.infeasible_fraction,
                        rate=float(sum(s.report.total_rate for s in res.slots)),
                        power=float(sum(s.report.total_power for s in res.slots)),
                        slots=slot_diag))
    return out


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def check_writable(out_dir: str | Path) -> Path:
    """Create ``out_dir`` and prove it accepts files before any work is done."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fd, probe = tempfile.mkstemp(dir=out, prefix=".probe-")
    os.close(fd)
    os.unlink(probe)
    return out


def _csv_text(fields, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    w.writerows(rows)
    return buf.getvalue()


def run_sweep(sweep: SweepConfig, out_dir: str | Path | None = None, jobs: int = 1,
              plot: bool = True) -> SweepResult:
    """Run every (axis value, drop) cell and aggregate per algorithm.

    With ``out_dir`` set, writes ``<axis>_summary.csv``, ``<axis>_drops.csv``,
    ``<axis>_gains.csv``, ``<axis>_diagnostics.jsonl`` and ``<axis>.svg``.
    """
    out = check_writable(out_dir) if out_dir is not None else None
    seeds = [drop_seed(sweep.master_seed, d) for d in range(sweep.drops)]
    job_list = [(sweep.base, sweep.axis, v, d, seeds[d], tuple(sweep.algorithms))
                for v in sweep.values for d in range(sweep.drops)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            # map keeps submission order, so output bytes do not depend on scheduling
            results = list(pool.map(_run_drop, job_list, chunksize=max(1, len(job_list) // (8 * jobs))))
    else:
        results = [_run_drop(j) for j in job_list]

    by_cell = {}
    drop_rows = []
    diag = []
    for (_, axis, v, d, seed, _), res in zip(job_list, results):
        for r in res:
            by_cell.setdefault((r["algorithm"], v), []).append(r)
            drop_rows.append((r["algorithm"], axis, v, d, seed, r["ee"], r["iterations"],
                              r["converged"], r["excluded"], r["rate"], r["power"]))
            diag.append(dict(algorithm=r["algorithm"], axis=axis, value=v, drop=d,
                             seed=seed, ee=r["ee"], slots=r["slots"]))
    cells = {}
    for alg in sweep.algorithms:
        for v in sweep.values:
            rs = by_cell[(alg, v)]
            cells[(alg, v)] = cell_stats([r["ee"] for r in rs], [r["excluded"] for r in rs],
                                         [r["iterations"] for r in rs])
    result = SweepResult(sweep=sweep, cells=cells, drops=drop_rows, diagnostics=diag)
    if not any(r["rate"] > 0 for res in results for r in res):
        raise ExperimentInfeasible(f"sweep over {sweep.axis}: no drop served any T-VU")
    if out is not None:
        _write_outputs(result, out, plot)
    return result


def _write_outputs(result: SweepResult, out: Path, plot: bool) -> None:
    sw = result.sweep
    rows = []
    for alg in sw.algorithms:
        for v in sw.values:
            c = result.cells[(alg, v)]
            rows.append((alg, sw.axis, _fmt(v), _fmt(c.mean), _fmt(c.std), _fmt(c.ci95_lo),
                         _fmt(c.ci95_hi), _fmt(c.infeasible_rate), _fmt(c.mean_iters),
                         sw.drops, sw.master_seed))
    files = {}
    files["summary"] = out / f"{sw.axis}_summary.csv"
    files["summary"].write_text(_csv_text(SUMMARY_FIELDS, rows), encoding="utf-8")
    files["drops"] = out / f"{sw.axis}_drops.csv"
    files["drops"].write_text(_csv_text(DROP_FIELDS, [tuple(_fmt(x) if not isinstance(x, str) else x
                                                            for x in r) for r in result.drops]),
                              encoding="utf-8")
    if REFERENCE in sw.algorithms:
        others = [a for a in sw.algorithms if a != REFERENCE]
        grow = [(_fmt(v), *(_fmt(g) for g in gs))
                for v, *gs in zip(sw.values, *(result.gains(REFERENCE, o) for o in others))]
        files["gains"] = out / f"{sw.axis}_gains.csv"
        files["gains"].write_text(_csv_text(("axis_value", *(f"gain_vs_{o}" for o in others)), grow),
                                  encoding="utf-8")
    files["diagnostics"] = out / f"{sw.axis}_diagnostics.jsonl"
    with open(files["diagnostics"], "w", encoding="utf-8") as fh:
        for rec in result.diagnostics:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    if plot:
        series = {a: (list(sw.values), result.series(a)) for a in sw.algorithms}
        files["plot"] = write_line_chart(out / f"{sw.axis}.svg", series, AXIS_LABEL[sw.axis],
                                         "System EE (Mbit/J)", title=f"EE vs {AXIS_LABEL[sw.axis]}",
                                         y_scale=1e6)
    result.files = {k: str(p) for k, p in files.items()}


# --- configuration surface ------------------------------------------------------

def sweep_settings(raw: dict) -> dict:
    """Validate the optional ``[sweep]`` table; returns settings with defaults filled."""
    s = dict(raw.get("sweep", {}))
    errors = []
    known = {"drops", "master_seed", "algorithms", "axes", *AXES}
    for k in s:
        if k not in known:
            errors.append(f"[sweep] unknown key {k!r}")
    settings = dict(drops=s.get("drops", 100), master_seed=s.get("master_seed", 2024),
                    algorithms=tuple(s.get("algorithms", tuple(ALGORITHMS))),
                    axes=tuple(s.get("axes", AXES)),
                    values={a: tuple(s.get(a, DEFAULT_VALUES[a])) for a in AXES})
    if not isinstance(settings["master_seed"], int) or settings["master_seed"] < 0:
        errors.append("[sweep] master_seed must be a non-negative integer")
    for a in settings["axes"]:
        if a not in AXES:
            errors.append(f"[sweep] unknown axis {a!r}")
    if errors:
        raise ConfigError(errors)
    return settings


def load_raw(path: str | Path | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: {exc}"]) from None


def default_sweeps(config: Config, settings: dict) -> list[SweepConfig]:
    return [SweepConfig(axis=a, values=settings["values"][a], drops=settings["drops"],
                        algorithms=settings["algorithms"], base=config,
                        master_seed=settings["master_seed"]) for a in settings["axes"]]


# --- CLI ---------------------------------------------------------------------------

def _algorithms(arg: str | None, fallback):
    if not arg:
        return tuple(fallback)
    names = tuple(a.strip() for a in arg.split(",") if a.strip())
    bad = [a for a in names if a not in ALGORITHMS]
    if bad:
        raise ConfigError([f"unknown algorithms {bad}; choose from {sorted(ALGORITHMS)}"])
    return names


def _cmd_sweep(args, config, settings) -> int:
    if args.drops is not None:
        settings["drops"] = args.drops
    if args.seed is not None:
        settings["master_seed"] = args.seed
    if args.axes:
        settings["axes"] = tuple(a.strip() for a in args.axes.split(","))
    settings["algorithms"] = _algorithms(args.algorithms, settings["algorithms"])
    sweeps = default_sweeps(config, settings)
    out = check_writable(args.out)
    for sw in sweeps:
        log.info("sweep %s over %s, %d drops", sw.axis, sw.values, sw.drops)
        res = run_sweep(sw, out, jobs=args.jobs)
        for alg in sw.algorithms:
            vals = " ".join(f"{m / 1e6:8.4f}" for m in res.series(alg))
            print(f"{sw.axis:>10} {alg:>16} EE [Mbit/J]: {vals}")
        if REFERENCE in sw.algorithms and COMPARISON in sw.algorithms:
            print(f"{sw.axis:>10} gain of {REFERENCE} over {COMPARISON}: "
                  + " ".join(f"{100 * g:+.1f}%" for g in res.gains()))
    return 0


def _cmd_solve(args, config, settings) -> int:
    seed = 0 if args.seed is None else args.seed
    scn = generate_scenario(config, seed)
    report = {"seed": seed, "algorithms": {}}
    for name in _algorithms(args.algorithms, settings["algorithms"]):
        res = run_algorithm(name, scn, config)
        s = res.slots[0]
        a = s.allocation
        report["algorithms"][name] = dict(
            ee_bits_per_joule=res.ee, iterations=s.iterations, converged=bool(s.converged),
            xi_trajectory=[float(x) for x in s.xi_trajectory],
            cu_of_tvu=[int(x) for x in a.x_tvu], svu_of_tvu=[int(x) for x in a.svu],
            beta1=a.beta1.tolist(), beta2=a.beta2.tolist(), eps1=a.eps1.tolist(),
            eps2=a.eps2.tolist(), excluded=[int(m) for m in np.flatnonzero(s.excluded)])
        print(f"{name:>16}: EE = {res.ee / 1e6:.4f} Mbit/J, {s.iterations} iterations, "
              f"{int(s.excluded.sum())} excluded")
    if args.out:
        path = Path(args.out)
        if path.suffix != ".json":
            path = check_writable(path) / f"solve_seed{seed}.json"
        path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return 0


def micro_config(config: Config) -> Config:
    return config.with_scenario(num_tvus=2, num_svus=2, num_cus=3, num_scs=3)


def _cmd_oracle(args, config, settings) -> int:
    from .oracle import exhaustive_small_instance_ee
    from .solver import jccraa
    cfg = micro_config(config)
    base = 0 if args.seed is None else args.seed
    checked = 0
    worst = math.inf
    seed = base
    while checked < args.instances and seed < base + 50 * args.instances:
        scn = generate_scenario(cfg, seed)
        orc = exhaustive_small_instance_ee(scn, cfg.solver)
        if orc.ee > 0:
            ee = jccraa(scn, cfg).ee
            ratio = ee / orc.ee
            worst = min(worst, ratio)
            checked += 1
            print(f"seed {seed:4d}: jccraa {ee:.6g}  oracle {orc.ee:.6g}  ratio {ratio:.6f}")
        else:
            print(f"seed {seed:4d}: oracle finds no feasible configuration, skipped")
        seed += 1
    if not checked:
        return EXIT_INFEASIBLE
    print(f"{checked} instances, worst ratio {worst:.6f}")
    return 0


def _cmd_dump(args, config, settings) -> int:
    seed = 0 if args.seed is None else args.seed
    path = Path(args.out or f"scenario_seed{seed}.json")
    if path.suffix != ".json":
        path = check_writable(path) / f"scenario_seed{seed}.json"
    dump_scenario(generate_scenario(config, seed), path)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="noma-vec", description="Socially aware NOMA offloading experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML file with [scenario], [solver], [sweep] tables")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--algorithms", help="comma-separated subset of " + ",".join(ALGORITHMS))
        sp.add_argument("--jobs", type=int, default=1)

    sp = sub.add_parser("sweep", help="Monte Carlo sweeps; CSV and SVG per axis")
    common(sp)
    sp.add_argument("--drops", type=int)
    sp.add_argument("--axes", help="comma-separated subset of " + ",".join(AXES))
    sp.set_defaults(func=_cmd_sweep, out="results")
    sp = sub.add_parser("solve", help="solve one scenario with each algorithm")
    common(sp)
    sp.set_defaults(func=_cmd_solve)
    sp = sub.add_parser("oracle", help="compare against exhaustive search on micro-instances")
    common(sp)
    sp.add_argument("--instances", type=int, default=10)
    sp.set_defaults(func=_cmd_oracle)
    sp = sub.add_parser("dump-scenario", help="write a scenario trace as JSON")
    common(sp)
    sp.set_defaults(func=_cmd_dump)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = load_raw(args.config)
        config = validate_config(raw)
        settings = sweep_settings(raw)
        if args.jobs < 1:
            raise ConfigError(["--jobs must be >= 1"])
        return args.func(args, config, settings)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ExperimentInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
