"""Regenerate the three EE sweeps (M, task size, F) into one directory.

    python scripts/run_figures.py --out results --jobs 4
"""
import argparse
import sys
import time

from noma_vec.harness import main


def cli():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--out", default="results")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--drops", type=int)
    p.add_argument("--config")
    a = p.parse_args()
    argv = ["sweep", "--out", a.out, "--jobs", str(a.jobs)]
    if a.drops:
        argv += ["--drops", str(a.drops)]
    if a.config:
        argv += ["--config", a.config]
    t0 = time.perf_counter()
    code = main(argv)
    print(f"done in {time.perf_counter() - t0:.0f} s, exit {code}")
    return code


if __name__ == "__main__":
    sys.exit(cli())
