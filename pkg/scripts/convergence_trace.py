"""Print the Dinkelbach price sequence of JCCRAA on one drop and plot it as SVG."""
import argparse

from noma_vec.config import load_config
from noma_vec.harness import drop_seed
from noma_vec.plotting import write_line_chart
from noma_vec.scenario import generate_scenario
from noma_vec.solver import jccraa

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--config")
p.add_argument("--drop", type=int, default=0)
p.add_argument("--seed", type=int, default=2024, help="master seed")
p.add_argument("--out", default="convergence.svg")
a = p.parse_args()

cfg = load_config(a.config)
slot = jccraa(generate_scenario(cfg, drop_seed(a.seed, a.drop)), cfg).slots[0]
for i, xi in enumerate(slot.xi_trajectory):
    print(f"{i:3d}  xi = {xi / 1e6:.6f} Mbit/J")
print(f"converged={slot.converged} after {slot.iterations} iterations")
it = list(range(len(slot.xi_trajectory)))
write_line_chart(a.out, {"jccraa": (it, list(slot.xi_trajectory))}, "Outer iteration",
                 "xi (Mbit/J)", title="Dinkelbach price", y_scale=1e6)
print(a.out)
