import os
import sys

RESULTS_DIR = "results"

# experiment name -> stages that are run for it, in order
experiments = {
    "nagumo": ["validate", "stationary", "orbits", "homology", "report"],
    "cubic_damped": ["validate", "stationary", "orbits", "homology"],
    "chafee_infante_2": ["validate", "stationary", "orbits", "homology"],
    "chafee_infante_5": ["validate", "stationary", "orbits", "homology", "report"],
    "neumann_even": ["validate", "stationary", "orbits", "homology"],
    "nagumo_homotopy": ["validate", "continue"],
}

for name, stages in experiments.items():
    for stage in stages:
        command = f"python main.py {stage} --config experiments/{name}.json --out {RESULTS_DIR}/{name}"
        return_value = os.system(command)
        if return_value != 0:
            sys.stderr.write(f"'{stage}' failed for {name}\n")
            break
