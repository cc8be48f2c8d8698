"""Run the eight-dataset grid (annealing time x post-processing) and print the matrix.

Usage: python canonical_experiment.py [N_BITS] [CHECKPOINT_DIR]

Interrupting and rerunning with the same checkpoint directory resumes
where it stopped and yields the same matrix.
"""

import sys

from qrng_audit.nist import SuiteConfig
from qrng_audit.report import render
from qrng_audit.runner import canonical_plan, run_experiment

n_bits = int(sys.argv[1]) if len(sys.argv) > 1 else 2_000_000
ckpt = sys.argv[2] if len(sys.argv) > 2 else None

records = canonical_plan(n_bits, noise_off={"qubit_bias": 2e-3}, noise_on={"qubit_bias": 2e-3})
matrix = run_experiment(records, SuiteConfig(), ckpt)
print(render(matrix, "plain"))
