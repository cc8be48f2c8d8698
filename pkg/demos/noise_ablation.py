"""Sweep the qubit bias and watch the frequency tests react.

The post-processing model shrinks the bias a hundredfold, so the
same raw bias that fails the raw stream passes once it is on.
"""

from qrng_audit.annealer import AnnealerConfig, NoiseModel, default_graph, effective_noise, generate_stream
from qrng_audit.nist import SuiteConfig, run_test

graph = default_graph()
cfg = SuiteConfig()
n_anneals = 5000

for bias in (0.0, 5e-4, 2e-3, 1e-2):
    row = []
    for pp in (False, True):
        config = AnnealerConfig(postprocess_sampling=pp)
        noise = effective_noise(config, NoiseModel(qubit_bias=bias, rng_seed=3))
        seq, _ = generate_stream(graph, config, noise, n_anneals)
        row.append(run_test("monobit", seq, cfg).values[0])
    print(f"bias {bias:<7g} monobit p  off {row[0]:.3g}  on {row[1]:.3g}")
