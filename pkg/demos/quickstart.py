"""Simulate a small noisy annealer and run the full battery on its output."""

from qrng_audit.annealer import AnnealerConfig, NoiseModel, default_graph, generate_stream
from qrng_audit.nist import run_all

graph = default_graph()
noise = NoiseModel(qubit_bias=2e-3, rng_seed=11)
seq, meta = generate_stream(graph, AnnealerConfig(), noise, n_anneals=1000)
print(f"{len(seq)} bits from {graph.n_active} active qubits")

report = run_all(seq)
for r in report.results:
    shown = ", ".join(f"{p:.4f}" for p in r.values) if len(r.values) <= 2 else f"min {min(r.values):.4f}" if r.values else "-"
    print(f"{r.test_name:26s} {r.verdict:15s} {shown}")
print("verdict:", report.verdict)
