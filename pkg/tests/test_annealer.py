import itertools
from dataclasses import replace

import numpy as np
import pytest

from qrng_audit.annealer import (
    DEFAULT_INACTIVE,
    AnnealerConfig,
    NoiseModel,
    _uniforms,
    apply_postprocess_model,
    build_chimera,
    default_graph,
    effective_noise,
    generate_stream,
    load_sim_config,
    reference_generator,
    sample_anneal,
)
from qrng_audit.bitstream import AnnealSample
from qrng_audit.nist import serial
from qrng_audit.runner import TABLE1_BITS


def brute_couplers(grid, shore):
    def coords(q):
        k = q % shore
        u = (q // shore) % 2
        cell = q // (2 * shore)
        return cell // grid, cell % grid, u, k

    n = grid * grid * 2 * shore
    out = set()
    for a, b in itertools.combinations(range(n), 2):
        ia, ja, ua, ka = coords(a)
        ib, jb, ub, kb = coords(b)
        intra = (ia, ja) == (ib, jb) and ua != ub
        vertical = ua == ub == 0 and ja == jb and ka == kb and abs(ia - ib) == 1
        horizontal = ua == ub == 1 and ia == ib and ka == kb and abs(ja - jb) == 1
        if intra or vertical or horizontal:
            out.add((a, b))
    return out


# -- graph --------------------------------------------------------------------


def test_full_chip_counts():
    g = build_chimera(16, 4)
    assert g.n_qubits == 2048 and g.n_active == 2048
    intra = [0] * 2048
    for a, b in g.couplers:
        if a // 8 == b // 8:
            intra[a] += 1
            intra[b] += 1
    assert set(intra) == {4}
    assert len(g.couplers) == 256 * 16 + 2 * 15 * 16 * 4


@pytest.mark.parametrize("grid, shore", [(2, 4), (3, 2), (1, 3)])
def test_couplers_match_brute_force(grid, shore):
    g = build_chimera(grid, shore)
    assert set(g.couplers) == brute_couplers(grid, shore)
    if (grid, shore) == (2, 4):
        assert len(g.couplers) == 4 * 16 + 16


def test_default_graph_masking():
    g = default_graph()
    assert g.n_active == 2032 == int(g.active_mask.sum())
    assert g.inactive() == list(DEFAULT_INACTIVE)
    dead = set(DEFAULT_INACTIVE)
    assert not any(a in dead or b in dead for a, b in g.couplers)
    full = build_chimera(16, 4)
    assert len(g.couplers) == sum(1 for a, b in full.couplers if a not in dead and b not in dead)
    cu, cv = g.coupler_positions()
    active = g.active_qubits
    assert [(active[u], active[v]) for u, v in zip(cu, cv)] == list(g.couplers)


def test_mask_size_checked():
    with pytest.raises(ValueError):
        build_chimera(2, 4, np.ones(31, dtype=bool))
    with pytest.raises(ValueError):
        build_chimera(0, 4)


# -- config and noise validation -----------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        AnnealerConfig(annealing_time_us=0)
    with pytest.raises(ValueError):
        AnnealerConfig(annealing_time_us=2001)
    with pytest.raises(ValueError):
        AnnealerConfig(readout_thermalization_us=5)
    c = AnnealerConfig(2000, True)
    assert c.linear_coeffs == 0.0 and c.quadratic_coeffs == 0.0
    assert c.time_factor() == 1.0


@pytest.mark.parametrize(
    "kw",
    [{"qubit_bias": 0.5}, {"qubit_bias": -0.5}, {"temporal_rho": 1.5}, {"coupler_rho": -0.1},
     {"qubit_bias": 0.3, "drift_amplitude": 0.25}, {"drift_period_anneals": 0}],
)
def test_noise_validation(kw):
    with pytest.raises(ValueError):
        NoiseModel(**kw)


def test_bias_vector_shape():
    assert NoiseModel(qubit_bias=0.1).bias_vector(3).tolist() == [0.1] * 3
    assert NoiseModel(qubit_bias=(0.1, 0.0)).bias_vector(2).tolist() == [0.1, 0.0]
    with pytest.raises(ValueError):
        NoiseModel(qubit_bias=(0.1, 0.0)).bias_vector(3)


def test_postprocess_scaling():
    n = apply_postprocess_model(NoiseModel(qubit_bias=0.001, coupler_rho=0.2, temporal_rho=0.3))
    assert n.qubit_bias == pytest.approx(1e-5)
    assert n.coupler_rho == pytest.approx(0.002)
    assert n.temporal_rho == 0.3
    z = apply_postprocess_model(NoiseModel(qubit_bias=(0.01, -0.02), coupler_rho=0.2), 0.0)
    assert z.qubit_bias == (0.0, -0.0) and z.coupler_rho == 0.0
    with pytest.raises(ValueError):
        apply_postprocess_model(NoiseModel(), 1.5)


def test_effective_noise():
    raw = NoiseModel(qubit_bias=0.002, drift_amplitude=0.01)
    assert effective_noise(AnnealerConfig(1, False), raw) == raw
    assert effective_noise(AnnealerConfig(1, True), raw).qubit_bias == pytest.approx(2e-5)
    timed = AnnealerConfig(100, False, time_coupling={100: 2.0})
    eff = effective_noise(timed, raw)
    assert eff.qubit_bias == pytest.approx(0.004) and eff.drift_amplitude == pytest.approx(0.02)


# -- sampling -----------------------------------------------------------------


def test_sample_shape_and_spins():
    g = default_graph()
    s = sample_anneal(g, AnnealerConfig(), NoiseModel(rng_seed=3))
    assert s.spins.shape == (2032,) and set(np.unique(s.spins)) <= {-1, 1}
    with pytest.raises(ValueError):
        sample_anneal(g, AnnealerConfig(), NoiseModel(), prev=AnnealSample(np.ones(5, np.int8), 0))


def test_temporal_copy_limit():
    g = default_graph()
    prev = sample_anneal(g, AnnealerConfig(), NoiseModel(rng_seed=1))
    out = sample_anneal(g, AnnealerConfig(), NoiseModel(temporal_rho=1.0, rng_seed=2), prev, t=1)
    assert np.array_equal(out.spins, prev.spins)


def test_two_anneals_deterministic():
    g = default_graph()
    a, meta = generate_stream(g, AnnealerConfig(), NoiseModel(rng_seed=5), 2)
    b, _ = generate_stream(g, AnnealerConfig(), NoiseModel(rng_seed=5), 2)
    c, _ = generate_stream(g, AnnealerConfig(), NoiseModel(rng_seed=6), 2)
    assert len(a) == meta.bit_count == 4064
    assert a == b and a != c


def test_full_scale_bit_count():
    assert 1_261_686 * default_graph().n_active == 2_563_745_952 == TABLE1_BITS["test1"]


def _reference_stream(graph, noise, n_anneals):
    """Bit-by-bit restatement of the generative model, one anneal at a time."""
    n = graph.n_active
    cu, cv = graph.coupler_positions()
    p = 0.5 + noise.bias_vector(n)
    out, prev = [], None
    for t in range(n_anneals):
        pt = np.clip(p + noise.drift(t), 0, 1)
        bits = [int(u < q) for u, q in zip(_uniforms(noise.rng_seed, 0, t, 1, n)[0], pt)]
        if noise.temporal_rho > 0 and prev is not None:
            ut = _uniforms(noise.rng_seed, 1, t, 1, n)[0]
            bits = [prev[i] if ut[i] < noise.temporal_rho else bits[i] for i in range(n)]
        if noise.coupler_rho > 0:
            uc = _uniforms(noise.rng_seed, 2, t, 1, len(cu))[0]
            for k in range(len(cu)):
                if uc[k] < noise.coupler_rho:
                    bits[cv[k]] = bits[cu[k]]
        out += bits
        prev = bits
    return out


@pytest.mark.parametrize(
    "noise",
    [NoiseModel(rng_seed=1),
     NoiseModel(qubit_bias=0.05, temporal_rho=0.3, coupler_rho=0.2, drift_amplitude=0.1,
                drift_period_anneals=7, rng_seed=2)],
)
def test_batched_stream_matches_reference(noise):
    g = build_chimera(2, 4, np.arange(32) != 5)
    ref = _reference_stream(g, noise, 21)
    for batch in (1, 31 * 8, 1 << 22):
        seq, _ = generate_stream(g, AnnealerConfig(), noise, 21, batch_values=batch)
        assert seq.unpack().tolist() == ref


def test_stream_equals_chained_single_anneals():
    g = default_graph()
    noise = NoiseModel(qubit_bias=0.01, temporal_rho=0.2, coupler_rho=0.1, rng_seed=9)
    seq, _ = generate_stream(g, AnnealerConfig(), noise, 12, batch_values=2032 * 8)
    prev, parts = None, []
    for t in range(12):
        prev = sample_anneal(g, AnnealerConfig(), noise, prev, t)
        parts.append(prev.spins > 0)
    assert np.array_equal(seq.unpack(), np.concatenate(parts))


def test_sink_matches_buffer(tmp_path):
    g = default_graph()
    noise = NoiseModel(temporal_rho=0.1, rng_seed=4)
    seq, _ = generate_stream(g, AnnealerConfig(), noise, 50, batch_values=20000)
    with open(tmp_path / "s.bits", "wb") as fh:
        none, meta = generate_stream(g, AnnealerConfig(), noise, 50, sink=fh, batch_values=20000)
    assert none is None and meta.bit_count == len(seq)
    assert (tmp_path / "s.bits").read_bytes() == seq.to_bytes()


@pytest.mark.parametrize("bias, target", [(0.0, 0.5), (0.1, 0.6)])
def test_marginal_frequency(bias, target):
    seq, _ = generate_stream(default_graph(), AnnealerConfig(), NoiseModel(qubit_bias=bias, rng_seed=11), 493)
    n = len(seq)
    assert n >= 10**6
    assert abs(seq.popcount() / n - target) < 0.0015


def test_zero_noise_per_qubit_chi_square():
    from scipy.stats import chi2

    seq, _ = generate_stream(default_graph(), AnnealerConfig(), NoiseModel(rng_seed=12), 500)
    ones = seq.unpack().reshape(500, 2032).sum(axis=0)
    stat = float(((ones - 250.0) ** 2 / 250.0 + (ones - 250.0) ** 2 / 250.0).sum())
    assert chi2.sf(stat, 2032) > 0.001


def _lag_corr(x, lag):
    s = x.astype(np.int8) * 2 - 1
    return float(np.mean(s[:-lag] * s[lag:].astype(np.int32)))


def test_temporal_rho_lag_autocorrelation():
    seq, _ = generate_stream(default_graph(), AnnealerConfig(), NoiseModel(temporal_rho=0.5, rng_seed=13), 4922)
    x = seq.unpack()
    assert len(x) >= 10**7
    m = len(x) - 2032
    # copy events are independent, so the lag products are i.i.d. with mean 0.5, variance 0.75
    assert abs(_lag_corr(x, 2032) - 0.5) < 3 * np.sqrt(0.75 / m)
    assert abs(_lag_corr(x, 1)) < 3 / np.sqrt(m)


def test_independence_without_correlation_knobs():
    g = default_graph()
    seq, _ = generate_stream(g, AnnealerConfig(), NoiseModel(rng_seed=14), 2000)
    x = seq.unpack()
    assert abs(_lag_corr(x, 2032)) < 3 / np.sqrt(len(x) - 2032)
    a = x.reshape(2000, 2032).astype(np.int32) * 2 - 1
    cu, cv = g.coupler_positions()
    prods = (a[:, cu] * a[:, cv]).mean(axis=0)
    # 5921 coupler correlations, each ~N(0, 1/2000); allow 4.5 sigma for the max
    assert np.max(np.abs(prods)) < 4.5 / np.sqrt(2000)


def test_coupler_rho_correlates_coupled_pairs():
    g = default_graph()
    seq, _ = generate_stream(g, AnnealerConfig(), NoiseModel(coupler_rho=0.2, rng_seed=15), 2000)
    a = seq.unpack().reshape(2000, 2032).astype(np.int32) * 2 - 1
    cu, cv = g.coupler_positions()
    assert (a[:, cu] * a[:, cv]).mean() > 0.05


def test_drift_trajectory():
    noise = NoiseModel(drift_amplitude=0.2, drift_period_anneals=400, rng_seed=16)
    seq, _ = generate_stream(default_graph(), AnnealerConfig(), noise, 400)
    freq = seq.unpack().reshape(400, 2032).mean(axis=1)
    assert freq[90:110].mean() == pytest.approx(0.7, abs=0.01)
    assert freq[290:310].mean() == pytest.approx(0.3, abs=0.01)


# -- reference generators ------------------------------------------------------


def test_reference_small():
    assert reference_generator("constant_zero", 0, 8).to_str() == "00000000"
    assert reference_generator("alternating", 0, 6).to_str() == "010101"
    with pytest.raises(ValueError):
        reference_generator("mersenne", 0, 8)


def test_crypto_deterministic_and_seeded():
    a = reference_generator("crypto_quality", 1, 10**5)
    assert a == reference_generator("crypto_quality", 1, 10**5)
    assert a != reference_generator("crypto_quality", 2, 10**5)
    assert reference_generator("crypto_quality", 1, 1000) == a[:1000]


def test_weak_lcg_period():
    x = reference_generator("weak_lcg", 7, 8 * 1024).to_bytes()
    assert x[:256] == x[256:512] == x[768:1024]


def test_weak_lcg_fails_serial():
    r = serial(reference_generator("weak_lcg", 1, 10**8))
    assert max(r.values) < 1e-10


# -- config files ---------------------------------------------------------------


def test_load_sim_config(tmp_path):
    p = tmp_path / "sim.ini"
    p.write_text(
        "[graph]\ngrid_size = 16\nshore_size = 4\ninactive = default\n"
        "[config]\nannealing_time_us = 100\npostprocess_sampling = yes\nattenuation = 0.05\n"
        "[noise]\nqubit_bias = 0.001\ntemporal_rho = 0.01\nrng_seed = 42\n"
    )
    graph, config, noise, att = load_sim_config(p)
    assert graph == default_graph()
    assert config == AnnealerConfig(100, True)
    assert noise == NoiseModel(qubit_bias=0.001, temporal_rho=0.01, rng_seed=42)
    assert att == 0.05


def test_load_sim_config_small_graph(tmp_path):
    p = tmp_path / "sim.ini"
    p.write_text("[graph]\ngrid_size = 2\nshore_size = 4\ninactive = 1, 7\n[noise]\nqubit_bias = 0.1 0.2\n")
    graph, _, noise, _ = load_sim_config(p)
    assert graph.inactive() == [1, 7] and graph.n_active == 30
    assert noise.qubit_bias == (0.1, 0.2)


@pytest.mark.parametrize(
    "text",
    ["[noise]\nbias = 0.1\n", "[extra]\nx = 1\n", "[config]\nannealing_time_us = 5000\n",
     "[graph]\ngrid_size = 2\nshore_size = 4\ninactive = 99\n"],
)
def test_load_sim_config_rejects(tmp_path, text):
    p = tmp_path / "bad.ini"
    p.write_text(text)
    with pytest.raises(ValueError):
        load_sim_config(p)


def test_replace_keeps_validation():
    with pytest.raises(ValueError):
        replace(NoiseModel(), temporal_rho=2.0)
