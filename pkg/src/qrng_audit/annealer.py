"""Simulated annealer bit source on a Chimera hardware graph.

The model is phenomenological.  Each anneal draws one bit per active
qubit with P(1) = 0.5 + b_i + d(t), then optionally copies the previous
anneal's value per qubit (``temporal_rho``) and copies values along
couplers in sorted order (``coupler_rho``).  All randomness comes from
Philox streams keyed by ``(rng_seed, phase)`` with the counter offset by
the anneal ordinal, so anneal ``t`` is the same whether it is generated
alone or inside a batch.

Examples
--------
>>> g = build_chimera(2, 4)
>>> g.n_qubits, g.n_active, len(g.couplers)
(32, 32, 80)
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from typing import BinaryIO

import numba as nb
import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

from .bitstream import AnnealSample, BitSequence, StreamMetadata

__all__ = [
    "DEFAULT_INACTIVE",
    "REFERENCE_KINDS",
    "AnnealerConfig",
    "ChimeraGraph",
    "NoiseModel",
    "apply_postprocess_model",
    "build_chimera",
    "default_graph",
    "effective_noise",
    "generate_stream",
    "load_sim_config",
    "reference_generator",
    "sample_anneal",
    "stream_digest",
]

# Representative inactive set for a 16x4 Chimera chip (2048 - 16 = 2032 active).
DEFAULT_INACTIVE = (
    37, 150, 291, 404, 517, 630, 743, 856,
    1069, 1182, 1295, 1408, 1521, 1634, 1747, 1988,
)

ANNEALING_TIMES_US = (1, 10, 100, 2000)


@dataclass(frozen=True, eq=False)
class ChimeraGraph:
    """Chimera connectivity restricted to the active qubits.

    Qubit ``(i, j, u, k)`` (row, column, shore, index) has linear index
    ``(i*grid + j)*2*shore + u*shore + k``.  ``couplers`` holds sorted
    ``(lo, hi)`` pairs of linear indices, ascending.
    """

    grid_size: int
    shore_size: int
    active_mask: np.ndarray
    couplers: tuple

    @property
    def n_qubits(self) -> int:
        return self.active_mask.size

    @property
    def n_active(self) -> int:
        return int(self.active_mask.sum())

    @property
    def active_qubits(self) -> np.ndarray:
        return np.flatnonzero(self.active_mask)

    def coupler_positions(self) -> tuple[np.ndarray, np.ndarray]:
        """Coupler endpoints as positions within the active-qubit vector."""
        pos = np.cumsum(self.active_mask) - 1
        if not self.couplers:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty
        arr = np.asarray(self.couplers, dtype=np.int64)
        return pos[arr[:, 0]], pos[arr[:, 1]]

    def inactive(self) -> list[int]:
        return np.flatnonzero(~self.active_mask).tolist()

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChimeraGraph):
            return NotImplemented
        return (self.grid_size == other.grid_size and self.shore_size == other.shore_size
                and np.array_equal(self.active_mask, other.active_mask))

    def __hash__(self) -> int:
        return hash((self.grid_size, self.shore_size, self.active_mask.tobytes()))


def build_chimera(grid_size: int, shore_size: int, active_mask=None) -> ChimeraGraph:
    """Build a ``grid_size`` x ``grid_size`` Chimera graph.

    Intra-cell couplers join every shore-0 qubit to every shore-1 qubit.
    Shore-0 qubits link vertically to the same position in the next row,
    shore-1 qubits horizontally to the next column.  Couplers touching an
    inactive qubit are dropped.
    """
    if grid_size < 1 or shore_size < 1:
        raise ValueError("grid_size and shore_size must be positive")
    n = grid_size * grid_size * 2 * shore_size
    if active_mask is None:
        mask = np.ones(n, dtype=bool)
    else:
        mask = np.asarray(active_mask, dtype=bool).reshape(-1)
        if mask.size != n:
            raise ValueError(f"active_mask has {mask.size} entries, graph has {n} qubits")
        mask = mask.copy()
    mask.setflags(write=False)

    def q(i, j, u, k):
        return ((i * grid_size + j) * 2 + u) * shore_size + k

    edges = []
    for i in range(grid_size):
        for j in range(grid_size):
            for k0 in range(shore_size):
                for k1 in range(shore_size):
                    edges.append((q(i, j, 0, k0), q(i, j, 1, k1)))
            for k in range(shore_size):
                if i + 1 < grid_size:
                    edges.append((q(i, j, 0, k), q(i + 1, j, 0, k)))
                if j + 1 < grid_size:
                    edges.append((q(i, j, 1, k), q(i, j + 1, 1, k)))
    kept = sorted((min(a, b), max(a, b)) for a, b in edges if mask[a] and mask[b])
    return ChimeraGraph(grid_size, shore_size, mask, tuple(kept))


def default_graph() -> ChimeraGraph:
    """16x4 Chimera chip with the shipped 16-qubit inactive fixture (2032 active)."""
    mask = np.ones(2048, dtype=bool)
    mask[list(DEFAULT_INACTIVE)] = False
    return build_chimera(16, 4, mask)


@dataclass(frozen=True)
class AnnealerConfig:
    """One job configuration.

    ``time_coupling`` optionally maps an annealing time to a factor that
    scales both qubit bias and drift amplitude; by default annealing time
    leaves the statistics untouched.
    """

    annealing_time_us: int = 1
    postprocess_sampling: bool = False
    programming_thermalization_us: int = 0
    readout_thermalization_us: int = 0
    time_coupling: dict | None = None

    def __post_init__(self):
        if not 1 <= self.annealing_time_us <= 2000:
            raise ValueError(f"annealing_time_us must be in [1, 2000], got {self.annealing_time_us}")
        if self.programming_thermalization_us != 0 or self.readout_thermalization_us != 0:
            raise ValueError("thermalization times are fixed at 0 microseconds")

    @property
    def linear_coeffs(self) -> float:
        return 0.0

    @property
    def quadratic_coeffs(self) -> float:
        return 0.0

    def time_factor(self) -> float:
        if not self.time_coupling:
            return 1.0
        return float(self.time_coupling.get(self.annealing_time_us, 1.0))


@dataclass(frozen=True)
class NoiseModel:
    """Noise knobs, one per named source, each independently switchable.

    ``qubit_bias`` is a scalar applied to every qubit or a sequence with
    one entry per active qubit.
    """

    qubit_bias: float | tuple = 0.0
    temporal_rho: float = 0.0
    coupler_rho: float = 0.0
    drift_amplitude: float = 0.0
    drift_period_anneals: float = 1000.0
    rng_seed: int = 0

    def __post_init__(self):
        if not isinstance(self.qubit_bias, (int, float)):
            object.__setattr__(self, "qubit_bias", tuple(float(b) for b in self.qubit_bias))
        b = np.asarray(self.qubit_bias, dtype=np.float64)
        a = abs(self.drift_amplitude)
        if np.any(0.5 + b + a >= 1) or np.any(0.5 + b - a <= 0):
            raise ValueError("bias plus drift must keep P(1) strictly inside (0, 1)")
        for name in ("temporal_rho", "coupler_rho"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.drift_period_anneals <= 0:
            raise ValueError("drift_period_anneals must be positive")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must fit in 64 bits")

    def bias_vector(self, n_active: int) -> np.ndarray:
        b = np.asarray(self.qubit_bias, dtype=np.float64)
        if b.ndim == 0:
            return np.full(n_active, float(b))
        if b.size != n_active:
            raise ValueError(f"qubit_bias has {b.size} entries for {n_active} active qubits")
        return b

    def drift(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return self.drift_amplitude * np.sin(2 * np.pi * t / self.drift_period_anneals)

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(self.qubit_bias, tuple):
            d["qubit_bias"] = list(self.qubit_bias)
        return d


def apply_postprocess_model(noise: NoiseModel, attenuation: float = 0.01) -> NoiseModel:
    """Stand-in for server-side post-processing: shrink bias and cross-talk.

    This is not a reconstruction of the vendor algorithm.  It scales
    ``qubit_bias`` and ``coupler_rho`` by ``attenuation`` and keeps the
    other knobs.
    """
    if not 0.0 <= attenuation <= 1.0:
        raise ValueError("attenuation must be in [0, 1]")
    bias = noise.qubit_bias
    bias = bias * attenuation if isinstance(bias, (int, float)) else tuple(b * attenuation for b in bias)
    return replace(noise, qubit_bias=bias, coupler_rho=noise.coupler_rho * attenuation)


def effective_noise(config: AnnealerConfig, noise: NoiseModel, attenuation: float = 0.01) -> NoiseModel:
    """Noise actually seen by a job: post-processing model and time coupling applied."""
    out = apply_postprocess_model(noise, attenuation) if config.postprocess_sampling else noise
    f = config.time_factor()
    if f != 1.0:
        bias = out.qubit_bias
        bias = bias * f if isinstance(bias, (int, float)) else tuple(b * f for b in bias)
        out = replace(out, qubit_bias=bias, drift_amplitude=out.drift_amplitude * f)
    return out


# -- sampling -------------------------------------------------------------

_PHASE_FRESH, _PHASE_TEMPORAL, _PHASE_COUPLER = 0, 1, 2


def _uniforms(seed: int, phase: int, t0: int, count: int, width: int) -> np.ndarray:
    """``count`` rows of ``width`` uniforms for anneals t0 .. t0+count-1.

    Each anneal owns ceil(width/4) Philox counter blocks.
    """
    stride = (width + 3) // 4
    bg = np.random.Philox(key=np.array([seed, phase], dtype=np.uint64),
                          counter=np.array([t0 * stride, 0, 0, 0], dtype=np.uint64))
    u = np.random.Generator(bg).random(count * stride * 4).reshape(count, stride * 4)
    return u[:, :width]


@nb.njit(cache=True, nogil=True)
def _correlate(bits, prev, has_prev, ut, rho_t, uc, rho_c, cu, cv):
    B = bits.shape[0]
    n = bits.shape[1]
    for b in range(B):
        if rho_t > 0.0 and (b > 0 or has_prev):
            for i in range(n):
                if ut[b, i] < rho_t:
                    bits[b, i] = bits[b - 1, i] if b > 0 else prev[i]
        if rho_c > 0.0:
            for k in range(cu.size):
                if uc[b, k] < rho_c:
                    bits[b, cv[k]] = bits[b, cu[k]]


def _anneal_bits(graph: ChimeraGraph, noise: NoiseModel, t0: int, count: int,
                 prev: np.ndarray | None, bias: np.ndarray, cu, cv) -> np.ndarray:
    """Bits (count, n_active) uint8 for anneals t0 .. t0+count-1."""
    n = bias.size
    p = 0.5 + bias[None, :]
    if noise.drift_amplitude:
        p = p + noise.drift(np.arange(t0, t0 + count))[:, None]
    p = np.clip(p, 0.0, 1.0)
    bits = (_uniforms(noise.rng_seed, _PHASE_FRESH, t0, count, n) < p).view(np.uint8)
    if noise.temporal_rho > 0 or noise.coupler_rho > 0:
        bits = np.ascontiguousarray(bits)
        ut = (_uniforms(noise.rng_seed, _PHASE_TEMPORAL, t0, count, n) if noise.temporal_rho > 0
              else np.zeros((count, 1)))
        uc = (_uniforms(noise.rng_seed, _PHASE_COUPLER, t0, count, cu.size)
              if noise.coupler_rho > 0 and cu.size else np.zeros((count, 1)))
        has_prev = prev is not None
        prev_arr = np.ascontiguousarray(prev, dtype=np.uint8) if has_prev else np.zeros(n, np.uint8)
        _correlate(bits, prev_arr, has_prev, np.ascontiguousarray(ut), float(noise.temporal_rho),
                   np.ascontiguousarray(uc), float(noise.coupler_rho) if cu.size else 0.0, cu, cv)
    return bits


def sample_anneal(graph: ChimeraGraph, config: AnnealerConfig, noise: NoiseModel,
                  prev: AnnealSample | None = None, t: int = 0) -> AnnealSample:
    """One anneal-readout cycle at ordinal ``t`` (0-based).

    ``noise`` is used as given; pass it through :func:`effective_noise`
    first to apply the job's post-processing flag.
    """
    n = graph.n_active
    prev_bits = None
    if prev is not None:
        if prev.spins.size != n:
            raise ValueError(f"prev has {prev.spins.size} spins, graph has {n} active qubits")
        prev_bits = (prev.spins > 0).astype(np.uint8)
    cu, cv = graph.coupler_positions()
    bits = _anneal_bits(graph, noise, t, 1, prev_bits, noise.bias_vector(n), cu, cv)[0]
    spins = bits.astype(np.int8) * 2 - 1
    return AnnealSample(spins, t)


def stream_digest(graph: ChimeraGraph, config: AnnealerConfig, noise: NoiseModel) -> str:
    doc = {
        "graph": {"grid_size": graph.grid_size, "shore_size": graph.shore_size,
                  "inactive": graph.inactive()},
        "config": asdict(config),
        "noise": noise.to_dict(),
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True, default=str).encode()).hexdigest()[:16]


def generate_stream(graph: ChimeraGraph, config: AnnealerConfig, noise: NoiseModel,
                    n_anneals: int, sink: BinaryIO | None = None,
                    batch_values: int = 1 << 22) -> tuple[BitSequence | None, StreamMetadata]:
    """Concatenate ``n_anneals`` anneals (ordinals 0..n-1) into one stream.

    With ``sink`` the packed bytes go to the open binary file and the
    returned sequence is ``None``; otherwise the stream is built in a
    preallocated buffer.
    """
    if n_anneals < 1:
        raise ValueError("n_anneals must be >= 1")
    n = graph.n_active
    total = n_anneals * n
    bias = noise.bias_vector(n)
    cu, cv = graph.coupler_positions()
    step = max(8, (batch_values // max(n, 1)) // 8 * 8)
    out = np.zeros((total + 7) // 8, dtype=np.uint8) if sink is None else None
    prev = None
    byte_pos = 0
    for t0 in range(0, n_anneals, step):
        count = min(step, n_anneals - t0)
        bits = _anneal_bits(graph, noise, t0, count, prev, bias, cu, cv)
        prev = bits[-1].copy()
        # step*n is a multiple of 8, so only the final batch can leave a partial byte
        packed = np.packbits(bits.reshape(-1))
        if sink is None:
            out[byte_pos:byte_pos + packed.size] = packed
        else:
            sink.write(packed.tobytes())
        byte_pos += packed.size
    meta = StreamMetadata(
        bit_count=total,
        source_descriptor=(f"annealer-sim chimera={graph.grid_size}x{graph.shore_size} "
                           f"active={n} anneal_us={config.annealing_time_us} "
                           f"postprocess={'on' if config.postprocess_sampling else 'off'}"),
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        config_digest=stream_digest(graph, config, noise),
    )
    seq = BitSequence._take(out, total) if sink is None else None
    return seq, meta


# -- config files ---------------------------------------------------------


def _parse_floats(text: str):
    parts = [p for p in text.replace(",", " ").split() if p]
    vals = [float(p) for p in parts]
    return vals[0] if len(vals) == 1 else tuple(vals)


def load_sim_config(path) -> tuple[ChimeraGraph, AnnealerConfig, NoiseModel, float]:
    """Read an INI file with ``[graph]``, ``[config]`` and ``[noise]`` sections.

    Returns ``(graph, config, noise, attenuation)``.  Unknown keys are
    rejected so typos do not silently fall back to defaults.
    """
    cp = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    known = {
        "graph": {"grid_size", "shore_size", "inactive"},
        "config": {"annealing_time_us", "postprocess_sampling", "programming_thermalization_us",
                   "readout_thermalization_us", "attenuation"},
        "noise": {"qubit_bias", "temporal_rho", "coupler_rho", "drift_amplitude",
                  "drift_period_anneals", "rng_seed"},
    }
    for section in cp.sections():
        if section not in known:
            raise ValueError(f"unknown section [{section}] in {path}")
        extra = set(cp[section]) - known[section]
        if extra:
            raise ValueError(f"unknown keys in [{section}]: {sorted(extra)}")

    g = cp["graph"] if cp.has_section("graph") else {}
    grid = int(g.get("grid_size", 16))
    shore = int(g.get("shore_size", 4))
    inactive = g.get("inactive", "default").strip()
    if inactive == "default" and (grid, shore) == (16, 4):
        graph = default_graph()
    else:
        mask = np.ones(grid * grid * 2 * shore, dtype=bool)
        if inactive not in ("", "none", "default"):
            idx = [int(x) for x in inactive.replace(",", " ").split()]
            if any(not 0 <= i < mask.size for i in idx):
                raise ValueError("inactive qubit index out of range")
            mask[idx] = False
        graph = build_chimera(grid, shore, mask)

    c = cp["config"] if cp.has_section("config") else None
    get_c = (lambda k, d: c.get(k, d)) if c is not None else (lambda k, d: d)
    config = AnnealerConfig(
        annealing_time_us=int(get_c("annealing_time_us", "1")),
        postprocess_sampling=c.getboolean("postprocess_sampling", False) if c is not None else False,
        programming_thermalization_us=int(get_c("programming_thermalization_us", "0")),
        readout_thermalization_us=int(get_c("readout_thermalization_us", "0")),
    )
    attenuation = float(get_c("attenuation", "0.01"))

    nz = cp["noise"] if cp.has_section("noise") else {}
    noise = NoiseModel(
        qubit_bias=_parse_floats(nz.get("qubit_bias", "0")),
        temporal_rho=float(nz.get("temporal_rho", 0)),
        coupler_rho=float(nz.get("coupler_rho", 0)),
        drift_amplitude=float(nz.get("drift_amplitude", 0)),
        drift_period_anneals=float(nz.get("drift_period_anneals", 1000)),
        rng_seed=int(nz.get("rng_seed", 0)),
    )
    return graph, config, noise, attenuation


# -- reference generators -------------------------------------------------

REFERENCE_KINDS = ("crypto_quality", "weak_lcg", "constant_zero", "alternating")


def _chacha20_bytes(seed: int, nbytes: int, chunk: int = 1 << 24) -> np.ndarray:
    key = hashlib.sha256(b"qrng-audit reference " + str(int(seed)).encode()).digest()
    enc = Cipher(algorithms.ChaCha20(key, bytes(16)), mode=None).encryptor()
    out = np.empty(nbytes, dtype=np.uint8)
    zeros = bytes(min(chunk, nbytes))
    for pos in range(0, nbytes, chunk):
        k = min(chunk, nbytes - pos)
        out[pos:pos + k] = np.frombuffer(enc.update(zeros[:k]), dtype=np.uint8)
    return out


def _lcg_bytes(seed: int, nbytes: int) -> np.ndarray:
    # x <- (1103515245 x + 12345) mod 2^31; the low 8 bits repeat every 256 steps
    x = int(seed) % (1 << 31)
    period = np.empty(256, dtype=np.uint8)
    for i in range(256):
        x = (1103515245 * x + 12345) & 0x7FFFFFFF
        period[i] = x & 0xFF
    reps = -(-nbytes // 256)
    return np.tile(period, reps)[:nbytes]


def reference_generator(kind: str, seed: int, n_bits: int) -> BitSequence:
    """Deterministic calibration streams.

    ``crypto_quality`` is a ChaCha20 keystream keyed from the seed;
    ``weak_lcg`` emits the low byte of a mod-2^31 LCG (period 256);
    ``constant_zero`` and ``alternating`` ("0101...") ignore the seed.
    """
    if kind not in REFERENCE_KINDS:
        raise ValueError(f"unknown reference generator {kind!r}; expected one of {REFERENCE_KINDS}")
    if n_bits < 0:
        raise ValueError("n_bits must be non-negative")
    nbytes = (n_bits + 7) // 8
    if kind == "crypto_quality":
        buf = _chacha20_bytes(seed, nbytes)
    elif kind == "weak_lcg":
        buf = _lcg_bytes(seed, nbytes)
    elif kind == "constant_zero":
        buf = np.zeros(nbytes, dtype=np.uint8)
    else:
        buf = np.full(nbytes, 0x55, dtype=np.uint8)
    if n_bits % 8 and nbytes:
        buf[-1] &= np.uint8((0xFF << (8 - n_bits % 8)) & 0xFF)
    return BitSequence._take(buf, n_bits)
