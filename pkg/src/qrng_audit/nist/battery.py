"""The fifteen SP 800-22 tests over packed bit sequences.

Every test has the signature ``test(seq, cfg=SuiteConfig()) -> TestResult``
and never raises for short input: it returns a ``not_applicable`` result
that names the minimum it needed.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..bitstream import BitSequence
from ..stats import erfc, igamc, normal_cdf
from . import _kernels as K
from .core import NON_RANDOM, NOT_APPLICABLE, RANDOM, SuiteConfig, TestResult, dumps
from .spectral import choose_factorization, count_below_incore, count_below_outofcore

log = logging.getLogger(__name__)

__all__ = [
    "TEST_ORDER",
    "SuiteReport",
    "aperiodic_templates",
    "approximate_entropy",
    "binary_matrix_rank",
    "block_frequency",
    "cumulative_sums",
    "linear_complexity",
    "longest_run_in_block",
    "maurers_universal",
    "monobit",
    "non_overlapping_template",
    "overlapping_template",
    "random_excursions",
    "random_excursions_variant",
    "run_all",
    "runs",
    "serial",
    "spectral_dft",
    "table_rows",
]

_DEFAULT = SuiteConfig()


def _buf(seq: BitSequence) -> np.ndarray:
    return seq.payload


# -- frequency family -----------------------------------------------------


def monobit(seq: BitSequence, cfg: SuiteConfig = _DEFAULT) -> TestResult:
    n = len(seq)
    minimum = 100 if cfg.strict else 1
    if n < minimum:
        return TestResult.not_applicable("monobit", {}, f"needs n >= {minimum}", minimum_bits=minimum)
    ones = K.count_ones(_buf(seq), 0, n)
    s = 2 * ones - n
    s_obs = abs(s) / math.sqrt(n)
    p = erfc(s_obs / math.sqrt(2))
    return TestResult.make("monobit", {}, [("p", p)], {"n": n, "sum": s, "s_obs": s_obs}, cfg.alpha)


def _block_frequency_m(n: int, cfg: SuiteConfig) -> int:
    if cfg.block_frequency_m is not None:
        return cfg.block_frequency_m
    return min(131072, max(20, math.ceil(0.02 * n)))


def block_frequency(seq: BitSequence, cfg: SuiteConfig = _DEFAULT) -> TestResult:
    n = len(seq)
    M = _block_frequency_m(n, cfg)
    params = {"M": M}
    minimum = max(100, M) if cfg.strict else M
    if n < minimum:
        return TestResult.not_applicable("block_frequency", params, f"needs n >= {minimum}",
                                         minimum_bits=minimum)
    N = n // M
    chi2 = K.block_deviation_sumsq(_buf(seq), M, N) / M
    p = igamc(N / 2, chi2 / 2)
    return TestResult.make("block_frequency", params, [("p", p)], {"n": n, "N": N, "chi2": chi2},
                           cfg.alpha)


def runs(seq: BitSequence, cfg: SuiteConfig = _DEFAULT) -> TestResult:
    n = len(seq)
    minimum = 100 if cfg.strict else 2
    if n < minimum:
        return TestResult.not_applicable("runs", {}, f"needs n >= {minimum}", minimum_bits=minimum)
    buf = _buf(seq)
    pi = K.count_ones(buf, 0, n) / n
    tau = 2 / math.sqrt(n)
    # for n <= 16 the bound is vacuous, so a constant input needs its own guard
    if abs(pi - 0.5) >= tau or pi in (0.0, 1.0):
        return TestResult.not_applicable("runs", {}, "frequency prerequisite |pi - 1/2| < 2/sqrt(n) failed",
                                         n=n, pi=pi, tau=tau)
    v_obs = K.count_transitions(buf, n) + 1
    num = abs(v_obs - 2 * n * pi * (1 - pi))
    den = 2 * math.sqrt(2 * n) * pi * (1 - pi)
    p = erfc(num / den)
    return TestResult.make("runs", {}, [("p", p)], {"n": n, "pi": pi, "V_obs": int(v_obs)}, cfg.alpha)


# (min n, M, N, lowest category, highest category, probabilities)
_LONGEST_RUN = (
    (750_000, 10_000, 75, 10, 16, (0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727)),
    (6_272, 128, 49, 4, 9, (0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124)),
    (128, 8, 16, 1, 4, (0.2148, 0.3672, 0.2305, 0.1875)),
)


def longest_run_in_block(seq: BitSequence, cfg: SuiteConfig = _DEFAULT) -> TestResult:
    n = len(seq)
    for min_n, M, N, lo, hi, probs in _LONGEST_RUN:
        if n >= min_n:
            break
    else:
        return TestResult.not_applicable("longest_run", {}, "needs n >= 128", minimum_bits=128)
    params = {"M": M, "N": N}
    nu = K.longest_run_hist(_buf(seq), M, N, lo, hi)
    pi = np.asarray(probs)
    chi2 = float(np.sum((nu - N * pi) ** 2 / (N * pi)))
    k = len(probs) - 1
    p = igamc(k / 2, chi2 / 2)
    return TestResult.make("longest_run", params, [("p", p)],
                           {"n": n, "nu": nu.tolist(), "chi2": chi2}, cfg.alpha)


# -- matrix rank ----------------------------------------------------------


@lru_cache(maxsize=None)
def rank_probabilities(rows: int = 32, cols: int = 32) -> tuple[float, float, float]:
    """P(rank = full), P(rank = full - 1), P(rank <= full - 2) for random GF(2) matrices."""
    def p_rank(r):
        prod = 1.0
        for i in range(r):
            prod *= (1 - 2.0 ** (i - rows)) * (1 - 2.0 ** (i - cols)) / (1 - 2.0 ** (i - r))
        return 2.0 ** (r * (rows + cols - r) - rows * cols) * prod

    full = min(rows, cols)
    p0 = p_rank(full)
    p1 = p_rank(full - 1)
    return p0, p1, 1.0 - p0 - p1


def binary_matrix_rank(seq: BitSequence, cfg: SuiteConfig = _DEFAULT) -> TestResult:
    n = len(seq)
    N = n // 1024
    params = {"M": 32, "Q": 32}
    if N < 38:
        return TestResult.not_applicable("binary_matrix_rank", params, "needs at least 38 matrices",
                                         minimum_bits=38 * 1024, N=N)
    counts = K.rank_counts(_buf(seq), N)
    probs = np.asarray(rank_probabilities())
    chi2 = float(np.sum((counts - N * probs) ** 2 / (N * probs)))
    p = math.exp(-chi2 / 2)  # igamc(1, x/2)
    return TestResult.make("binary_matrix_rank", params, [("p", p)],
                           {"n": n, "N": N, "F_32": int(counts[0]), "F_31": int(counts[1]),
                            "F_rest": int(counts[2]), "chi2": chi2}, cfg.alpha)


# -- spectral -------------------------------------------------------------


def spectral_dft(seq: BitSequence, cfg: SuiteConfig = _DEFAULT) -> TestResult:
    n_total = len(seq)
    minimum = 1000 if cfg.strict else 2
    params = {"cap_bits": cfg.spectral_cap_bits}
    if n_total < minimum:
        return TestResult.not_applicable("spectral_dft", params, f"needs n >= {minimum}",
                                         minimum_bits=minimum)
    n = min(n_total, cfg.spectral_cap_bits)
    n -= n % 2
    buf = _buf(seq)
    if n <= cfg.spectral_incore_bits:
        method = "incore"
        threshold = math.sqrt(math.log(1 / 0.05) * n)
        n1 = count_below_incore(buf, n, threshold)
    else:
        method = "four-step"
        n, f1, f2 = choose_factorization(n)
        threshold = math.sqrt(math.log(1 / 0.05) * n)
        n1 = count_below_outofcore(buf, f1, f2, threshold, workdir=cfg.spectral_workdir,
                                   slab_bytes=cfg.spectral_slab_bytes)
    n0 = 0.95 * n / 2
    d = (n1 - n0) / math.sqrt(n * 0.95 * 0.05 / 4)
    p = erfc(abs(d) / math.sqrt(2))
    return TestResult.make("spectral_dft", params, [("p", p)],
                           {"n": n_total, "analyzed_bits": n, "N1": n1, "N0": n0, "d": d,
                            "method": method}, cfg.alpha)


# -- template matching ----------------------------------------------------


@lru_cache(maxsize=None)
def aperiodic_templates(m: int) -> tuple[str, ...]:
    """All m-bit templates that cannot overlap a shifted copy of themselves."""
    out = []
    for v in range(1 << m):
        s = format(v, f"0{m}b")
        if all(s[k:] != s[: m - k] for k in range(1, m)):
            out.append(s)
    return tuple(out)


def non_overlapping_template(seq: BitSequence, cfg: SuiteConfig = _DEFAULT) -> TestResult:
    n = len(seq)
    m, N = cfg.template_m, cfg.template_blocks
    M = n // N
    params = {"m": m, "N": N, "M": M}
    if M < m:
        return TestResult.not_applicable("non_overlapping_template", params,
                                         "template longer than block", minimum_bits=N * m)
    # strict: at least 5 expected hits per block, the usual chi-square rule
    block_min = 5 * 2**m + m - 1
    if cfg.strict and M < block_min:
        return TestResult.not_applicable("non_overlapping_template", params,
                                         f"needs n >= {N * block_min}", minimum_bits=N * block_min)
    # Aperiodic templates never overlap themselves, so the skip-ahead scan
    # count equals the number of windows equal to the template.
    hist = K.block_window_hist(_buf(seq), M, N, m)
    mu = (M - m + 1) / 2**m
    var = M * (1 / 2**m - (2 * m - 1) / 2 ** (2 * m))
    pvals = []
    chi2s = []
    for tmpl in aperiodic_templates(m):
        w = hist[:, int(tmpl, 2)]
        chi2 = float(np.sum((w - mu) ** 2) / var)
        chi2s.append(chi2)
        pvals.append((tmpl, igamc(N / 2, chi2 / 2)))
    return TestResult.make("non_overlapping_template", params, pvals,
                           {"n": n, "mu": mu, "sigma2": var, "templates": len(pvals)}, cfg.alpha)


@lru_cache(maxsize=None)
def overlapping_probabilities(M: int, m: int, k: int = 5) -> tuple[float, ...]:
    """Exact distribution of overlapping all-ones m-runs hits in M fair bits, capped at k.

    Markov chain over (trailing ones, hits).  For M=1032, m=9 this gives
    0.364091, 0.185659, 0.139381, 0.100571, 0.070432, 0.139865.
    """
    P = np.zeros((m, k + 1))
    P[0, 0] = 1.0
    for _ in range(M):
        Q = np.zeros_like(P)
        Q[0] += 0.5 * P.sum(axis=0)
        Q[1:m] += 0.5 * P[: m - 1]
        # a one after m-1 trailing ones completes a window
        Q[m - 1, 1:] += 0.5 * P[m - 1, :-1]
        Q[m - 1, k] += 0.5 * P[m - 1, k]
        P = Q
    return tuple(P.sum(axis=0))


def overlapping_template(seq: BitSequence, cfg: SuiteConfig = _DEFAULT) -> TestResult:
    n = len(seq)
    m, M = cfg.overlapping_m, cfg.overlapping_block
    N = n // M
    params = {"m": m, "M": M, "K": 5}
    minimum = 1_000_000 if cfg.strict else M
    if n < minimum or M < m:
        return TestResult.not_applicable("overlapping_template", params, f"needs n >= {minimum}",
                                         minimum_bits=minimum)
    nu = K.overlapping_hits_hist(_buf(seq), M, N, m, (1 << m) - 1, 5)
    pi = np.asarray(overlapping_probabilities(M, m, 5))
    chi2 = float(np.sum((nu - N * pi) ** 2 / (N * pi)))
    p = igamc(5 / 2, chi2 / 2)
    return TestResult.make("overlapping_template", params, [("p", p)],
                           {"n": n, "N": N, "nu": nu.tolist(), "chi2": chi2}, cfg.alpha)


# -- Maurer ---------------------------------------------------------------

_UNIVERSAL_THRESHOLDS = (
    (1_059_061_760, 16), (496_435_200, 15), (231_669_760, 14), (107_560_960, 13),
    (49_643_520, 12), (22_753_280, 11), (10_342_400, 10), (4_654_080, 9),
    (2_068_480, 8), (904_960, 7), (387_840, 6),
)
# L: (expected value, variance)
_UNIVERSAL_MOMENTS = {
    1: (0.7326495, 0.690), 2: (1.5374383, 1.338), 3: (2.4016068, 1.901),
    4: (3.3112247, 2.358), 5: (4.2534266, 2.705), 6: (5.2177052, 2.954),
    7: (6.1962507, 3.125), 8: (7.1836656, 3.238), 9: (8.1764248, 3.311),
    10: (9.1723243, 3.356), 11: (10.170032, 3.384), 12: (11.168765, 3.401),
    13: (12.168070, 3.410), 14: (13.167693, 3.416), 15: (14.167488, 3.419),
    16: (15.167379, 3.421),
}


def universal_block_length(n: int) -> int | None:
    for min_n, L in _UNIVERSAL_THRESHOLDS:
        if n >= min_n:
            return L
    return None


def maurers_universal(seq: BitSequence, cfg: SuiteConfig = _DEFAULT) -> TestResult:
    n = len(seq)
    L = cfg.universal_l or universal_block_length(n)
    if L is None:
        return TestResult.not_applicable("maurers_universal", {}, "needs n >= 387840",
                                         minimum_bits=387_840)
    Q = cfg.universal_q or 10 * 2**L
    Kb = n // L - Q
    params = {"L": L, "Q": Q}
    if Kb < 1:
        return TestResult.not_applicable("maurers_universal", params, "no test blocks after initialization",
                                         minimum_bits=(Q + 1) * L)
    fn = K.universal_log_gap_sum(_buf(seq), L, Q, Kb) / Kb
    expected, variance = _UNIVERSAL_MOMENTS[L]
    c = 0.7 - 0.8 / L + (4 + 32 / L) * Kb ** (-3 / L) / 15
    sigma = c * math.sqrt(variance / Kb)
    p = erfc(abs(fn - expected) / (math.sqrt(2) * sigma))
    return TestResult.make("maurers_universal", params, [("p", p)],
                           {"n": n, "K": Kb, "fn": fn, "expected": expected, "sigma": sigma}, cfg.alpha)


# -- linear complexity ----------------------------------------------------

LINEAR_COMPLEXITY_PI = (1 / 96, 1 / 32, 1 / 8, 1 / 2, 1 / 4, 1 / 16, 1 / 48)


def linear_complexity_mean(M: int) -> float:
    return M / 2 + (9 + (-1) ** (M + 1)) / 36 - (M / 3 + 2 / 9) / 2**M


def linear_complexity(seq: BitSequence, cfg: SuiteConfig = _DEFAULT) -> TestResult:
    n = len(seq)
    M = cfg.linear_complexity_m
    N = n // M
    params = {"M": M}
    minimum_blocks = 200 if cfg.strict else 1
    if N < minimum_blocks:
        return TestResult.not_applicable("linear_complexity", params,
                                         f"needs at least {minimum_blocks} blocks",
                                         minimum_bits=minimum_blocks * M, N=N)
    mu = linear_complexity_mean(M)
    sign = -1.0 if M % 2 else 1.0
    nu = K.linear_complexity_hist(_buf(seq), M, N, mu, sign)
    pi = np.asarray(LINEAR_COMPLEXITY_PI)
    chi2 = float(np.sum((nu - N * pi) ** 2 / (N * pi)))
    p = igamc(3, chi2 / 2)
    return TestResult.make("linear_complexity", params, [("p", p)],
                           {"n": n, "N": N, "nu": nu.tolist(), "chi2": chi2}, cfg.alpha)


# -- serial and approximate entropy ---------------------------------------


def _psi2(counts: np.ndarray, n: int) -> float:
    m_bins = counts.size
    return m_bins / n * float(np.sum(counts.astype(np.float64) ** 2)) - n


def _marginalize(counts: np.ndarray) -> np.ndarray:
    return counts.reshape(-1, 2).sum(axis=1)


def serial(seq: BitSequence, cfg: SuiteConfig = _DEFAULT) -> TestResult:
    n = len(seq)
    m = cfg.serial_m
    params = {"m": m}
    minimum = 2 ** (m + 3) if cfg.strict else m
    if n < minimum:
        return TestResult.not_applicable("serial", params, f"needs n >= {minimum}", minimum_bits=minimum)
    cm = K.cyclic_pattern_counts(_buf(seq), n, m)
    cm1 = _marginalize(cm)
    psi_m = _psi2(cm, n)
    psi_m1 = _psi2(cm1, n)
    psi_m2 = _psi2(_marginalize(cm1), n) if m >= 3 else 0.0
    d1 = psi_m - psi_m1
    d2 = psi_m - 2 * psi_m1 + psi_m2
    p1 = igamc(2 ** (m - 2), max(d1, 0.0) / 2)
    p2 = igamc(2 ** (m - 3), max(d2, 0.0) / 2)
    return TestResult.make("serial", params, [("p1", p1), ("p2", p2)],
                           {"n": n, "psi2_m": psi_m, "psi2_m1": psi_m1, "psi2_m2": psi_m2,
                            "del1": d1, "del2": d2}, cfg.alpha)


def _phi(counts: np.ndarray, n: int) -> float:
    c = counts[counts > 0].astype(np.float64)
    return float(np.sum(c / n * np.log(c / n)))


def approximate_entropy(seq: BitSequence, cfg: SuiteConfig = _DEFAULT) -> TestResult:
    n = len(seq)
    m = cfg.apen_m
    params = {"m": m}
    minimum = 2 ** (m + 6) if cfg.strict else m + 1
    if n < minimum:
        return TestResult.not_applicable("approximate_entropy", params, f"needs n >= {minimum}",
                                         minimum_bits=minimum)
    c_next = K.cyclic_pattern_counts(_buf(seq), n, m + 1)
    phi_next = _phi(c_next, n)
    phi_m = _phi(_marginalize(c_next), n)
    apen = phi_m - phi_next
    chi2 = 2 * n * (math.log(2) - apen)
    p = igamc(2 ** (m - 1), max(chi2, 0.0) / 2)
    return TestResult.make("approximate_entropy", params, [("p", p)],
                           {"n": n, "ApEn": apen, "chi2": chi2}, cfg.alpha)


# -- cumulative sums ------------------------------------------------------


def cusum_pvalue(z: int, n: int) -> float:
    sq = math.sqrt(n)
    total = 1.0
    lo = math.floor((-n / z + 1) / 4)
    hi = math.floor((n / z - 1) / 4)
    for k in range(lo, hi + 1):
        total -= normal_cdf((4 * k + 1) * z / sq) - normal_cdf((4 * k - 1) * z / sq)
    lo = math.floor((-n / z - 3) / 4)
    for k in range(lo, hi + 1):
        total += normal_cdf((4 * k + 3) * z / sq) - normal_cdf((4 * k + 1) * z / sq)
    return min(1.0, max(0.0, total))


def cumulative_sums(seq: BitSequence, cfg: SuiteConfig = _DEFAULT) -> TestResult:
    n = len(seq)
    minimum = 100 if cfg.strict else 1
    if n < minimum:
        return TestResult.not_applicable("cumulative_sums", {}, f"needs n >= {minimum}",
                                         minimum_bits=minimum)
    s_n, fmax, fmin, pmax, pmin = K.cusum_extrema(_buf(seq), n)
    z_fwd = max(abs(fmax), abs(fmin))
    z_bwd = max(abs(s_n - pmin), abs(s_n - pmax))
    return TestResult.make("cumulative_sums", {},
                           [("forward", cusum_pvalue(z_fwd, n)), ("backward", cusum_pvalue(z_bwd, n))],
                           {"n": n, "z_forward": int(z_fwd), "z_backward": int(z_bwd)}, cfg.alpha)


# -- random excursions ----------------------------------------------------

EXCURSION_STATES = (-4, -3, -2, -1, 1, 2, 3, 4)
VARIANT_STATES = tuple(x for x in range(-9, 10) if x)


def excursion_probabilities(x: int) -> tuple[float, ...]:
    """P(a cycle visits state x exactly k times), k = 0..4, and k >= 5."""
    a = abs(x)
    q = 1 - 1 / (2 * a)
    probs = [q]
    for k in range(1, 5):
        probs.append(1 / (4 * a * a) * q ** (k - 1))
    probs.append(1 / (2 * a) * q**4)
    return tuple(probs)


def _walk_stats(seq: BitSequence):
    return K.excursion_stats(_buf(seq), len(seq))


def random_excursions(seq: BitSequence, cfg: SuiteConfig = _DEFAULT, _stats=None) -> TestResult:
    J, nu, _ = _stats if _stats is not None else _walk_stats(seq)
    if J < 500:
        return TestResult.not_applicable("random_excursions", {}, "needs J >= 500 cycles", J=int(J))
    pvals = []
    chi2s = {}
    for row, x in enumerate(EXCURSION_STATES):
        pi = np.asarray(excursion_probabilities(x))
        chi2 = float(np.sum((nu[row] - J * pi) ** 2 / (J * pi)))
        chi2s[f"x={x}"] = chi2
        pvals.append((f"x={x}", igamc(2.5, chi2 / 2)))
    return TestResult.make("random_excursions", {}, pvals,
                           {"n": len(seq), "J": int(J), "chi2": chi2s, "nu": nu.tolist()}, cfg.alpha)


def random_excursions_variant(seq: BitSequence, cfg: SuiteConfig = _DEFAULT, _stats=None) -> TestResult:
    J, _, xi = _stats if _stats is not None else _walk_stats(seq)
    if J < 500:
        return TestResult.not_applicable("random_excursions_variant", {}, "needs J >= 500 cycles",
                                         J=int(J))
    pvals = []
    for x in VARIANT_STATES:
        count = int(xi[x + 9])
        pvals.append((f"x={x}", erfc(abs(count - J) / math.sqrt(2 * J * (4 * abs(x) - 2)))))
    return TestResult.make("random_excursions_variant", {}, pvals,
                           {"n": len(seq), "J": int(J), "xi": {f"x={x}": int(xi[x + 9]) for x in VARIANT_STATES}},
                           cfg.alpha)


# -- the battery ----------------------------------------------------------

TEST_ORDER = (
    ("monobit", "Monobit", monobit),
    ("block_frequency", "frequency within block", block_frequency),
    ("runs", "Runs", runs),
    ("longest_run", "Longest runs in a block", longest_run_in_block),
    ("binary_matrix_rank", "binary matrix rank", binary_matrix_rank),
    ("spectral_dft", "Spectral (dft)", spectral_dft),
    ("non_overlapping_template", "non overlapping template matching", non_overlapping_template),
    ("overlapping_template", "overlapping template matching", overlapping_template),
    ("maurers_universal", "maurers universal", maurers_universal),
    ("linear_complexity", "linear complexity", linear_complexity),
    ("serial", "Serial", serial),
    ("approximate_entropy", "Approximate entropy", approximate_entropy),
    ("cumulative_sums", "cumulative sums", cumulative_sums),
    ("random_excursions", "random excursion", random_excursions),
    ("random_excursions_variant", "random excursion variant", random_excursions_variant),
)
TEST_NAMES = tuple(name for name, _, _ in TEST_ORDER)
TEST_FUNCS = {name: fn for name, _, fn in TEST_ORDER}


def row_labels() -> list[str]:
    """The 39 report row labels in order."""
    rows = []
    for name, label, _ in TEST_ORDER:
        if name == "random_excursions":
            rows += [f"{label} x = {x}" for x in EXCURSION_STATES]
        elif name == "random_excursions_variant":
            rows += [f"{label} x = {x}" for x in VARIANT_STATES]
        else:
            rows.append(label)
    return rows


def table_rows(results: list[TestResult], alpha: float = 0.01) -> list[tuple[str, list[float], str]]:
    """Expand per-test results into (row label, p-values, verdict) rows, in canonical order.

    For the excursion tests each state is its own row with its own verdict.
    """
    by_name = {r.test_name: r for r in results}
    rows = []
    for name, label, _ in TEST_ORDER:
        r = by_name.get(name)
        if name in ("random_excursions", "random_excursions_variant"):
            states = EXCURSION_STATES if name == "random_excursions" else VARIANT_STATES
            pmap = {p.label: float(p.value) for p in r.p_values} if r is not None else {}
            for x in states:
                key = f"x={x}"
                if key in pmap:
                    v = pmap[key]
                    rows.append((f"{label} x = {x}", [v], RANDOM if v >= alpha else NON_RANDOM))
                else:
                    rows.append((f"{label} x = {x}", [], NOT_APPLICABLE))
        elif r is None:
            rows.append((label, [], NOT_APPLICABLE))
        else:
            rows.append((label, r.headline, r.verdict))
    return rows


@dataclass
class SuiteReport:
    results: list
    config: SuiteConfig
    dataset_id: str = ""

    @property
    def verdict(self) -> str:
        applicable = [r for r in self.results if r.applicable]
        if not applicable:
            return NOT_APPLICABLE
        return NON_RANDOM if any(r.verdict == NON_RANDOM for r in applicable) else RANDOM

    @property
    def any_not_applicable(self) -> bool:
        return any(not r.applicable for r in self.results)

    @property
    def failed_tests(self) -> list[str]:
        return [r.test_name for r in self.results if r.verdict == NON_RANDOM]

    def labeled_p_values(self) -> list[tuple[str, list[float]]]:
        return [(label, ps) for label, ps, _ in table_rows(self.results, self.config.alpha)]

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "config": self.config.to_dict(semantic_only=True),
            "tests": [r.to_dict() for r in self.results],
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SuiteReport":
        return cls([TestResult.from_dict(t) for t in d["tests"]],
                   SuiteConfig.from_dict(d["config"]), d.get("dataset_id", ""))


def run_test(name: str, seq: BitSequence, cfg: SuiteConfig = _DEFAULT) -> TestResult:
    return TEST_FUNCS[name](seq, cfg)


def run_all(seq: BitSequence, cfg: SuiteConfig = _DEFAULT, jobs: int = 1,
            dataset_id: str = "", tests=None) -> SuiteReport:
    """Run the battery (or the named subset) in canonical row order."""
    names = [n for n in TEST_NAMES if tests is None or n in tests]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda name: run_test(name, seq, cfg), names))
    else:
        results = []
        for name in names:
            log.info("running %s on %d bits", name, len(seq))
            results.append(run_test(name, seq, cfg))
    return SuiteReport(results, cfg, dataset_id)
