"""Numerical kernels shared by the randomness tests.

``erfc`` and ``igamc`` are the two p-value kernels; ``gf2_rank`` and
``berlekamp_massey`` are the algebraic cores of the matrix-rank and
linear-complexity tests; ``dft_moduli`` feeds the spectral test.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np
import scipy.fft

__all__ = [
    "PValue",
    "berlekamp_massey",
    "dft_moduli",
    "erfc",
    "gf2_rank",
    "gf2_rank_packed",
    "igamc",
    "normal_cdf",
]

_EPS = 1e-16
_TINY = 1e-300


class PValue(float):
    """A float guaranteed to lie in [0, 1].

    Round-off excursions of up to 1e-9 outside the interval are clamped;
    anything else (including NaN) raises ``ValueError``.
    """

    def __new__(cls, value):
        v = float(value)
        if math.isnan(v):
            raise ValueError("p-value is NaN")
        if v < 0.0:
            if v < -1e-9:
                raise ValueError(f"p-value {v} < 0")
            v = 0.0
        elif v > 1.0:
            if v > 1.0 + 1e-9:
                raise ValueError(f"p-value {v} > 1")
            v = 1.0
        return super().__new__(cls, v)


def erfc(x: float) -> float:
    """Complementary error function."""
    return math.erfc(x)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _log_prefactor(a: float, x: float) -> float:
    # log(x^a e^-x / Gamma(a))
    return a * math.log(x) - x - math.lgamma(a)


def _igam_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by its power series."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(100000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    else:
        raise ArithmeticError(f"igam series did not converge for a={a}, x={x}")
    return total * math.exp(_log_prefactor(a, x))


def _igamc_cf(a: float, x: float) -> float:
    """Q(a, x) by the Legendre continued fraction, modified Lentz."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 100000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError(f"igamc continued fraction did not converge for a={a}, x={x}")
    return math.exp(_log_prefactor(a, x)) * h


def igamc(a: float, x: float) -> float:
    """Regularized upper incomplete gamma function Q(a, x).

    Uses the power series for ``x < a + 1`` and the continued fraction
    otherwise, so neither branch has to fight cancellation.

    Raises
    ------
    ValueError
        If ``a <= 0`` or ``x < 0``.
    """
    a = float(a)
    x = float(x)
    if not a > 0.0 or not x >= 0.0 or math.isinf(a):
        raise ValueError(f"igamc domain error: a={a}, x={x}")
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _igam_series(a, x))
    return min(1.0, _igamc_cf(a, x))


# -- GF(2) rank -----------------------------------------------------------


@nb.njit(cache=True, nogil=True)
def _rank_rows(rows, nrows, ncols):
    # rows: uint64 array, bit (ncols-1-j) holds column j; destroyed in place
    rank = 0
    for col in range(ncols - 1, -1, -1):
        bit = np.uint64(1) << np.uint64(col)
        pivot = -1
        for r in range(rank, nrows):
            if rows[r] & bit:
                pivot = r
                break
        if pivot < 0:
            continue
        tmp = rows[pivot]
        rows[pivot] = rows[rank]
        rows[rank] = tmp
        for r in range(rank + 1, nrows):
            if rows[r] & bit:
                rows[r] ^= tmp
        rank += 1
        if rank == nrows:
            break
    return rank


def gf2_rank_packed(rows, ncols: int) -> int:
    """Rank over GF(2) of a matrix whose rows are packed integers (``ncols`` ≤ 64)."""
    if not 0 < ncols <= 64:
        raise ValueError("ncols must be in 1..64")
    arr = np.array([int(r) for r in rows], dtype=np.uint64)
    return int(_rank_rows(arr, arr.size, ncols))


def gf2_rank(matrix) -> int:
    """Rank over GF(2) of a 32×32 0/1 matrix.

    Rows are packed into machine words and reduced by forward elimination.
    """
    m = np.asarray(matrix)
    if m.shape != (32, 32):
        raise ValueError(f"expected a 32x32 matrix, got shape {m.shape}")
    weights = np.uint64(1) << np.arange(31, -1, -1, dtype=np.uint64)
    rows = ((m.astype(np.uint64) & np.uint64(1)) * weights).sum(axis=1, dtype=np.uint64)
    return int(_rank_rows(rows, 32, 32))


# -- Berlekamp-Massey -----------------------------------------------------


@nb.njit(cache=True, nogil=True)
def _bm_bytes(s):
    n = s.size
    c = np.zeros(n + 1, dtype=np.uint8)
    b = np.zeros(n + 1, dtype=np.uint8)
    t = np.zeros(n + 1, dtype=np.uint8)
    c[0] = 1
    b[0] = 1
    L = 0
    m = -1
    for N in range(n):
        d = s[N]
        for i in range(1, L + 1):
            d ^= c[i] & s[N - i]
        if d:
            t[:] = c
            shift = N - m
            for i in range(0, n + 1 - shift):
                c[i + shift] ^= b[i]
            if 2 * L <= N:
                L = N + 1 - L
                m = N
                b[:] = t
    return L


def berlekamp_massey(block) -> int:
    """Length of the shortest LFSR that generates ``block`` (a 0/1 vector)."""
    s = np.asarray(block, dtype=np.uint8).reshape(-1)
    if s.size == 0:
        raise ValueError("berlekamp_massey needs a nonempty block")
    return int(_bm_bytes(s & 1))


# -- DFT ------------------------------------------------------------------


def dft_moduli(x, m: int) -> np.ndarray:
    """Moduli ``|S_f|`` for ``f = 0 .. m-1`` of the DFT of a real vector."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if not 0 <= m <= x.size // 2:
        raise ValueError(f"m={m} out of range for length {x.size}")
    return np.abs(scipy.fft.rfft(x)[:m])
