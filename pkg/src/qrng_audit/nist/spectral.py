"""Counting small DFT moduli of very long ±1 sequences.

The spectral test needs only ``#{f < n/2 : |S_f| < T}``.  Below
``incore_bits`` that is a plain real FFT.  Above it we use the four-step
decomposition n = n1*n2 with the intermediate array spilled to a scratch
file, so resident memory is bounded by ``slab_bytes`` rather than n:

1. column FFTs of length n1 over byte-aligned column slabs of the input,
   multiplied by the twiddles exp(-2πi j2 k1 / n), written slab by slab;
2. row FFTs of length n2 over blocks of rows; output index k = k1 + n1*k2
   is counted against the threshold and discarded.
"""

from __future__ import annotations

import logging
import math
import os
import tempfile

import numpy as np
import scipy.fft

log = logging.getLogger(__name__)

MIN_N2 = 1 << 10
MAX_N1 = 1 << 17


def choose_factorization(n: int) -> tuple[int, int, int]:
    """Return ``(n_used, n1, n2)`` with ``n_used = n1*n2 <= n`` and ``n2 % 8 == 0``.

    Prefers an exact factorization of ``n`` with n2 near sqrt(n); failing
    that, truncates to a multiple of 2**16 (dropping < 65536 bits).
    """
    if n % 8 == 0:
        best = None
        root = math.isqrt(n)
        hi = min(n, 1 << 20)
        for n2 in range(8, hi + 1, 8):
            if n % n2:
                continue
            n1 = n // n2
            if n2 < MIN_N2 or n1 > MAX_N1:
                continue
            score = abs(math.log(n2 / max(root, 1)))
            if best is None or score < best[0]:
                best = (score, n1, n2)
        if best is not None:
            return n, best[1], best[2]
    n2 = 1 << 16
    n_used = (n // n2) * n2
    if n_used == 0:
        raise ValueError(f"n={n} too short for the out-of-core path")
    return n_used, n_used // n2, n2


def _divisor_at_most(n: int, limit: int, multiple: int = 1) -> int:
    best = multiple
    for d in range(multiple, max(limit, multiple) + 1, multiple):
        if n % d == 0:
            best = d
    return best


def count_below_incore(buf: np.ndarray, n: int, threshold: float) -> int:
    x = np.unpackbits(buf[: (n + 7) // 8])[:n].astype(np.float64)
    x *= 2.0
    x -= 1.0
    spec = scipy.fft.rfft(x)
    del x
    mod = np.abs(spec[: n // 2])
    return int(np.count_nonzero(mod < threshold))


def count_below_outofcore(buf: np.ndarray, n1: int, n2: int, threshold: float,
                          workdir: str | None = None, slab_bytes: int = 128 << 20) -> int:
    """Four-step count of ``|S_k| < threshold`` for ``k < n/2``, n = n1*n2."""
    n = n1 * n2
    if n2 % 8:
        raise ValueError("n2 must be a multiple of 8")
    item = 16
    # Column slab width: multiple of 8 dividing n2, bounded by slab_bytes.
    w = _divisor_at_most(n2, max(8, slab_bytes // (item * n1)), multiple=8)
    nslabs = n2 // w
    # Row block height for step 2; the last block may be shorter.
    r = min(n1, max(1, slab_bytes // (item * n2)))
    packed = np.asarray(buf[: n // 8]).reshape(n1, n2 // 8)
    k1 = np.arange(n1, dtype=np.int64)
    # exp(-2πi (c0 + jj) k1 / n) = exp(-2πi c0 k1 / n) * exp(-2πi jj k1 / n)
    local = np.exp((-2j * np.pi / n) * ((k1[:, None] * np.arange(w, dtype=np.int64)[None, :]) % n))
    half = n // 2
    below = 0
    fd, path = tempfile.mkstemp(prefix="spectral-", suffix=".c128", dir=workdir)
    try:
        with os.fdopen(fd, "w+b") as fh:
            for s in range(nslabs):
                c0 = s * w
                cols = np.unpackbits(packed[:, c0 // 8:(c0 + w) // 8], axis=1)
                slab = cols.astype(np.complex128)
                del cols
                slab *= 2.0
                slab -= 1.0
                slab = scipy.fft.fft(slab, axis=0, overwrite_x=True)
                slab *= local
                slab *= np.exp((-2j * np.pi / n) * ((k1 * c0) % n))[:, None]
                fh.write(slab.tobytes())
                del slab
            fh.flush()
            block = np.empty((r, n2), dtype=np.complex128)
            slab_stride = n1 * w * item
            k2 = np.arange(n2, dtype=np.int64)
            for a in range(0, n1, r):
                rr = min(r, n1 - a)
                rows = block[:rr]
                for s in range(nslabs):
                    fh.seek(s * slab_stride + a * w * item)
                    raw = fh.read(rr * w * item)
                    rows[:, s * w:(s + 1) * w] = np.frombuffer(raw, dtype=np.complex128).reshape(rr, w)
                out = scipy.fft.fft(rows, axis=1)
                # k1 + n1*k2 < n/2  <=>  k2 < ceil((n/2 - k1) / n1)
                lim = (half - (a + np.arange(rr, dtype=np.int64)) + n1 - 1) // n1
                valid = k2[None, :] < lim[:, None]
                below += int(np.count_nonzero((np.abs(out) < threshold) & valid))
                del out, valid
    finally:
        if os.path.exists(path):
            os.unlink(path)
    log.debug("out-of-core spectral: n=%d n1=%d n2=%d slabs=%d", n, n1, n2, nslabs)
    return below
