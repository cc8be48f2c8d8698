"""Compiled single-pass kernels over MSB-first packed bit buffers.

Every kernel takes the packed ``uint8`` buffer and an explicit bit count
and keeps only fixed-size counters, so memory does not grow with n.
"""

import math

import numba as nb
import numpy as np

from ..stats import _rank_rows

POP8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)

_jit = nb.njit(cache=True, nogil=True)


@nb.njit(cache=True, nogil=True, inline="always")
def _bit(buf, i):
    return (buf[i >> 3] >> (7 - (i & 7))) & 1


@_jit
def count_ones(buf, start, stop):
    total = 0
    i = start
    while i < stop and (i & 7):
        total += _bit(buf, i)
        i += 1
    while i + 8 <= stop:
        total += POP8[buf[i >> 3]]
        i += 8
    while i < stop:
        total += _bit(buf, i)
        i += 1
    return total


@_jit
def block_deviation_sumsq(buf, M, N):
    """Sum over N blocks of (2*ones - M)^2."""
    acc = 0.0
    for j in range(N):
        d = 2 * count_ones(buf, j * M, (j + 1) * M) - M
        acc += float(d) * float(d)
    return acc


@_jit
def count_transitions(buf, n):
    trans = 0
    prev = -1
    nfull = n >> 3
    for j in range(nfull):
        x = np.int64(buf[j])
        trans += POP8[(x ^ (x >> 1)) & 0x7F]
        if prev >= 0 and prev != (x >> 7):
            trans += 1
        prev = x & 1
    for i in range(nfull * 8, n):
        b = _bit(buf, i)
        if prev >= 0 and b != prev:
            trans += 1
        prev = b
    return trans


@_jit
def longest_run_hist(buf, M, N, lo, hi):
    hist = np.zeros(hi - lo + 1, dtype=np.int64)
    for j in range(N):
        run = 0
        best = 0
        for i in range(j * M, (j + 1) * M):
            if _bit(buf, i):
                run += 1
                if run > best:
                    best = run
            else:
                run = 0
        if best < lo:
            best = lo
        if best > hi:
            best = hi
        hist[best - lo] += 1
    return hist


@_jit
def rank_counts(buf, N):
    """Tally 32x32 matrix ranks into (32, 31, <=30); matrix k = bytes [128k, 128k+128)."""
    counts = np.zeros(3, dtype=np.int64)
    rows = np.empty(32, dtype=np.uint64)
    for k in range(N):
        base = 128 * k
        for r in range(32):
            o = base + 4 * r
            rows[r] = (
                (np.uint64(buf[o]) << np.uint64(24))
                | (np.uint64(buf[o + 1]) << np.uint64(16))
                | (np.uint64(buf[o + 2]) << np.uint64(8))
                | np.uint64(buf[o + 3])
            )
        rank = _rank_rows(rows, 32, 32)
        if rank == 32:
            counts[0] += 1
        elif rank == 31:
            counts[1] += 1
        else:
            counts[2] += 1
    return counts


@_jit
def block_window_hist(buf, M, N, m):
    """Per-block histogram of every m-bit window lying wholly inside the block."""
    mask = (1 << m) - 1
    hist = np.zeros((N, 1 << m), dtype=np.int64)
    for j in range(N):
        w = 0
        base = j * M
        for i in range(M):
            w = ((w << 1) | _bit(buf, base + i)) & mask
            if i >= m - 1:
                hist[j, w] += 1
    return hist


@_jit
def overlapping_hits_hist(buf, M, N, m, target, K):
    """Histogram over blocks of overlapping template hits, capped at K."""
    mask = (1 << m) - 1
    hist = np.zeros(K + 1, dtype=np.int64)
    for j in range(N):
        w = 0
        hits = 0
        base = j * M
        for i in range(M):
            w = ((w << 1) | _bit(buf, base + i)) & mask
            if i >= m - 1 and w == target:
                hits += 1
        if hits > K:
            hits = K
        hist[hits] += 1
    return hist


@_jit
def universal_log_gap_sum(buf, L, Q, K):
    table = np.zeros(1 << L, dtype=np.int64)
    pos = 0
    for i in range(1, Q + 1):
        w = 0
        for _ in range(L):
            w = (w << 1) | _bit(buf, pos)
            pos += 1
        table[w] = i
    acc = 0.0
    for i in range(Q + 1, Q + K + 1):
        w = 0
        for _ in range(L):
            w = (w << 1) | _bit(buf, pos)
            pos += 1
        acc += math.log2(i - table[w])
        table[w] = i
    return acc


@nb.njit(cache=True, nogil=True, inline="always")
def _parity64(x):
    x ^= x >> np.uint64(32)
    x ^= x >> np.uint64(16)
    x ^= x >> np.uint64(8)
    x ^= x >> np.uint64(4)
    x ^= x >> np.uint64(2)
    x ^= x >> np.uint64(1)
    return x & np.uint64(1)


@_jit
def _bm_packed(buf, start, M, rev, C, B, tmp):
    """Linear complexity of bits [start, start+M) with word-parallel Berlekamp-Massey.

    ``rev`` receives the block bit-reversed (bit p = s[M-1-p]) so the
    discrepancy at step N is the parity of C AND rev shifted by M-1-N.
    """
    W = C.size
    for q in range(rev.size):
        rev[q] = 0
    for q in range(W):
        C[q] = 0
        B[q] = 0
    for p in range(M):
        if _bit(buf, start + M - 1 - p):
            rev[p >> 6] |= np.uint64(1) << np.uint64(p & 63)
    C[0] = 1
    B[0] = 1
    nwc = 1
    nwb = 1
    L = 0
    m = -1
    for N in range(M):
        off = M - 1 - N
        ow = off >> 6
        sb = off & 63
        acc = np.uint64(0)
        for q in range((L >> 6) + 1):
            if sb:
                win = (rev[ow + q] >> np.uint64(sb)) | (rev[ow + q + 1] << np.uint64(64 - sb))
            else:
                win = rev[ow + q]
            acc ^= C[q] & win
        if _parity64(acc) == 0:
            continue
        for q in range(nwc):
            tmp[q] = C[q]
        nwt = nwc
        sh = N - m
        sw = sh >> 6
        sbits = sh & 63
        for q in range(nwb):
            if q + sw < W:
                C[q + sw] ^= B[q] << np.uint64(sbits)
            if sbits and q + sw + 1 < W:
                C[q + sw + 1] ^= B[q] >> np.uint64(64 - sbits)
        top = nwb + sw + 1
        if top > W:
            top = W
        if top > nwc:
            nwc = top
        if 2 * L <= N:
            L = N + 1 - L
            m = N
            for q in range(nwt):
                B[q] = tmp[q]
            for q in range(nwt, nwb):
                B[q] = 0
            nwb = nwt
    return L


@_jit
def linear_complexity_block(buf, start, M):
    W = M // 64 + 3
    rev = np.zeros(W + 2, dtype=np.uint64)
    C = np.zeros(W, dtype=np.uint64)
    B = np.zeros(W, dtype=np.uint64)
    tmp = np.zeros(W, dtype=np.uint64)
    return _bm_packed(buf, start, M, rev, C, B, tmp)


@_jit
def linear_complexity_hist(buf, M, N, mu, sign):
    W = M // 64 + 3
    rev = np.zeros(W + 2, dtype=np.uint64)
    C = np.zeros(W, dtype=np.uint64)
    B = np.zeros(W, dtype=np.uint64)
    tmp = np.zeros(W, dtype=np.uint64)
    nu = np.zeros(7, dtype=np.int64)
    for k in range(N):
        L = _bm_packed(buf, k * M, M, rev, C, B, tmp)
        t = sign * (L - mu) + 2.0 / 9.0
        if t <= -2.5:
            nu[0] += 1
        elif t <= -1.5:
            nu[1] += 1
        elif t <= -0.5:
            nu[2] += 1
        elif t <= 0.5:
            nu[3] += 1
        elif t <= 1.5:
            nu[4] += 1
        elif t <= 2.5:
            nu[5] += 1
        else:
            nu[6] += 1
    return nu


@_jit
def cyclic_pattern_counts(buf, n, m):
    """Counts of all m-bit windows of the sequence read cyclically (n windows)."""
    counts = np.zeros(1 << m, dtype=np.int64)
    mask = (1 << m) - 1
    w = 0
    for k in range(n + m - 1):
        i = k if k < n else k - n
        w = ((w << 1) | _bit(buf, i)) & mask
        if k >= m - 1:
            counts[w] += 1
    return counts


@_jit
def cusum_extrema(buf, n):
    """Return (S_n, max S_k, min S_k for k=1..n, max S_j, min S_j for j=0..n-1)."""
    s = 0
    fmax = -n - 1
    fmin = n + 1
    pmax = 0
    pmin = 0
    for i in range(n):
        if i > 0:
            if s > pmax:
                pmax = s
            if s < pmin:
                pmin = s
        s += 2 * _bit(buf, i) - 1
        if s > fmax:
            fmax = s
        if s < fmin:
            fmin = s
    return s, fmax, fmin, pmax, pmin


@_jit
def excursion_stats(buf, n):
    """Cycle count J, per-cycle visit histogram for x=-4..-1,1..4 (capped at 5),
    and total visits for x=-9..-1,1..9."""
    nu = np.zeros((8, 6), dtype=np.int64)
    xi = np.zeros(19, dtype=np.int64)
    visits = np.zeros(9, dtype=np.int64)
    s = 0
    J = 0
    for i in range(n):
        s += 2 * _bit(buf, i) - 1
        if s == 0:
            J += 1
            for x in range(9):
                if x != 4:
                    v = visits[x]
                    if v > 5:
                        v = 5
                    nu[x if x < 4 else x - 1, v] += 1
                visits[x] = 0
        else:
            if -9 <= s <= 9:
                xi[s + 9] += 1
                if -4 <= s <= 4:
                    visits[s + 4] += 1
    if s != 0:
        J += 1
        for x in range(9):
            if x != 4:
                v = visits[x]
                if v > 5:
                    v = 5
                nu[x if x < 4 else x - 1, v] += 1
    return J, nu, xi
