"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Integer outputs match exactly. ``permuted_statistics`` draws the same
permutation streams and accumulates in the same order, so its floats match
the compiled path bit for bit as well.
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S32 = (np.uint64(s) for s in (30, 27, 31, 32))


def mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def outcome_counts(failures, mask):
    n, k = failures.shape
    if k > 64:
        raise ValueError("outcome_counts supports at most 64 deployments")
    m = mask.astype(bool)
    f = failures.astype(bool) & m
    fail_counts = f.sum(axis=0, dtype=np.int64)
    counts = m.sum(axis=0, dtype=np.int64)
    seen = m.any(axis=1)
    n_systemic = int(np.count_nonzero(seen & ~(m & ~f).any(axis=1)))
    weights = np.left_shift(np.uint64(1), np.arange(k, dtype=np.uint64))
    codes = (m.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)
    return fail_counts, counts, n_systemic, codes


def group_counts(failures, mask, codes, n_groups):
    n, k = failures.shape
    m = mask.astype(bool)
    f = failures.astype(bool) & m
    fail_counts = np.zeros((n_groups, k), dtype=np.int64)
    counts = np.zeros((n_groups, k), dtype=np.int64)
    for i in range(k):
        col = codes[:, i]
        counts[:, i] = np.bincount(col[m[:, i]], minlength=n_groups)
        fail_counts[:, i] = np.bincount(col[f[:, i]], minlength=n_groups)
    return fail_counts, counts


def permuted_statistics(x, y, seed, start, stop, chunk=2048):
    n = x.shape[0]
    base = mix64(np.uint64(seed))
    out = np.empty(stop - start, dtype=np.float64)
    with np.errstate(over="ignore"):
        for lo in range(start, stop, chunk):
            hi = min(lo + chunk, stop)
            p = np.arange(lo, hi, dtype=np.uint64)
            state = mix64(base + (p + np.uint64(1)) * GOLDEN)
            perms = np.tile(np.arange(n, dtype=np.intp), (hi - lo, 1))
            rows = np.arange(hi - lo)
            for i in range(n - 1, 0, -1):
                state = state + GOLDEN
                z = mix64(state)
                j = (((z >> _S32) * np.uint64(i + 1)) >> _S32).astype(np.intp)
                tmp = perms[rows, j]
                perms[rows, j] = perms[:, i]
                perms[:, i] = tmp
            acc = np.zeros(hi - lo, dtype=np.float64)
            for i in range(n):
                acc = acc + x[i] * y[perms[:, i]]
            out[lo - start:hi - start] = acc
    return out
