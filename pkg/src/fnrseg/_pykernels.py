"""Pure-Python reference versions of the hot kernels.

Every function here has a compiled twin in ``_kernels.pyx`` with the same
signature and bit-identical results. ``_backend`` picks one at import.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK64


def _next(s):
    # s is a list of four Python ints, updated in place
    result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
    t = (s[1] << 17) & MASK64
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


def _load(state):
    return [int(v) for v in state]


def _store(state, s):
    state[:] = np.array(s, dtype=np.uint64)


def xoshiro_fill_u64(state, out):
    s = _load(state)
    for i in range(out.shape[0]):
        out[i] = _next(s)
    _store(state, s)


def xoshiro_fill_uniform(state, out):
    s = _load(state)
    scale = 1.0 / 9007199254740992.0
    for i in range(out.shape[0]):
        out[i] = (_next(s) >> 11) * scale
    _store(state, s)


def _bounded(s, bound):
    # unbiased draw from [0, bound) by rejection on the low tail
    threshold = ((1 << 64) - bound) % bound
    while True:
        r = _next(s)
        if r >= threshold:
            return r % bound


def xoshiro_permutation(state, n):
    s = _load(state)
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = _bounded(s, i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    _store(state, s)
    return np.array(perm, dtype=np.int64)


def count_at_least(values, cut):
    n = 0
    for v in values:
        if v >= cut:
            n += 1
    return n


def bisect_critical(lesion, epsilon, delta):
    m = lesion.shape[0]
    t_min, t_max = 0.0, 1.0
    iterations = 0
    while t_max - t_min > delta:
        t = 0.5 * (t_min + t_max)
        loss = 1.0 - count_at_least(lesion, 1.0 - t) / m
        if loss > epsilon:
            t_min = t
        else:
            t_max = t
        iterations += 1
    return t_max, iterations
