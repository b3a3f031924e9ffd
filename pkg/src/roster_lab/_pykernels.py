"""Pure-Python/numpy fallback for the numeric core.

Arithmetic order mirrors ``_ckernels.pyx`` exactly (integer powers by repeated
multiplication, left-to-right sums) so both backends agree bit for bit.
"""
import numpy as np


def _power(x, beta):
    ib = int(beta)
    if ib == beta and 0 <= ib <= 16:
        out = np.ones_like(x)
        for _ in range(ib):
            out = out * x
        return out
    return np.power(x, beta)


def bpr(tff, cap, flow, lam, beta):
    """Per-edge BPR travel times."""
    x = np.asarray(flow, dtype=np.float64) / cap
    return tff * (1.0 + lam * _power(x, beta))


def route_table(tff, cap, flow, lam, beta, ptr, idx):
    """Route travel times, congestion with one extra vehicle per route, and base congestion.

    ``ptr``/``idx`` are CSR-style: route ``r`` covers ``idx[ptr[r]:ptr[r+1]]``.
    """
    flow = np.asarray(flow, dtype=np.float64)
    t0 = bpr(tff, cap, flow, lam, beta)
    t1 = bpr(tff, cap, flow + 1.0, lam, beta)
    base = 0.0
    for v in t0.tolist():
        base += v
    n = len(ptr) - 1
    times = np.empty(n)
    with_driver = np.empty(n)
    t0l = t0.tolist()
    t1l = t1.tolist()
    for r in range(n):
        s = 0.0
        d = 0.0
        for k in range(ptr[r], ptr[r + 1]):
            e = idx[k]
            s += t0l[e]
            d += t1l[e] - t0l[e]
        times[r] = s
        with_driver[r] = base + d
    return times, with_driver, base


def sample_block(lo, hi, g, uniforms, pos):
    """Draw ``min(g, hi - lo)`` distinct indices from ``[lo, hi)`` by partial Fisher-Yates.

    Consumes one uniform per draw starting at ``uniforms[pos]``. Returns the
    sorted indices and the next read position.
    """
    n = hi - lo
    if g >= n:
        return list(range(lo, hi)), pos
    pool = list(range(n))
    for i in range(g):
        j = i + int(uniforms[pos + i] * (n - i))
        if j >= n:
            j = n - 1
        pool[i], pool[j] = pool[j], pool[i]
    chosen = sorted(pool[:g])
    return [lo + c for c in chosen], pos + g


def sampled_summary(costs, finals, lo, hi, g, uniforms, pos):
    """Mean and argmin of ``costs`` over a without-replacement sample of ``[lo, hi)``.

    Ties in the argmin go to the lowest final route, then the lowest outcome index.
    Returns ``(mean, best_outcome, next_pos)``.
    """
    picked, pos = sample_block(lo, hi, g, uniforms, pos)
    total = 0.0
    best = -1
    best_cost = 0.0
    for o in picked:
        c = float(costs[o])
        total += c
        if best < 0 or c < best_cost or (c == best_cost and finals[o] < finals[best]):
            best = o
            best_cost = c
    return total / len(picked), best, pos
