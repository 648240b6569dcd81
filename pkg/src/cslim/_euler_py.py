"""Pure-Python Euler stepper; the fallback for the compiled ``_euler`` module."""
from __future__ import annotations

import math


def euler_chunk(drift, noise, x, xi, step0, rec_start, rec_every, out, limit):
    """Advance ``x`` in place through ``len(xi)`` Euler steps.

    Step ``g`` uses phase ``(g - rec_start) mod P``. States reached at
    ``g + 1 - rec_start = k * rec_every`` (``k >= 0``) are written to
    ``out[k]``. Returns the 1-based step count at which ``|x|`` first
    exceeded ``limit``, or -1.
    """
    P, n = drift.shape[0], drift.shape[1]
    D = drift.tolist()
    S = noise.tolist()
    cur = x.tolist()
    rng = range(n)
    for i, z in enumerate(xi.tolist()):
        g = step0 + i
        p = (g - rec_start) % P
        Dp, Sp = D[p], S[p]
        y = []
        for r in rng:
            acc = cur[r]
            row = Dp[r]
            for c in rng:
                acc = acc + row[c] * cur[c]
            row = Sp[r]
            for c in rng:
                acc = acc + row[c] * z[c]
            y.append(acc)
        cur = y
        for v in y:
            if not math.fabs(v) <= limit:
                x[:] = cur
                return g + 1
        k = g + 1 - rec_start
        if k >= 0 and k % rec_every == 0:
            out[k // rec_every] = y
    x[:] = cur
    return -1
