"""Slow pure-Python Harris construction used as an independent oracle for the compiled engine."""
import math

import numpy as np


def reference_run(opinions, F, L, ring, rates, rng, n_events):
    """Replay ``n_events`` arrows drawn from ``rng`` in the engine's consumption order.

    Returns final opinions and a list of ``(time, site, level, direction, active)``.
    """
    op = [int(v) for v in opinions]
    t = -math.log1p(-rng.random()) / (L * F)
    events = []
    for _ in range(n_events):
        u_pick, u_dir, u_mark, u_wait = (float(v) for v in rng.random(4))
        k = min(int(u_pick * L * F), L * F - 1)
        x, i = divmod(k, F)
        B = 1 if u_dir < 0.5 else -1
        y = x + B
        active = False
        if ring:
            y %= L
        if 0 <= y < L:
            j = bin(op[x] ^ op[y]).count("1")
            if (op[x] ^ op[y]) >> i & 1 and 1.0 - u_mark <= rates[j]:
                op[y] ^= 1 << i
                active = True
        events.append((t, x, i, B, active))
        t -= math.log1p(-u_wait) / (L * F)
    return np.array(op, dtype=np.uint64), events
