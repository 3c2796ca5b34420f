"""Jitted hot loop for windowed min-sum message passing.

One kernel call runs all iterations of a single window stage.  Edge arrays
are CSR-grouped by check node; ``edge_vn`` entries >= n_vn address the
boundary slots of the ``inputs`` vector, whose values are injected as
constant messages instead of being updated.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def window_forward(
    n_vn,
    cn_ptr,
    edge_vn,
    cn_slot,
    weights,
    damping,
    use_damping,
    active,
    iters,
    clip,
    inputs,
    decisions,
):
    E = edge_vn.size
    n_cn = cn_ptr.size - 1
    c2v = np.zeros(E)
    m_vc = np.empty(E)
    sums = np.empty(n_vn)

    for l in range(iters):
        for v in range(n_vn):
            sums[v] = 0.0
        for e in range(E):
            v = edge_vn[e]
            if v < n_vn:
                sums[v] += c2v[e]
        for e in range(E):
            v = edge_vn[e]
            if v < n_vn:
                x = inputs[v] + sums[v] - c2v[e]
                if x > clip:
                    x = clip
                elif x < -clip:
                    x = -clip
                m_vc[e] = x
            else:
                m_vc[e] = inputs[v]

        for c in range(n_cn):
            slot = cn_slot[c]
            if not active[l, slot]:
                continue  # re-emit previous outputs unchanged
            s = cn_ptr[c]
            t = cn_ptr[c + 1]
            w = weights[l, slot]
            min1 = np.inf
            min2 = np.inf
            amin = -1
            neg = 0
            for e in range(s, t):
                a = abs(m_vc[e])
                if a < min1:
                    min2 = min1
                    min1 = a
                    amin = e
                elif a < min2:
                    min2 = a
                if m_vc[e] < 0.0:
                    neg += 1
            if use_damping:
                g = damping[l, slot]
                for e in range(s, t):
                    mag = min2 if e == amin else min1
                    odd = (neg - (1 if m_vc[e] < 0.0 else 0)) & 1
                    out = w * (-mag if odd else mag)
                    out = g * c2v[e] + (1.0 - g) * out
                    if out > clip:
                        out = clip
                    elif out < -clip:
                        out = -clip
                    c2v[e] = out
            else:
                for e in range(s, t):
                    mag = min2 if e == amin else min1
                    odd = (neg - (1 if m_vc[e] < 0.0 else 0)) & 1
                    out = w * (-mag if odd else mag)
                    if out > clip:
                        out = clip
                    elif out < -clip:
                        out = -clip
                    c2v[e] = out

    for v in range(n_vn):
        decisions[v] = inputs[v]
    for e in range(E):
        v = edge_vn[e]
        if v < n_vn:
            decisions[v] += c2v[e]
    for v in range(n_vn):
        if decisions[v] > clip:
            decisions[v] = clip
        elif decisions[v] < -clip:
            decisions[v] = -clip
