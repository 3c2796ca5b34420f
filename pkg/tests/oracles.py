"""Independent slow reference implementations used to check the library.

Everything here is dict-and-loop based and written directly from the
message update definitions, deliberately sharing no code with the
package's vectorized/jitted paths.
"""

import numpy as np


def min_sum_window(cw, channel, boundary, weights, iters, clip, damping=None, active=None):
    """Textbook flooding min-sum over one compiled window's edge lists.

    Returns the decision LLRs.  ``weights``/``damping``/``active`` are
    (iters, n_slots) arrays addressed through each CN's slot.
    """
    E = cw.edge_vn.size
    cn_edges = {c: list(range(cw.cn_ptr[c], cw.cn_ptr[c + 1])) for c in range(cw.n_cn)}
    vn_edges = {}
    for e in range(E):
        v = int(cw.edge_vn[e])
        if v < cw.n_vn:
            vn_edges.setdefault(v, []).append(e)
    inputs = np.concatenate([channel, boundary]) if boundary is not None else np.asarray(channel)

    c2v = {e: 0.0 for e in range(E)}
    for l in range(iters):
        mvc = {}
        for e in range(E):
            v = int(cw.edge_vn[e])
            if v >= cw.n_vn:
                mvc[e] = inputs[v]
            else:
                s = inputs[v] + sum(c2v[f] for f in vn_edges[v] if f != e)
                mvc[e] = min(max(s, -clip), clip)
        new = {}
        for c in range(cw.n_cn):
            slot = int(cw.cn_slot[c])
            if active is not None and not active[l, slot]:
                for e in cn_edges[c]:
                    new[e] = c2v[e]
                continue
            w = weights[l, slot]
            for e in cn_edges[c]:
                others = [f for f in cn_edges[c] if f != e]
                sgn = 1.0
                for f in others:
                    sgn *= 1.0 if mvc[f] >= 0 else -1.0
                mag = min(abs(mvc[f]) for f in others) if others else np.inf
                out = w * sgn * mag
                if damping is not None:
                    out = damping[l, slot] * c2v[e] + (1.0 - damping[l, slot]) * out
                new[e] = min(max(out, -clip), clip)
        c2v = new

    dec = np.empty(cw.n_vn)
    for v in range(cw.n_vn):
        dec[v] = inputs[v] + sum(c2v[f] for f in vn_edges.get(v, []))
    return np.clip(dec, -clip, clip)


def count_walks(view, config):
    """Brute-force enumeration of target-reach walks in the unrolled trellis.

    A walk starting at CN c at iteration l exits to any neighbor VN other
    than its entry VN (with multiplicity); from a VN it may enter any of
    the VN's CNs, including the one it came from.  At the last iteration
    a CN scores its target VN neighbors directly.
    """
    base = view.graph.base
    n_c, n_v, w = base.n_c, base.n_v, base.w
    vps = list(view.vn_positions)
    cps = list(view.cn_positions)
    iters = config.max_iters

    cn_nbrs = {}
    vn_nbrs = {}
    for qc, p_cn in enumerate(cps):
        for ci in range(n_c):
            c = qc * n_c + ci
            cn_nbrs[c] = []
            for qv, p_vn in enumerate(vps):
                i = p_cn - p_vn
                if 0 <= i <= w:
                    for vj in range(n_v):
                        m = int(base.components.matrices[i][ci, vj])
                        if m:
                            cn_nbrs[c].append((qv * n_v + vj, m))
    for c, nbrs in cn_nbrs.items():
        for v, m in nbrs:
            vn_nbrs.setdefault(v, []).append((c, m))

    targets = set(range(config.T * n_v))

    def walks_from_cn(c, entry_v, l):
        if l == iters:
            return sum(m for v, m in cn_nbrs[c] if v in targets and v != entry_v)
        total = 0
        for v, m in cn_nbrs[c]:
            if v == entry_v:
                continue
            for c2, m2 in vn_nbrs[v]:
                total += m * m2 * walks_from_cn(c2, v, l + 1)
        return total

    N = np.zeros((iters, config.W * n_c), dtype=np.int64)
    for c in cn_nbrs:
        for li in range(iters):
            l = li + 1
            if l == iters:
                N[li, c] = sum(m for v, m in cn_nbrs[c] if v in targets)
            else:
                total = 0
                for v, m in cn_nbrs[c]:
                    for c2, m2 in vn_nbrs[v]:
                        total += m * m2 * walks_from_cn(c2, v, l + 1)
                N[li, c] = total
    return N


def block_parities(graph, bits, t):
    """Parities of the CN block at position t, by direct edge iteration."""
    lo = (t - 1) * graph.N_c
    par = np.zeros(graph.N_c, dtype=np.int64)
    for cn, vn in zip(graph.edge_cn, graph.edge_vn):
        if lo <= cn < lo + graph.N_c:
            par[cn - lo] ^= int(bits[vn]) & 1
    return par
