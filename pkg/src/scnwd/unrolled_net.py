"""Iteration-unrolled view of one window: forward, exact reverse mode,
target pruning, and target-reach path counting.

The unrolled graph has one input node per (in-window or boundary) VN, one
VN-to-CN and one CN-to-VN message node per edge and iteration, and one
decision node per in-window VN.  Its forward pass reproduces the window
decoder exactly, including clipping, so gradients from the recorded tape
are exact subgradients of the decoder output:

* VN sums distribute gradients unchanged,
* the CN minimum routes all gradient to the recorded argmin input (to the
  second minimum for the argmin edge itself), scaled by the weight and the
  sign product; sign factors carry zero derivative,
* d/d(weight) is the unweighted CN output, d/d(damping) the difference
  between previous and new output, and saturated clips pass zero gradient.

Pruning marks every node and edge with no directed path to a target
decision node; a weight slot survives while at least one of its CN-to-VN
message nodes is unpruned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .code_graph import WindowView
from .decoder import CompiledWindow, ConfigurationError, DecoderConfig, WeightSet, ScheduleMask, compile_window


@dataclass
class UnrolledGraph:
    """Compiled unrolled window plus (optional) pruning masks."""

    cw: CompiledWindow
    config: DecoderConfig
    with_boundary: bool
    # gather/scatter helpers over the CN-sorted edge arrays
    inw: np.ndarray  # bool per edge: endpoint is an in-window VN
    vsort: np.ndarray  # in-window edges sorted by VN
    v_ptr: np.ndarray
    bsort: np.ndarray  # boundary edges sorted by boundary slot
    b_ptr: np.ndarray
    edge_slot: np.ndarray
    slot_sort: np.ndarray
    slot_ptr: np.ndarray
    empty_slots: np.ndarray  # bool per slot: no edge references it
    # pruning state
    pruned: bool = False
    target_count: int = 0
    slot_mask: Optional[np.ndarray] = None  # (iters, n_slots) True = surviving
    live_cv: Optional[np.ndarray] = None  # (iters, E)
    live_vc: Optional[np.ndarray] = None
    live_input: Optional[np.ndarray] = None
    live_decision: Optional[np.ndarray] = None

    @property
    def n_edges(self) -> int:
        return self.cw.edge_vn.size

    @property
    def n_inputs(self) -> int:
        return self.cw.n_vn + self.cw.n_bnd

    @property
    def n_outputs(self) -> int:
        return self.cw.n_vn

    @property
    def hidden_layers(self) -> int:
        return 2 * self.config.max_iters

    @property
    def total_slots(self) -> int:
        return self.config.max_iters * self.cw.n_slots

    @property
    def surviving_slots(self) -> int:
        if self.slot_mask is None:
            return self.total_slots
        return int(self.slot_mask.sum())

    @property
    def pruned_slots(self) -> int:
        return self.total_slots - self.surviving_slots

    def slot_bitmap(self) -> str:
        """Diagnostic grid of surviving slots, one line per iteration."""
        mask = self.slot_mask if self.slot_mask is not None else np.ones(
            (self.config.max_iters, self.cw.n_slots), dtype=bool
        )
        return "\n".join("".join("#" if x else "." for x in row) for row in mask) + "\n"


def unroll(view: WindowView, config: DecoderConfig, with_boundary: bool = False) -> UnrolledGraph:
    """Unroll the window at ``view`` into a differentiable message graph."""
    cw = compile_window(view.graph, view.t, view.W)
    if with_boundary != (cw.n_bnd > 0):
        raise ConfigurationError(
            f"with_boundary={with_boundary} but stage t={view.t} has {cw.n_bnd} boundary VNs"
        )
    E = cw.edge_vn.size
    inw = cw.edge_vn < cw.n_vn

    inw_idx = np.where(inw)[0]
    vsort = inw_idx[np.argsort(cw.edge_vn[inw_idx], kind="stable")]
    v_ptr = np.searchsorted(cw.edge_vn[vsort], np.arange(cw.n_vn + 1))

    bnd_idx = np.where(~inw)[0]
    bsort = bnd_idx[np.argsort(cw.edge_vn[bnd_idx], kind="stable")]
    b_ptr = np.searchsorted(cw.edge_vn[bsort] - cw.n_vn, np.arange(cw.n_bnd + 1))

    edge_slot = cw.cn_slot[cw.edge_cn]
    slot_sort = np.argsort(edge_slot, kind="stable")
    slot_ptr = np.searchsorted(edge_slot[slot_sort], np.arange(cw.n_slots + 1))
    empty_slots = np.diff(slot_ptr) == 0

    return UnrolledGraph(
        cw=cw,
        config=config,
        with_boundary=with_boundary,
        inw=inw,
        vsort=vsort,
        v_ptr=v_ptr.astype(np.int64),
        bsort=bsort,
        b_ptr=b_ptr.astype(np.int64),
        edge_slot=edge_slot,
        slot_sort=slot_sort,
        slot_ptr=slot_ptr.astype(np.int64),
        empty_slots=empty_slots,
    )


def prune_to_targets(g: UnrolledGraph, T: Optional[int] = None) -> UnrolledGraph:
    """Mark every node/edge copy with no directed path to a target decision.

    Liveness is propagated backwards from the decision nodes of the VNs at
    the first T window positions, honoring the per-edge extrinsic
    exclusions of the message updates.  Returns a new graph carrying the
    masks; the surviving-slot count is ``result.surviving_slots``.
    """
    T = g.config.T if T is None else T
    if not 1 <= T <= g.cw.W:
        raise ConfigurationError(f"target size {T} outside 1..W={g.cw.W}")
    cw = g.cw
    E = g.n_edges
    iters = g.config.max_iters
    n_target = T * cw.target_count

    targets = np.zeros(cw.n_vn, dtype=bool)
    targets[:n_target] = True

    live_cv = np.zeros((iters, E), dtype=bool)
    live_vc = np.zeros((iters, E), dtype=bool)

    vn_ext = np.concatenate([np.arange(cw.n_vn), np.full(cw.n_bnd, cw.n_vn)])
    edge_v = vn_ext[cw.edge_vn]  # boundary edges all mapped to a dummy slot

    def vc_from_cv(cv_row):
        cnt = np.add.reduceat(cv_row.astype(np.int64), cw.cn_ptr[:-1])
        return (cnt[cw.edge_cn] - cv_row) > 0

    def cv_from_vc(vc_row):
        inw_vc = vc_row & g.inw
        cnt = np.bincount(edge_v, weights=inw_vc.astype(np.float64), minlength=cw.n_vn + 1)
        return (cnt[edge_v] - inw_vc) > 0.5

    live_cv[iters - 1] = targets[np.minimum(cw.edge_vn, cw.n_vn - 1)] & g.inw
    live_vc[iters - 1] = vc_from_cv(live_cv[iters - 1])
    for l in range(iters - 2, -1, -1):
        live_cv[l] = cv_from_vc(live_vc[l + 1])
        live_vc[l] = vc_from_cv(live_cv[l])

    slot_mask = np.zeros((iters, cw.n_slots), dtype=bool)
    for l in range(iters):
        hit = np.bincount(g.edge_slot[live_cv[l]], minlength=cw.n_slots) > 0
        slot_mask[l] = hit

    any_vc = live_vc.any(axis=0)
    live_input = np.zeros(cw.n_vn + cw.n_bnd, dtype=bool)
    np.logical_or.at(live_input, cw.edge_vn, any_vc)
    live_input[:cw.n_vn] |= targets

    return UnrolledGraph(
        cw=cw,
        config=g.config,
        with_boundary=g.with_boundary,
        inw=g.inw,
        vsort=g.vsort,
        v_ptr=g.v_ptr,
        bsort=g.bsort,
        b_ptr=g.b_ptr,
        edge_slot=g.edge_slot,
        slot_sort=g.slot_sort,
        slot_ptr=g.slot_ptr,
        empty_slots=g.empty_slots,
        pruned=True,
        target_count=n_target,
        slot_mask=slot_mask,
        live_cv=live_cv,
        live_vc=live_vc,
        live_input=live_input,
        live_decision=targets,
    )


@dataclass
class Tape:
    """Recorded forward values sufficient for exact reverse mode."""

    graph: UnrolledGraph
    weights_snapshot: np.ndarray
    damping_snapshot: Optional[np.ndarray]
    active: np.ndarray
    channel: np.ndarray
    boundary: Optional[np.ndarray]
    decisions: np.ndarray
    dec_pass: np.ndarray
    steps: list = field(default_factory=list)
    consumed: bool = False

    @property
    def batch(self) -> int:
        return self.channel.shape[0]


@dataclass
class GradientSet:
    """Loss gradients matching the weight-set layout (zero at pruned slots)."""

    cn_weights: np.ndarray
    damping_raw: Optional[np.ndarray]
    d_channel: np.ndarray
    d_boundary: Optional[np.ndarray]


def _slot_sum(g: UnrolledGraph, per_edge: np.ndarray) -> np.ndarray:
    out = np.add.reduceat(per_edge[g.slot_sort], g.slot_ptr[:-1])
    out[g.empty_slots] = 0.0
    return out


def forward(
    g: UnrolledGraph,
    weights: WeightSet,
    channel_llrs: np.ndarray,
    boundary_llrs: Optional[np.ndarray] = None,
    schedule: Optional[ScheduleMask] = None,
):
    """Evaluate the unrolled window; returns (decisions, tape).

    Accepts a single sample (1-D arrays) or a batch (2-D, sample-major).
    Matches the window decoder bit-for-bit up to summation order.
    """
    cw = g.cw
    cfg = g.config
    clip = cfg.llr_clip
    iters = cfg.max_iters
    if weights.cn_weights.shape != (iters, cw.n_slots):
        raise ConfigurationError(
            f"weight set shape {weights.cn_weights.shape} does not match "
            f"({iters}, {cw.n_slots})"
        )

    ch = np.atleast_2d(np.asarray(channel_llrs, dtype=np.float64))
    single = np.asarray(channel_llrs).ndim == 1
    B = ch.shape[0]
    if ch.shape[1] != cw.n_vn:
        raise ConfigurationError(f"expected {cw.n_vn} channel LLRs per sample")
    if cw.n_bnd:
        if boundary_llrs is None:
            raise ConfigurationError(f"this window needs {cw.n_bnd} boundary LLRs")
        bnd = np.clip(np.atleast_2d(np.asarray(boundary_llrs, dtype=np.float64)), -clip, clip)
        if bnd.shape != (B, cw.n_bnd):
            raise ConfigurationError(f"expected boundary shape ({B}, {cw.n_bnd})")
    else:
        bnd = None

    active = (
        schedule.active.astype(bool)
        if schedule is not None
        else np.ones((iters, cw.n_slots), dtype=bool)
    )

    E = g.n_edges
    rows = np.arange(B)[:, None]
    edge_ids = np.arange(E)
    damping = weights.damping

    c2v = np.zeros((B, E))
    steps = []
    for l in range(iters):
        sums = np.add.reduceat(c2v[:, g.vsort], g.v_ptr[:-1], axis=1)
        tot = ch + sums
        tot_ext = tot if bnd is None else np.concatenate([tot, bnd], axis=1)
        pre = tot_ext[:, cw.edge_vn] - np.where(g.inw, c2v, 0.0)
        m_vc = np.where(g.inw, np.clip(pre, -clip, clip), pre)
        mvc_pass = np.abs(pre) < clip

        absm = np.abs(m_vc)
        negb = m_vc < 0.0
        min1 = np.minimum.reduceat(absm, cw.cn_ptr[:-1], axis=1)
        cand = np.where(absm == min1[:, cw.edge_cn], edge_ids, E)
        amin = np.minimum.reduceat(cand, cw.cn_ptr[:-1], axis=1)
        absm2 = absm.copy()
        absm2[rows, amin] = np.inf
        min2 = np.minimum.reduceat(absm2, cw.cn_ptr[:-1], axis=1)
        cand2 = np.where(absm2 == min2[:, cw.edge_cn], edge_ids, E)
        amin2 = np.minimum.reduceat(cand2, cw.cn_ptr[:-1], axis=1)
        amin2 = np.minimum(amin2, E - 1)  # degree-1 guard; unused when min2 is inf

        negpar = np.add.reduceat(negb.astype(np.int16), cw.cn_ptr[:-1], axis=1) & 1
        odd = (negpar[:, cw.edge_cn] != 0) ^ negb
        mag = min1[:, cw.edge_cn].copy()
        mag[rows, amin] = min2
        raw = np.where(odd, -mag, mag)

        w_e = weights.cn_weights[l][g.edge_slot]
        weighted = raw * w_e
        if damping is not None:
            gam_e = damping[l][g.edge_slot]
            mix = gam_e * c2v + (1.0 - gam_e) * weighted
        else:
            mix = weighted
        out = np.clip(mix, -clip, clip)
        out_pass = np.abs(mix) < clip
        act_e = active[l][g.edge_slot]
        c2v_new = np.where(act_e, out, c2v)

        steps.append(
            dict(
                m_vc=m_vc,
                mvc_pass=mvc_pass,
                raw=raw,
                amin=amin,
                amin2=amin2,
                min2=min2,
                out_pass=out_pass,
                c2v_prev=c2v,
                c2v=c2v_new,
            )
        )
        c2v = c2v_new

    sums = np.add.reduceat(c2v[:, g.vsort], g.v_ptr[:-1], axis=1)
    dpre = ch + sums
    decisions = np.clip(dpre, -clip, clip)
    dec_pass = np.abs(dpre) < clip

    tape = Tape(
        graph=g,
        weights_snapshot=weights.cn_weights.copy(),
        damping_snapshot=None if damping is None else damping.copy(),
        active=active,
        channel=ch,
        boundary=bnd,
        decisions=decisions,
        dec_pass=dec_pass,
        steps=steps,
    )
    return (decisions[0] if single else decisions), tape


def backward(tape: Tape, upstream: np.ndarray) -> GradientSet:
    """Exact reverse-mode gradients from a recorded forward tape.

    ``upstream`` is d(loss)/d(decisions), shaped like the forward
    decisions.  Raises if the tape was already consumed or if the weight
    arrays changed since the forward pass.
    """
    if tape.consumed:
        raise ConfigurationError("tape already consumed; rerun forward")
    g = tape.graph
    cw = g.cw
    cfg = g.config
    iters = cfg.max_iters
    B = tape.batch
    E = g.n_edges
    rows = np.arange(B)[:, None]

    w_all = tape.weights_snapshot
    gam_all = tape.damping_snapshot

    up = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    if up.shape != (B, cw.n_vn):
        raise ConfigurationError(f"upstream shape {up.shape} does not match ({B}, {cw.n_vn})")

    g_dec = up * tape.dec_pass
    g_dec_ext = np.concatenate([g_dec, np.zeros((B, cw.n_bnd))], axis=1)
    g_c2v = np.where(g.inw, g_dec_ext[:, cw.edge_vn], 0.0)
    g_ch = g_dec.copy()
    g_bnd = np.zeros((B, cw.n_bnd)) if cw.n_bnd else None

    g_w = np.zeros((iters, cw.n_slots))
    g_gam = np.zeros((iters, cw.n_slots)) if gam_all is not None else None

    for l in range(iters - 1, -1, -1):
        st = tape.steps[l]
        act_e = tape.active[l][g.edge_slot]
        w_e = w_all[l][g.edge_slot]

        g_out = np.where(act_e, g_c2v, 0.0)
        g_prev = np.where(act_e, 0.0, g_c2v)
        g_mix = g_out * st["out_pass"]

        if gam_all is not None:
            gam_e = gam_all[l][g.edge_slot]
            weighted = st["raw"] * w_e
            g_gam[l] = _slot_sum(g, (g_mix * (st["c2v_prev"] - weighted)).sum(axis=0))
            g_weighted = g_mix * (1.0 - gam_e)
            g_prev = g_prev + g_mix * gam_e
        else:
            g_weighted = g_mix

        g_w[l] = _slot_sum(g, (g_weighted * st["raw"]).sum(axis=0))
        g_raw = g_weighted * w_e

        # min routing: every output edge sends its gradient to the argmin
        # input, except the argmin output which reads the second minimum
        m_vc = st["m_vc"]
        negb = m_vc < 0.0
        negpar = np.add.reduceat(negb.astype(np.int16), cw.cn_ptr[:-1], axis=1) & 1
        odd = (negpar[:, cw.edge_cn] != 0) ^ negb
        t_e = np.where(odd, -g_raw, g_raw)
        T1 = np.add.reduceat(t_e, cw.cn_ptr[:-1], axis=1)
        amin = st["amin"]
        amin2 = st["amin2"]
        t_amin = t_e[rows, amin]
        s1 = np.where(m_vc[rows, amin] < 0.0, -1.0, 1.0)
        s2 = np.where(m_vc[rows, amin2] < 0.0, -1.0, 1.0)
        valid2 = np.isfinite(st["min2"])
        g_mvc = np.zeros((B, E))
        g_mvc[rows, amin] += (T1 - t_amin) * s1
        g_mvc[rows, amin2] += np.where(valid2, t_amin * s2, 0.0)

        if g_bnd is not None:
            g_bnd += np.add.reduceat(g_mvc[:, g.bsort], g.b_ptr[:-1], axis=1)
        g_pre = np.where(g.inw, g_mvc * st["mvc_pass"], 0.0)
        gs_v = np.add.reduceat(g_pre[:, g.vsort], g.v_ptr[:-1], axis=1)
        g_ch += gs_v
        gs_ext = np.concatenate([gs_v, np.zeros((B, cw.n_bnd))], axis=1)
        g_prev_vn = np.where(g.inw, gs_ext[:, cw.edge_vn] - g_pre, 0.0)
        g_c2v = g_prev + g_prev_vn

    damping_raw = None
    if gam_all is not None:
        damping_raw = g_gam * gam_all * (1.0 - gam_all)

    if g.slot_mask is not None:
        g_w = g_w * g.slot_mask
        if damping_raw is not None:
            damping_raw = damping_raw * g.slot_mask

    tape.consumed = True
    return GradientSet(
        cn_weights=g_w,
        damping_raw=damping_raw,
        d_channel=g_ch,
        d_boundary=g_bnd,
    )


def reach_counts(view: WindowView, config: DecoderConfig) -> np.ndarray:
    """Walks from each CN slot at each iteration to final target decisions.

    Computed on the protograph of the window.  A walk leaves a CN toward
    any neighbor VN other than the one it entered from (with multiplicity)
    and may continue from a VN to any of its CNs; at the last iteration it
    scores the CN's target neighbors.  Returns an array of shape
    (max_iters, W * n_c).
    """
    graph = view.graph
    base = graph.base
    n_c, n_v, w = base.n_c, base.n_v, base.w
    iters = config.max_iters
    t = view.t

    vps = list(view.vn_positions)
    cps = list(view.cn_positions)
    n_pv = len(vps) * n_v
    pu, pc, pm = [], [], []
    for qc, p_cn in enumerate(cps):
        for ci in range(n_c):
            for qv, p_vn in enumerate(vps):
                i = p_cn - p_vn
                if 0 <= i <= w:
                    comp = base.components.matrices[i]
                    for vj in range(n_v):
                        m = int(comp[ci, vj])
                        if m:
                            pu.append(qv * n_v + vj)
                            pc.append(qc * n_c + ci)
                            pm.append(m)
    n_pc = len(cps) * n_c
    n_pairs = len(pu)

    target = [0] * n_pv
    for v in range(config.T * n_v):
        target[v] = 1

    # exact integer DP: counts grow geometrically with the iteration depth
    N = [[0] * (config.W * n_c) for _ in range(iters)]

    # last iteration: CN outputs feed target decisions directly
    agg_t = [0] * n_pc
    for p in range(n_pairs):
        agg_t[pc[p]] += pm[p] * target[pu[p]]
    N[iters - 1][:n_pc] = agg_t

    # reach of each directed proto pair (v -> c) at the last iteration
    reach = [agg_t[pc[p]] - pm[p] * target[pu[p]] for p in range(n_pairs)]
    for l in range(iters - 2, -1, -1):
        agg = [0] * n_pv
        for p in range(n_pairs):
            agg[pu[p]] += pm[p] * reach[p]
        cn_tot = [0] * n_pc
        for p in range(n_pairs):
            cn_tot[pc[p]] += pm[p] * agg[pu[p]]
        N[l][:n_pc] = cn_tot
        reach = [cn_tot[pc[p]] - pm[p] * agg[pu[p]] for p in range(n_pairs)]
    huge = max(max(row) for row in N) >= 2**62
    return np.array(N, dtype=object if huge else np.int64)


@dataclass
class NormalizedCounts:
    """Per-iteration normalized reach counts; all-zero rows are flagged."""

    values: np.ndarray
    zero_rows: np.ndarray


def normalize_counts(N: np.ndarray) -> NormalizedCounts:
    """Scale each iteration row of reach counts to sum to one."""
    N = np.asarray(N, dtype=np.float64)
    sums = N.sum(axis=1, keepdims=True)
    zero_rows = sums[:, 0] == 0
    safe = np.where(sums == 0, 1.0, sums)
    return NormalizedCounts(values=N / safe, zero_rows=zero_rows)
