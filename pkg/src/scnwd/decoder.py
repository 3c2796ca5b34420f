"""Windowed neural min-sum decoding over a lifted coupled chain.

A window stage runs a fixed number of flooding iterations: the VN update
adds channel LLRs and extrinsic CN messages, the CN update applies the
sign-and-minimum rule scaled by a trainable per-slot weight, optionally
followed by a convex damping mix with the previous output.  Already
decoded VNs behind the window inject their frozen decision LLRs as
constant messages.  Weight and schedule slots are shared protograph- and
CN-wise: slot = (window position offset) * n_c + proto CN row, and there
are W * n_c slots per iteration.

Chain decoding repeats the stage L times, committing the decision LLRs of
the target position after each stage.  Messages never carry over between
stages.  With a detector configured, a stage flagged as failed switches
the next stage to the breakwater weight set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .code_graph import LiftedTannerGraph, WindowView

ROLE_PLAIN = "plain"
ROLE_BREAKWATER = "breakwater"
ROLE_FIXED = "fixed"
DETECTORS = ("none", "ucn", "genie")


class ConfigurationError(ValueError):
    """Dimension or option mismatch between decoder inputs."""


@dataclass(frozen=True)
class DecoderConfig:
    """Window size, target size, iteration budget and message clip."""

    W: int
    max_iters: int
    T: int = 1
    llr_clip: float = 64.0

    def __post_init__(self):
        if not 1 <= self.T <= self.W:
            raise ConfigurationError(f"target size T={self.T} must satisfy 1 <= T <= W={self.W}")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if self.llr_clip <= 0:
            raise ConfigurationError("llr_clip must be positive")


@dataclass
class WeightSet:
    """Per-iteration, per-proto-CN-slot multiplicative weights.

    ``cn_weights`` has shape (max_iters, W * n_c); ``damping`` is either
    None or an array of the same shape with entries in [0, 1].  A set with
    role "fixed" carries one shared value and no damping.
    """

    cn_weights: np.ndarray
    W: int
    n_c: int
    damping: Optional[np.ndarray] = None
    role: str = ROLE_PLAIN
    code_id: str = ""
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.cn_weights = np.ascontiguousarray(self.cn_weights, dtype=np.float64)
        if self.cn_weights.ndim != 2 or self.cn_weights.shape[1] != self.W * self.n_c:
            raise ConfigurationError(
                f"cn_weights shape {self.cn_weights.shape} does not match W*n_c={self.W * self.n_c}"
            )
        if self.damping is not None:
            self.damping = np.ascontiguousarray(self.damping, dtype=np.float64)
            if self.damping.shape != self.cn_weights.shape:
                raise ConfigurationError("damping shape must match cn_weights")
            if ((self.damping < 0) | (self.damping > 1)).any():
                raise ConfigurationError("damping factors must lie in [0, 1]")
        if self.role == ROLE_FIXED:
            if self.damping is not None:
                raise ConfigurationError("a fixed-role weight set cannot carry damping")
            if np.ptp(self.cn_weights) != 0:
                raise ConfigurationError("a fixed-role weight set must share one value")

    @property
    def max_iters(self) -> int:
        return self.cn_weights.shape[0]

    @property
    def n_slots(self) -> int:
        return self.cn_weights.shape[1]

    @classmethod
    def unit(cls, max_iters: int, W: int, n_c: int, **kwargs) -> "WeightSet":
        return cls(np.ones((max_iters, W * n_c)), W, n_c, **kwargs)

    @classmethod
    def fixed(cls, value: float, max_iters: int, W: int, n_c: int, **kwargs) -> "WeightSet":
        kwargs.setdefault("role", ROLE_FIXED)
        return cls(np.full((max_iters, W * n_c), float(value)), W, n_c, **kwargs)

    def copy(self) -> "WeightSet":
        return WeightSet(
            self.cn_weights.copy(),
            self.W,
            self.n_c,
            damping=None if self.damping is None else self.damping.copy(),
            role=self.role,
            code_id=self.code_id,
            provenance=dict(self.provenance),
        )


@dataclass
class ScheduleMask:
    """Boolean activity per (iteration, proto-CN slot) within one stage.

    Inactive slots re-emit their previous outgoing messages.  The slots of
    the window-front position must stay active at iteration 1, otherwise
    they would only ever emit the all-zero initial messages.
    """

    active: np.ndarray
    W: int
    n_c: int

    def __post_init__(self):
        self.active = np.ascontiguousarray(self.active, dtype=np.uint8)
        if self.active.ndim != 2 or self.active.shape[1] != self.W * self.n_c:
            raise ConfigurationError(
                f"schedule shape {self.active.shape} does not match W*n_c={self.W * self.n_c}"
            )
        if not self.active[0, : self.n_c].all():
            raise ConfigurationError("window-front slots must be active at iteration 1")

    @property
    def max_iters(self) -> int:
        return self.active.shape[0]

    @property
    def n_inactive(self) -> int:
        return int(self.active.size - self.active.sum())

    @classmethod
    def full(cls, max_iters: int, W: int, n_c: int) -> "ScheduleMask":
        return cls(np.ones((max_iters, W * n_c), dtype=np.uint8), W, n_c)


@dataclass
class StageResult:
    """Outcome of one window stage (window-local VN order, position-major)."""

    decision_llrs: np.ndarray
    target_bits: np.ndarray
    block_error: bool
    iterations: int


@dataclass
class ChainResult:
    """Outcome of decoding a full chain, stage by stage."""

    stage_errors: np.ndarray
    verdicts: np.ndarray
    roles: list
    frame_error: bool
    decided_bits: np.ndarray
    ep_pairs: int = 0
    ep_errors: int = 0


@dataclass
class CompiledWindow:
    """Edge arrays of one window stage, CSR-grouped by check node."""

    t: int
    W: int
    n_vn: int
    n_bnd: int
    n_cn: int
    cn_ptr: np.ndarray
    edge_vn: np.ndarray
    edge_cn: np.ndarray
    cn_slot: np.ndarray
    vn_global: np.ndarray
    bnd_global: np.ndarray
    target_count: int
    n_slots: int

    @property
    def edge_slot(self) -> np.ndarray:
        return self.cn_slot[self.edge_cn]


def compile_window(graph: LiftedTannerGraph, t: int, W: int) -> CompiledWindow:
    """Build (and cache) the kernel-ready edge structure of stage t."""
    key = (t, W)
    cached = graph._window_cache.get(key)
    if cached is not None:
        return cached

    view = graph.window(t, W)
    N_v, N_c, n_c, z = graph.N_v, graph.N_c, graph.base.n_c, graph.z
    vp, cp, bp = view.vn_positions, view.cn_positions, view.boundary_positions

    lo = (cp.start - 1) * N_c
    hi = (cp.stop - 1) * N_c
    e0 = np.searchsorted(graph.edge_cn, lo)
    e1 = np.searchsorted(graph.edge_cn, hi)
    g_cn = graph.edge_cn[e0:e1]
    g_vn = graph.edge_vn[e0:e1]

    n_vn = len(vp) * N_v
    n_bnd = len(bp) * N_v
    vn_lo = (vp.start - 1) * N_v
    bnd_lo = (bp.start - 1) * N_v if n_bnd else 0

    in_window = g_vn >= vn_lo
    edge_vn = np.where(in_window, g_vn - vn_lo, n_vn + (g_vn - bnd_lo)).astype(np.int32)
    edge_cn_local = (g_cn - lo).astype(np.int64)

    n_cn = len(cp) * N_c
    cn_ptr = np.searchsorted(edge_cn_local, np.arange(n_cn + 1)).astype(np.int64)

    cn_ids = np.arange(n_cn)
    offsets = cn_ids // N_c  # window position offset of each CN
    rows = (cn_ids % N_c) // z  # proto CN row within the position
    cn_slot = (offsets * n_c + rows).astype(np.int32)

    cw = CompiledWindow(
        t=t,
        W=W,
        n_vn=n_vn,
        n_bnd=n_bnd,
        n_cn=n_cn,
        cn_ptr=cn_ptr,
        edge_vn=edge_vn,
        edge_cn=edge_cn_local,
        cn_slot=cn_slot,
        vn_global=view.vn_indices(),
        bnd_global=view.boundary_indices(),
        target_count=N_v,
        n_slots=W * n_c,
    )
    graph._window_cache[key] = cw
    return cw


_EMPTY_DAMPING = np.zeros((1, 1))


def _check_dims(cw: CompiledWindow, weights: WeightSet, schedule: Optional[ScheduleMask], config: DecoderConfig):
    if weights.cn_weights.shape != (config.max_iters, cw.n_slots):
        raise ConfigurationError(
            f"weight set shape {weights.cn_weights.shape} does not match "
            f"(max_iters, W*n_c)=({config.max_iters}, {cw.n_slots})"
        )
    if schedule is not None and schedule.active.shape != (config.max_iters, cw.n_slots):
        raise ConfigurationError(
            f"schedule shape {schedule.active.shape} does not match "
            f"(max_iters, W*n_c)=({config.max_iters}, {cw.n_slots})"
        )


def run_stage(
    cw: CompiledWindow,
    channel_llrs: np.ndarray,
    boundary_llrs: Optional[np.ndarray],
    weights: WeightSet,
    schedule: Optional[ScheduleMask],
    config: DecoderConfig,
) -> np.ndarray:
    """Decode one compiled window; returns the in-window decision LLRs."""
    _check_dims(cw, weights, schedule, config)
    channel_llrs = np.asarray(channel_llrs, dtype=np.float64)
    if channel_llrs.shape != (cw.n_vn,):
        raise ConfigurationError(f"expected {cw.n_vn} channel LLRs, got {channel_llrs.shape}")
    clip = config.llr_clip
    if cw.n_bnd:
        if boundary_llrs is None:
            raise ConfigurationError(f"stage t={cw.t} needs {cw.n_bnd} boundary LLRs")
        boundary_llrs = np.clip(np.asarray(boundary_llrs, dtype=np.float64), -clip, clip)
        if boundary_llrs.shape != (cw.n_bnd,):
            raise ConfigurationError(f"expected {cw.n_bnd} boundary LLRs, got {boundary_llrs.shape}")
        inputs = np.concatenate([channel_llrs, boundary_llrs])
    else:
        inputs = channel_llrs.copy()

    active = (
        schedule.active
        if schedule is not None
        else np.ones((config.max_iters, cw.n_slots), dtype=np.uint8)
    )
    damping = weights.damping
    decisions = np.empty(cw.n_vn)
    _kernels.window_forward(
        cw.n_vn,
        cw.cn_ptr,
        cw.edge_vn,
        cw.cn_slot,
        weights.cn_weights,
        _EMPTY_DAMPING if damping is None else damping,
        damping is not None,
        active,
        config.max_iters,
        clip,
        inputs,
        decisions,
    )
    return decisions


def decode_window(
    view: WindowView,
    channel_llrs: np.ndarray,
    boundary_llrs: Optional[np.ndarray],
    weights: WeightSet,
    schedule: Optional[ScheduleMask],
    config: DecoderConfig,
) -> StageResult:
    """Run one window stage and commit hard decisions for the target block.

    ``channel_llrs`` covers the in-window VNs and ``boundary_llrs`` the
    decoded VNs behind the window (both position-major).  A decision LLR
    of exactly zero counts as a bit error.
    """
    cw = compile_window(view.graph, view.t, view.W)
    decisions = run_stage(cw, channel_llrs, boundary_llrs, weights, schedule, config)
    target = decisions[: cw.target_count]
    bits = (target <= 0).astype(np.uint8)
    return StageResult(
        decision_llrs=decisions,
        target_bits=bits,
        block_error=bool(bits.any()),
        iterations=config.max_iters,
    )


def ucn_detect(graph: LiftedTannerGraph, frozen_bits: np.ndarray, t: int) -> bool:
    """Parity test of the CN block at position t over the decided bits.

    After stage t every neighbor position (t-w .. t) of that block is
    decided, so any unsatisfied check proves at least one bit error.  An
    even-weight error pattern confined to single checks goes undetected.
    """
    if t < 1:
        raise ValueError("ucn_detect needs a finished stage t >= 1")
    ptr, vn = graph.cn_block_adjacency(t)
    sums = np.add.reduceat(frozen_bits[vn].astype(np.int64), ptr[:-1])
    return bool((sums & 1).any())


def genie_detect(graph: LiftedTannerGraph, frozen_bits: np.ndarray, t: int) -> bool:
    """True iff any decided bit of the target block at position t is nonzero."""
    lo = (t - 1) * graph.N_v
    return bool(frozen_bits[lo : lo + graph.N_v].any())


def decode_chain(
    graph: LiftedTannerGraph,
    channel_llrs: np.ndarray,
    plain: WeightSet,
    config: DecoderConfig,
    breakwater: Optional[WeightSet] = None,
    detector: str = "none",
    schedule: Optional[ScheduleMask] = None,
    independent_boundaries: bool = False,
) -> ChainResult:
    """Decode all L stages, freezing the target decisions of each stage.

    Messages restart at every stage; only the frozen decision LLRs carry
    information across stages.  With a detector, a stage following a
    flagged one uses the breakwater weight set.  The last decoded stage's
    verdict is still recorded.  ``independent_boundaries`` replaces frozen
    boundary LLRs by the true (all-zero codeword) LLRs at the clip value,
    removing any coupling between stages.
    """
    if detector not in DETECTORS:
        raise ConfigurationError(f"unknown detector {detector!r}")
    if breakwater is not None and detector == "none":
        raise ConfigurationError("a breakwater weight set requires an error detector")

    channel_llrs = np.asarray(channel_llrs, dtype=np.float64)
    if channel_llrs.shape != (graph.n_vn_total,):
        raise ConfigurationError(
            f"expected {graph.n_vn_total} channel LLRs, got {channel_llrs.shape}"
        )

    L = graph.L
    clip = config.llr_clip
    frozen_dec = np.zeros(graph.n_vn_total)
    frozen_bits = np.zeros(graph.n_vn_total, dtype=np.uint8)
    stage_errors = np.zeros(L, dtype=bool)
    verdicts = np.zeros(L, dtype=bool)
    roles = []

    for t in range(1, L + 1):
        cw = compile_window(graph, t, config.W)
        ch = channel_llrs[cw.vn_global]
        if cw.n_bnd:
            bnd = np.full(cw.n_bnd, clip) if independent_boundaries else frozen_dec[cw.bnd_global]
        else:
            bnd = None
        use_bw = breakwater is not None and t >= 2 and verdicts[t - 2]
        wset = breakwater if use_bw else plain
        roles.append(ROLE_BREAKWATER if use_bw else wset.role)

        decisions = run_stage(cw, ch, bnd, wset, schedule, config)
        target = decisions[: cw.target_count]
        bits = (target <= 0).astype(np.uint8)
        lo = (t - 1) * graph.N_v
        frozen_dec[lo : lo + graph.N_v] = target
        frozen_bits[lo : lo + graph.N_v] = bits
        stage_errors[t - 1] = bool(bits.any())

        if detector == "ucn":
            verdicts[t - 1] = ucn_detect(graph, frozen_bits, t)
        elif detector == "genie":
            verdicts[t - 1] = genie_detect(graph, frozen_bits, t)

    ep_pairs = int(stage_errors[:-1].sum())
    ep_errors = int((stage_errors[:-1] & stage_errors[1:]).sum())
    return ChainResult(
        stage_errors=stage_errors,
        verdicts=verdicts,
        roles=roles,
        frame_error=bool(stage_errors.any()),
        decided_bits=frozen_bits,
        ep_pairs=ep_pairs,
        ep_errors=ep_errors,
    )
