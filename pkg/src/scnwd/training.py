"""Losses, sample collection and the stage/validation training loops.

Mini-batches are collected actively: only channel draws that the current
decoder fails to decode enter a batch, so every SNR point contributes the
same hard-loss mass.  Stage scores normalize each point's validation loss
by the untrained decoder's loss at that point, preventing low-SNR points
from dominating decoder selection.

The differentiable surrogate for the block-error indicator is
1 - prod(sigmoid(beta * m_v)) over the target decisions; the hard
indicator is kept for collection and validation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import expit

from .channel import ChannelParams, llr_matrix, stream
from .code_graph import LiftedTannerGraph
from .decoder import (
    ConfigurationError,
    DecoderConfig,
    ROLE_BREAKWATER,
    ROLE_PLAIN,
    WeightSet,
    compile_window,
    run_stage,
)
from .unrolled_net import UnrolledGraph, backward, forward, prune_to_targets, unroll

# substream purposes
_S_BASELINE = 1
_S_COLLECT = 2
_S_VALIDATE = 3
_S_EP = 4


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainingConfig:
    """Knobs of the stage/validation loop (defaults match the usual setup)."""

    snr_points: tuple = (1.2, 1.4, 1.6, 1.8, 2.0)
    errors_per_point: int = 20
    sessions_per_stage: int = 10
    stages: int = 1000
    validation_samples_per_point: int = 10000
    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    beta: float = 1.0
    l1_coeff: float = 0.1
    seed: int = 0
    acceptance_floor: float = 1e-6
    chunk: int = 64

    def __post_init__(self):
        if self.errors_per_point < 1:
            raise ConfigurationError("errors_per_point must be >= 1")
        if self.stages < 0:
            raise ConfigurationError("stages must be >= 0")


@dataclass
class StageRecord:
    stage: int
    point_losses: tuple
    norm_loss: float
    is_best: bool


@dataclass
class TrainResult:
    weights: WeightSet
    records: list
    baselines: tuple


def hard_bler_loss(decisions, n_target: int):
    """1 if any of the first n_target decisions is <= 0, else 0."""
    d = np.asarray(decisions)
    if d.ndim == 1:
        return int((d[:n_target] <= 0).any())
    return (d[:, :n_target] <= 0).any(axis=1).astype(np.int64)


def soft_bler_loss(decisions, n_target: int, beta: float = 1.0):
    """1 - prod(sigmoid(beta * m)) over the target decisions.

    Strictly decreasing in every target decision LLR; evaluated in log
    space so large batches of confident decisions do not underflow.
    """
    if beta <= 0:
        raise ConfigurationError("beta must be positive")
    d = np.atleast_2d(np.asarray(decisions, dtype=np.float64))
    log_prod = -np.logaddexp(0.0, -beta * d[:, :n_target]).sum(axis=1)
    loss = -np.expm1(log_prod)
    return float(loss[0]) if np.asarray(decisions).ndim == 1 else loss


def soft_bler_grad(decisions, n_target: int, beta: float = 1.0) -> np.ndarray:
    """d(soft loss)/d(decisions); zero outside the target block."""
    d = np.atleast_2d(np.asarray(decisions, dtype=np.float64))
    tgt = d[:, :n_target]
    log_prod = -np.logaddexp(0.0, -beta * tgt).sum(axis=1, keepdims=True)
    g = np.zeros_like(d)
    g[:, :n_target] = -np.exp(log_prod) * beta * expit(-beta * tgt)
    return g if np.asarray(decisions).ndim > 1 else g[0]


def normalized_loss(sums, baselines) -> float:
    """Sum of per-point losses, each divided by the untrained baseline.

    Points with a zero baseline carry no signal and are excluded (with a
    warning); all-zero baselines are an error.
    """
    sums = np.asarray(sums, dtype=np.float64)
    baselines = np.asarray(baselines, dtype=np.float64)
    if sums.shape != baselines.shape:
        raise ConfigurationError("per-point sums and baselines must align")
    ok = baselines > 0
    if not ok.any():
        raise TrainingError("all baselines are zero; nothing to normalize")
    if not ok.all():
        warnings.warn(f"excluding {int((~ok).sum())} zero-baseline points", stacklevel=2)
    return float((sums[ok] / baselines[ok]).sum())


class Adam:
    """Adaptive-moment SGD over a dict of named parameter arrays."""

    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict):
        self.t += 1
        for k, p in self.params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            mhat = self.m[k] / (1 - self.beta1**self.t)
            vhat = self.v[k] / (1 - self.beta2**self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def collect_error_samples(
    graph: LiftedTannerGraph,
    weights: WeightSet,
    config: DecoderConfig,
    ebno_db: float,
    count: int,
    seed: int,
    path: tuple = (),
    acceptance_floor: float = 1e-6,
    chunk: int = 64,
) -> tuple:
    """Draw first-window channel vectors until `count` decoding failures.

    Returns (samples, acceptance_rate).  Aborts with a diagnostic when the
    failure rate falls below ``acceptance_floor`` (the operating point is
    too good for active collection).
    """
    cw = compile_window(graph, 1, config.W)
    n_target = config.T * graph.N_v
    params = ChannelParams(ebno_db, graph.base.design_rate)
    samples = np.empty((count, cw.n_vn))
    got = 0
    fails = 0
    draws = 0
    max_draws = max(count, 1) / acceptance_floor
    chunk_idx = 0
    while got < count:
        rng = stream(seed, _S_COLLECT, *path, chunk_idx)
        llrs = llr_matrix((chunk, cw.n_vn), params, rng)
        for i in range(chunk):
            dec = run_stage(cw, llrs[i], None, weights, None, config)
            if (dec[:n_target] <= 0).any():
                fails += 1
                if got < count:
                    samples[got] = llrs[i]
                    got += 1
        draws += chunk
        chunk_idx += 1
        if got < count and draws >= max_draws:
            raise TrainingError(
                f"collection at {ebno_db} dB accepted {got}/{count} after {draws} draws; "
                f"acceptance below floor {acceptance_floor}"
            )
    return samples, fails / draws


def _validate_point(graph, weights, config, ebno_db, n_samples, seed, path, chunk=256):
    cw = compile_window(graph, 1, config.W)
    n_target = config.T * graph.N_v
    params = ChannelParams(ebno_db, graph.base.design_rate)
    errors = 0
    done = 0
    chunk_idx = 0
    while done < n_samples:
        todo = min(chunk, n_samples - done)
        rng = stream(seed, _S_VALIDATE, *path, chunk_idx)
        llrs = llr_matrix((todo, cw.n_vn), params, rng)
        for i in range(todo):
            dec = run_stage(cw, llrs[i], None, weights, None, config)
            if (dec[:n_target] <= 0).any():
                errors += 1
        done += todo
        chunk_idx += 1
    return errors


def _validate(graph, weights, config, tcfg: TrainingConfig, stage: int):
    return tuple(
        _validate_point(
            graph,
            weights,
            config,
            s,
            tcfg.validation_samples_per_point,
            tcfg.seed,
            (stage, i),
        )
        for i, s in enumerate(tcfg.snr_points)
    )


def _train_loop(
    graph: LiftedTannerGraph,
    tcfg: TrainingConfig,
    dcfg: DecoderConfig,
    damped: bool,
) -> TrainResult:
    net = prune_to_targets(unroll(graph.window(1, dcfg.W), dcfg), dcfg.T)
    n_c = graph.base.n_c
    n_target = dcfg.T * graph.N_v
    code_id = f"dv-dc base {graph.base.components.block_base.tolist()} w={graph.w} L={graph.L} z={graph.z} lift-seed={graph.seed}"

    w_arr = np.ones((dcfg.max_iters, dcfg.W * n_c))
    params = {"w": w_arr}
    raw = None
    if damped:
        raw = np.zeros_like(w_arr)  # damping = sigmoid(raw) = 0.5
        params["raw"] = raw
    adam = Adam(params, lr=tcfg.step_size, beta1=tcfg.beta1, beta2=tcfg.beta2, eps=tcfg.eps)

    def current_weights() -> WeightSet:
        return WeightSet(
            w_arr.copy(),
            dcfg.W,
            n_c,
            damping=expit(raw) if damped else None,
            role=ROLE_PLAIN,
            code_id=code_id,
        )

    baselines = _validate(graph, current_weights(), dcfg, tcfg, 0)
    records = []
    best_norm = np.inf
    best = current_weights()

    for k in range(1, tcfg.stages + 1):
        for step in range(tcfg.sessions_per_stage):
            parts = []
            for i, s in enumerate(tcfg.snr_points):
                smp, _rate = collect_error_samples(
                    graph,
                    current_weights(),
                    dcfg,
                    s,
                    tcfg.errors_per_point,
                    tcfg.seed,
                    path=(k, step, i),
                    acceptance_floor=tcfg.acceptance_floor,
                    chunk=tcfg.chunk,
                )
                parts.append(smp)
            batch = np.concatenate(parts, axis=0)
            B = batch.shape[0]
            dec, tape = forward(net, current_weights(), batch)
            upstream = soft_bler_grad(dec, n_target, tcfg.beta) / B
            grads = backward(tape, upstream)
            gdict = {"w": grads.cn_weights}
            if damped:
                gamma = expit(raw)
                reg = -tcfg.l1_coeff * np.sign(1.0 - gamma) * gamma * (1.0 - gamma)
                graw = grads.damping_raw + np.where(net.slot_mask, reg, 0.0)
                gdict["raw"] = graw
            adam.step(gdict)

        point_losses = _validate(graph, current_weights(), dcfg, tcfg, k)
        norm = normalized_loss(point_losses, baselines)
        is_best = norm < best_norm
        if is_best:
            best_norm = norm
            best = current_weights()
        records.append(StageRecord(k, point_losses, norm, is_best))

    best.provenance = {
        "trained_by": "train_damped" if damped else "train_plain",
        "stages": tcfg.stages,
        "seed": tcfg.seed,
        "snr_points": list(tcfg.snr_points),
        "best_norm_loss": None if not records else best_norm,
    }
    return TrainResult(weights=best, records=records, baselines=baselines)


def train_plain(graph: LiftedTannerGraph, tcfg: TrainingConfig, dcfg: DecoderConfig) -> TrainResult:
    """Stagewise training of the check-node weights on the first window."""
    return _train_loop(graph, tcfg, dcfg, damped=False)


def train_damped(
    graph: LiftedTannerGraph, tcfg: TrainingConfig, dcfg: DecoderConfig, l1_coeff: Optional[float] = None
) -> TrainResult:
    """Joint training of weights and damping factors.

    Damping is parameterized through a logistic squash (initialized at
    0.5) and pulled toward 1 by an L1 penalty on 1 - damping, so that
    unimportant updates become visible in the trained factors.
    """
    if l1_coeff is not None:
        tcfg = replace(tcfg, l1_coeff=l1_coeff)
    return _train_loop(graph, tcfg, dcfg, damped=True)


@dataclass
class EPSamples:
    """Error-propagation training samples for the boundary-fed window."""

    boundary: np.ndarray  # (n, w positions * N_v) frozen decision LLRs
    channel: np.ndarray  # (n, window VNs) channel LLRs of the next stage
    ebno_db: float


def collect_ep_samples(
    graph: LiftedTannerGraph,
    plain: WeightSet,
    config: DecoderConfig,
    ebno_db: float,
    count: int,
    seed: int,
) -> EPSamples:
    """Harvest (boundary decisions, next-window channel LLRs) after failures.

    Chains are decoded with the plain weight set; whenever stage t fails
    and stage t+1 has the full w boundary positions, the pair feeding
    stage t+1 becomes one sample.
    """
    params = ChannelParams(ebno_db, graph.base.design_rate)
    L, w, clip = graph.L, graph.w, config.llr_clip
    n_vn_win = compile_window(graph, min(w + 1, L), config.W).n_vn
    boundary = np.empty((count, w * graph.N_v))
    channel = np.empty((count, n_vn_win))
    got = 0
    frame = 0
    while got < count:
        rng = stream(seed, _S_EP, frame)
        llrs = llr_matrix(graph.n_vn_total, params, rng)
        frozen = np.zeros(graph.n_vn_total)
        for t in range(1, L + 1):
            cw = compile_window(graph, t, config.W)
            bnd = np.clip(frozen[cw.bnd_global], -clip, clip) if cw.n_bnd else None
            dec = run_stage(cw, llrs[cw.vn_global], bnd, plain, None, config)
            lo = (t - 1) * graph.N_v
            frozen[lo : lo + graph.N_v] = dec[: graph.N_v]
            failed = (dec[: graph.N_v] <= 0).any()
            if failed and w <= t < L and got < count:
                nxt = compile_window(graph, t + 1, config.W)
                if nxt.n_vn == n_vn_win:
                    boundary[got] = frozen[nxt.bnd_global]
                    channel[got] = llrs[nxt.vn_global]
                    got += 1
        frame += 1
    return EPSamples(boundary=boundary, channel=channel, ebno_db=ebno_db)


def train_breakwater(
    samples: EPSamples,
    plain: WeightSet,
    graph: LiftedTannerGraph,
    dcfg: DecoderConfig,
    epochs: int = 500,
    batch_size: int = 100,
    step_size: float = 1e-3,
    beta: float = 1.0,
    seed: int = 0,
) -> WeightSet:
    """Train a complementary weight set on error-propagation samples.

    The network is the boundary-fed window configuration; optimization
    shuffles the fixed sample set into mini-batches each epoch, starting
    from the plain weights.
    """
    n = samples.channel.shape[0]
    if n == 0:
        raise TrainingError("no error-propagation samples to train on")
    t3 = graph.w + 1
    net = prune_to_targets(unroll(graph.window(t3, dcfg.W), dcfg, with_boundary=True), dcfg.T)
    n_target = dcfg.T * graph.N_v

    w_arr = plain.cn_weights.copy()
    adam = Adam({"w": w_arr}, lr=step_size)
    rng = np.random.default_rng(seed)
    for _epoch in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch_size):
            idx = order[lo : lo + batch_size]
            ws = WeightSet(w_arr.copy(), dcfg.W, graph.base.n_c, role=ROLE_PLAIN)
            dec, tape = forward(net, ws, samples.channel[idx], samples.boundary[idx])
            upstream = soft_bler_grad(dec, n_target, beta) / len(idx)
            grads = backward(tape, upstream)
            adam.step({"w": grads.cn_weights})

    return WeightSet(
        w_arr,
        dcfg.W,
        graph.base.n_c,
        role=ROLE_BREAKWATER,
        code_id=plain.code_id,
        provenance={
            "trained_by": "train_breakwater",
            "epochs": epochs,
            "samples": n,
            "sample_ebno_db": samples.ebno_db,
            "seed": seed,
        },
    )
