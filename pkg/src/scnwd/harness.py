"""Seeded Monte Carlo estimation of BLER, FER and error propagation.

Work is split into fixed-size chunks of frames (or detached windows);
every frame draws its noise from a stream addressed by (master seed,
purpose, SNR index, frame index), so the aggregated counters do not
depend on how chunks are spread over worker processes.  Chunks are
consumed in index order and the stopping rule is evaluated at chunk
boundaries, which keeps totals reproducible for any worker count.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .channel import ChannelParams, llr_matrix, stream
from .code_graph import LiftedTannerGraph
from .decoder import (
    ConfigurationError,
    DecoderConfig,
    ScheduleMask,
    WeightSet,
    compile_window,
    decode_chain,
    genie_detect,
    run_stage,
    ucn_detect,
)
from . import fileio

_S_SIM = 10
_S_EPSIM = 11


def ci95(k: int, n: int) -> float:
    """Half width of the normal-approximation 95% interval for k/n."""
    if n <= 0:
        return 0.0
    p = k / n
    return 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / n)


@dataclass
class SimPoint:
    """Counters and estimates of one SNR point."""

    ebno_db: float
    frames: int
    stages: int
    block_errors: int
    frame_errors: int
    q1_events: int = 0
    q1_hits: int = 0

    @property
    def bler(self) -> float:
        return self.block_errors / self.stages if self.stages else 0.0

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else 0.0

    @property
    def bler_ci(self) -> float:
        return ci95(self.block_errors, self.stages)

    @property
    def fer_ci(self) -> float:
        return ci95(self.frame_errors, self.frames)

    @property
    def q1(self) -> Optional[float]:
        return self.q1_hits / self.q1_events if self.q1_events else None

    @property
    def q1_ci(self) -> float:
        return ci95(self.q1_hits, self.q1_events)

    @property
    def insufficient_events(self) -> bool:
        return self.q1_events == 0


@dataclass
class SimResult:
    points: list

    def to_csv(self) -> str:
        return fileio.sim_points_to_csv(self.points)


@dataclass
class SimSetup:
    """Everything one Monte Carlo run needs, as in-memory objects."""

    graph: LiftedTannerGraph
    config: DecoderConfig
    weights: WeightSet
    snr_points: tuple
    breakwater: Optional[WeightSet] = None
    detector: str = "none"
    schedule: Optional[ScheduleMask] = None
    min_errors: int = 200
    max_frames: int = 1_000_000
    seed: int = 0
    workers: int = 1
    chunk: int = 32
    mode: str = "chain"  # "chain" or "window"
    independent_boundaries: bool = False
    seed_first_error: bool = False


_STATE: dict = {}


def _window_chunk(args):
    point_idx, chunk_idx = args
    s = _STATE
    setup: SimSetup = s["setup"]
    graph = setup.graph
    cw = compile_window(graph, 1, setup.config.W)
    params = ChannelParams(setup.snr_points[point_idx], graph.base.design_rate)
    n_target = graph.N_v
    errors = 0
    for j in range(setup.chunk):
        idx = chunk_idx * setup.chunk + j
        rng = stream(setup.seed, _S_SIM, point_idx, idx)
        llrs = llr_matrix(cw.n_vn, params, rng)
        dec = run_stage(cw, llrs, None, setup.weights, setup.schedule, setup.config)
        if (dec[:n_target] <= 0).any():
            errors += 1
    return np.array([setup.chunk, setup.chunk, errors, errors, 0, 0], dtype=np.int64)


def _chain_chunk(args):
    point_idx, chunk_idx = args
    s = _STATE
    setup: SimSetup = s["setup"]
    graph = setup.graph
    params = ChannelParams(setup.snr_points[point_idx], graph.base.design_rate)
    out = np.zeros(6, dtype=np.int64)  # frames, stages, block, frame, pairs, pair_hits
    for j in range(setup.chunk):
        idx = chunk_idx * setup.chunk + j
        rng = stream(setup.seed, _S_SIM, point_idx, idx)
        llrs = llr_matrix(graph.n_vn_total, params, rng)
        res = decode_chain(
            graph,
            llrs,
            setup.weights,
            setup.config,
            breakwater=setup.breakwater,
            detector=setup.detector,
            schedule=setup.schedule,
            independent_boundaries=setup.independent_boundaries,
        )
        out += (
            1,
            graph.L,
            int(res.stage_errors.sum()),
            int(res.frame_error),
            res.ep_pairs,
            res.ep_errors,
        )
    return out


def _seeded_ep_chunk(args):
    """Force a first-window failure, then follow the chain until recovery."""
    point_idx, chunk_idx = args
    s = _STATE
    setup: SimSetup = s["setup"]
    graph = setup.graph
    cfg = setup.config
    clip = cfg.llr_clip
    params = ChannelParams(setup.snr_points[point_idx], graph.base.design_rate)
    cw1 = compile_window(graph, 1, cfg.W)
    n1 = cw1.n_vn
    out = np.zeros(6, dtype=np.int64)
    for j in range(setup.chunk):
        idx = chunk_idx * setup.chunk + j
        rng = stream(setup.seed, _S_EPSIM, point_idx, idx)
        head = llr_matrix(n1, params, rng)
        dec = run_stage(cw1, head, None, setup.weights, setup.schedule, cfg)
        out[0] += 1
        out[1] += 1
        bits = dec[: graph.N_v] <= 0
        if not bits.any():
            continue
        out[2] += 1
        out[3] += 1
        tail = llr_matrix(graph.n_vn_total - n1, params, rng)
        llrs = np.concatenate([head, tail])
        frozen = np.zeros(graph.n_vn_total)
        frozen_bits = np.zeros(graph.n_vn_total, dtype=np.uint8)
        frozen[: graph.N_v] = dec[: graph.N_v]
        frozen_bits[: graph.N_v] = bits
        prev_err = True
        verdict = _detect(setup.detector, graph, frozen_bits, 1)
        for t in range(2, graph.L + 1):
            cwt = compile_window(graph, t, cfg.W)
            bnd = np.clip(frozen[cwt.bnd_global], -clip, clip)
            use_bw = setup.breakwater is not None and verdict
            wset = setup.breakwater if use_bw else setup.weights
            dect = run_stage(cwt, llrs[cwt.vn_global], bnd, wset, setup.schedule, cfg)
            lo = (t - 1) * graph.N_v
            bt = dect[: graph.N_v] <= 0
            frozen[lo : lo + graph.N_v] = dect[: graph.N_v]
            frozen_bits[lo : lo + graph.N_v] = bt
            err = bool(bt.any())
            out[1] += 1
            out[2] += int(err)
            if prev_err:
                out[4] += 1
                out[5] += int(err)
            if not err:
                break
            prev_err = err
            verdict = _detect(setup.detector, graph, frozen_bits, t)
    return out


def _detect(detector: str, graph, frozen_bits, t) -> bool:
    if detector == "ucn":
        return ucn_detect(graph, frozen_bits, t)
    if detector == "genie":
        return genie_detect(graph, frozen_bits, t)
    return False


def _consume(task, point_idx, stop_fn, max_chunks, workers):
    totals = np.zeros(6, dtype=np.int64)
    chunk_idx = 0
    pool = None
    try:
        if workers > 1:
            ctx = multiprocessing.get_context("fork")
            pool = ctx.Pool(workers)
        while chunk_idx < max_chunks and not stop_fn(totals):
            wave = workers * 2 if pool else 1
            wave = min(wave, max_chunks - chunk_idx)
            args = [(point_idx, c) for c in range(chunk_idx, chunk_idx + wave)]
            results = pool.map(task, args) if pool else [task(a) for a in args]
            for r in results:
                totals += r
                chunk_idx += 1
                if stop_fn(totals):
                    break
    finally:
        if pool is not None:
            pool.close()
            pool.join()
    return totals


def simulate(setup: SimSetup) -> SimResult:
    """Estimate BLER/FER per SNR point until enough block errors accrue.

    In "window" mode each sample is a detached first-window decode (one
    stage per frame); in "chain" mode every frame decodes all L stages
    and error-propagation pairs are tallied as a byproduct.
    """
    if setup.mode not in ("window", "chain"):
        raise ConfigurationError(f"unknown mode {setup.mode!r}")
    if setup.min_errors < 1:
        raise ConfigurationError("min_errors must be >= 1")
    _STATE["setup"] = setup
    task = _window_chunk if setup.mode == "window" else _chain_chunk
    max_chunks = max(1, math.ceil(setup.max_frames / setup.chunk))
    points = []
    for i, snr in enumerate(setup.snr_points):
        def stop(t):
            return t[2] >= setup.min_errors

        tot = _consume(task, i, stop, max_chunks, setup.workers)
        points.append(
            SimPoint(
                ebno_db=snr,
                frames=int(tot[0]),
                stages=int(tot[1]),
                block_errors=int(tot[2]),
                frame_errors=int(tot[3]),
                q1_events=int(tot[4]),
                q1_hits=int(tot[5]),
            )
        )
    return SimResult(points)


def estimate_ep(setup: SimSetup, min_events: int = 200) -> SimResult:
    """Estimate the error-propagation probability q1 per SNR point.

    q1 is the fraction of stages that fail given that the previous stage
    failed.  With ``seed_first_error`` chains are seeded by rejection
    sampling a first-window failure and followed until they recover,
    which skips the error-free bulk at high SNR.  Points that saw no
    conditioning event report q1 as None (insufficient events).
    """
    if setup.breakwater is not None and setup.detector == "none":
        raise ConfigurationError("adaptive EP estimation needs a detector")
    _STATE["setup"] = setup
    task = _seeded_ep_chunk if setup.seed_first_error else _chain_chunk
    max_chunks = max(1, math.ceil(setup.max_frames / setup.chunk))
    points = []
    for i, snr in enumerate(setup.snr_points):
        def stop(t):
            return t[4] >= min_events

        tot = _consume(task, i, stop, max_chunks, setup.workers)
        points.append(
            SimPoint(
                ebno_db=snr,
                frames=int(tot[0]),
                stages=int(tot[1]),
                block_errors=int(tot[2]),
                frame_errors=int(tot[3]),
                q1_events=int(tot[4]),
                q1_hits=int(tot[5]),
            )
        )
    return SimResult(points)


# --------------------------------------------------- file-driven experiments

_EXPERIMENT_KEYS = {
    "code",
    "decoder",
    "weights",
    "breakwater",
    "schedule",
    "detector",
    "snr_points",
    "min_errors",
    "max_frames",
    "workers",
    "seed",
    "chunk",
    "mode",
    "out_csv",
    "min_events",
    "seed_first_error",
}


@dataclass
class ExperimentConfig:
    """File-facing experiment description (paths plus options)."""

    code: str
    decoder: dict
    weights: object
    snr_points: tuple
    breakwater: Optional[str] = None
    schedule: Optional[str] = None
    detector: str = "none"
    min_errors: int = 200
    max_frames: int = 1_000_000
    workers: int = 1
    seed: int = 0
    chunk: int = 32
    mode: str = "chain"
    out_csv: Optional[str] = None
    min_events: int = 200
    seed_first_error: bool = False


def load_experiment_config(path) -> ExperimentConfig:
    import json

    with open(path) as f:
        doc = json.load(f)
    fileio._check_keys(doc, _EXPERIMENT_KEYS, {"code", "decoder", "weights", "snr_points"}, "experiment config")
    return ExperimentConfig(
        code=doc["code"],
        decoder=doc["decoder"],
        weights=doc["weights"],
        snr_points=tuple(doc["snr_points"]),
        breakwater=doc.get("breakwater"),
        schedule=doc.get("schedule"),
        detector=doc.get("detector", "none"),
        min_errors=doc.get("min_errors", 200),
        max_frames=doc.get("max_frames", 1_000_000),
        workers=doc.get("workers", 1),
        seed=doc.get("seed", 0),
        chunk=doc.get("chunk", 32),
        mode=doc.get("mode", "chain"),
        out_csv=doc.get("out_csv"),
        min_events=doc.get("min_events", 200),
        seed_first_error=doc.get("seed_first_error", False),
    )


def setup_from_experiment(cfg: ExperimentConfig) -> SimSetup:
    spec = fileio.load_code_spec(cfg.code)
    graph = spec.build()
    dcfg = fileio.decoder_config_from_doc(cfg.decoder)
    if isinstance(cfg.weights, dict):
        fileio._check_keys(cfg.weights, {"fixed"}, {"fixed"}, "weights entry")
        weights = WeightSet.fixed(cfg.weights["fixed"], dcfg.max_iters, dcfg.W, graph.base.n_c)
    else:
        weights = fileio.load_weight_set(cfg.weights)
    breakwater = fileio.load_weight_set(cfg.breakwater) if cfg.breakwater else None
    schedule = fileio.load_schedule(cfg.schedule) if cfg.schedule else None
    return SimSetup(
        graph=graph,
        config=dcfg,
        weights=weights,
        snr_points=cfg.snr_points,
        breakwater=breakwater,
        detector=cfg.detector,
        schedule=schedule,
        min_errors=cfg.min_errors,
        max_frames=cfg.max_frames,
        seed=cfg.seed,
        workers=cfg.workers,
        chunk=cfg.chunk,
        mode=cfg.mode,
        seed_first_error=cfg.seed_first_error,
    )


def run_experiment(cfg: ExperimentConfig, ep: bool = False) -> SimResult:
    setup = setup_from_experiment(cfg)
    result = estimate_ep(setup, min_events=cfg.min_events) if ep else simulate(setup)
    if cfg.out_csv:
        with open(cfg.out_csv, "w") as f:
            f.write(result.to_csv())
    return result
