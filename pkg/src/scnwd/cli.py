"""Command-line orchestration of the build/train/schedule/simulate pipeline.

Every command reads one JSON config (or direct flags), takes its
randomness from --seed, and exits 0 on success.  Unknown config keys are
rejected rather than silently defaulted.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import fileio, harness, scheduling, training
from .decoder import DecoderConfig, WeightSet
from .unrolled_net import normalize_counts, reach_counts


def _load_doc(path, allowed, required, what):
    with open(path) as f:
        doc = json.load(f)
    fileio._check_keys(doc, allowed, required, what)
    return doc


def _decoder_config(doc) -> DecoderConfig:
    return fileio.decoder_config_from_doc(doc)


def cmd_build_code(args):
    spec = fileio.CodeSpec(
        w=args.w, L=args.L, z=args.z, seed=args.seed, dv=args.dv, dc=args.dc,
        block_base=None,
    )
    graph = spec.build()
    fileio.save_code_spec(args.out, spec)
    print(f"wrote {args.out}: {graph.n_vn_total} VNs, {graph.n_cn_total} CNs, "
          f"design rate {graph.base.design_rate:.6g}")
    if args.dump_base:
        with open(args.dump_base, "w") as f:
            f.write(graph.base.dump())
        print(f"wrote base matrix dump to {args.dump_base}")
    return 0


_TRAIN_KEYS = {
    "code", "decoder", "snr_points", "errors_per_point", "sessions_per_stage",
    "stages", "validation_samples_per_point", "step_size", "beta1", "beta2",
    "eps", "beta", "l1_coeff", "seed", "acceptance_floor", "chunk", "out",
    "records_csv",
}


def _training_setup(args, damped):
    doc = _load_doc(args.config, _TRAIN_KEYS, {"code", "decoder", "out"}, "training config")
    spec = fileio.load_code_spec(doc["code"])
    graph = spec.build()
    dcfg = _decoder_config(doc["decoder"])
    kwargs = {
        k: doc[k]
        for k in (
            "errors_per_point", "sessions_per_stage", "stages",
            "validation_samples_per_point", "step_size", "beta1", "beta2",
            "eps", "beta", "l1_coeff", "acceptance_floor", "chunk",
        )
        if k in doc
    }
    if "snr_points" in doc:
        kwargs["snr_points"] = tuple(doc["snr_points"])
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    if args.stages is not None:
        kwargs["stages"] = args.stages
    tcfg = training.TrainingConfig(seed=seed, **kwargs)
    return graph, tcfg, dcfg, doc


def _run_training(args, damped):
    graph, tcfg, dcfg, doc = _training_setup(args, damped)
    fn = training.train_damped if damped else training.train_plain
    result = fn(graph, tcfg, dcfg)
    fileio.save_weight_set(doc["out"], result.weights)
    print(f"wrote {doc['out']} after {tcfg.stages} stages "
          f"(baselines {list(result.baselines)})")
    if doc.get("records_csv"):
        with open(doc["records_csv"], "w") as f:
            f.write(fileio.stage_records_to_csv(result.records))
        print(f"wrote stage records to {doc['records_csv']}")
    return 0


def cmd_train(args):
    return _run_training(args, damped=False)


def cmd_train_damped(args):
    return _run_training(args, damped=True)


def cmd_derive_schedule(args):
    damped = fileio.load_weight_set(args.weights)
    if damped.damping is None:
        print("error: schedule derivation needs a damped weight set", file=sys.stderr)
        return 2
    spec = fileio.load_code_spec(args.code)
    graph = spec.build()
    dcfg = DecoderConfig(W=damped.W, max_iters=damped.max_iters, T=args.T)
    N = reach_counts(graph.window(1, dcfg.W), dcfg)
    table = scheduling.insignificance(damped.damping, normalize_counts(N), damped.W, damped.n_c)
    mask = scheduling.greedy_deactivate(table, args.k)
    fileio.save_schedule(args.out, mask)
    frac = scheduling.omission_fraction(mask)
    print(f"wrote {args.out}: {mask.n_inactive} inactive cells, omission {frac:.0%}")
    if args.grid:
        print(scheduling.schedule_grid(mask), end="")
    return 0


def cmd_collect_ep(args):
    spec = fileio.load_code_spec(args.code)
    graph = spec.build()
    plain = fileio.load_weight_set(args.weights)
    dcfg = DecoderConfig(W=plain.W, max_iters=plain.max_iters, T=args.T)
    samples = training.collect_ep_samples(graph, plain, dcfg, args.snr, args.count, args.seed)
    np.savez(args.out, boundary=samples.boundary, channel=samples.channel,
             ebno_db=samples.ebno_db)
    print(f"wrote {args.out}: {samples.channel.shape[0]} samples at {args.snr} dB")
    return 0


def cmd_train_breakwater(args):
    spec = fileio.load_code_spec(args.code)
    graph = spec.build()
    plain = fileio.load_weight_set(args.weights)
    dcfg = DecoderConfig(W=plain.W, max_iters=plain.max_iters, T=args.T)
    data = np.load(args.samples)
    samples = training.EPSamples(
        boundary=data["boundary"], channel=data["channel"], ebno_db=float(data["ebno_db"])
    )
    bw = training.train_breakwater(
        samples, plain, graph, dcfg,
        epochs=args.epochs, batch_size=args.batch_size,
        step_size=args.step_size, seed=args.seed,
    )
    fileio.save_weight_set(args.out, bw)
    print(f"wrote {args.out} (breakwater role, {args.epochs} epochs)")
    return 0


def _sim_config(args):
    cfg = harness.load_experiment_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.snr:
        cfg.snr_points = tuple(args.snr)
    if args.min_errors is not None:
        cfg.min_errors = args.min_errors
    if args.max_frames is not None:
        cfg.max_frames = args.max_frames
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out_csv is not None:
        cfg.out_csv = args.out_csv
    return cfg


def cmd_simulate(args):
    cfg = _sim_config(args)
    result = harness.run_experiment(cfg, ep=False)
    print(result.to_csv(), end="")
    return 0


def cmd_ep_eval(args):
    cfg = _sim_config(args)
    result = harness.run_experiment(cfg, ep=True)
    print(result.to_csv(), end="")
    for p in result.points:
        if p.insufficient_events:
            print(f"warning: {p.ebno_db} dB saw no conditioning events", file=sys.stderr)
    return 0


def cmd_dump_weights(args):
    ws = fileio.load_weight_set(args.weights)
    print(fileio.weight_grid(ws), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scnwd", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-code", help="construct a code and write its spec file")
    p.add_argument("--dv", type=int, required=True)
    p.add_argument("--dc", type=int, required=True)
    p.add_argument("--w", type=int, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--z", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-base", default=None)
    p.set_defaults(fn=cmd_build_code)

    for name, fn in (("train", cmd_train), ("train-damped", cmd_train_damped)):
        p = sub.add_parser(name, help=f"{name} on actively collected error samples")
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--stages", type=int, default=None)
        p.set_defaults(fn=fn)

    p = sub.add_parser("derive-schedule", help="greedy schedule from damped weights")
    p.add_argument("--code", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--T", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", action="store_true")
    p.set_defaults(fn=cmd_derive_schedule)

    p = sub.add_parser("collect-ep", help="harvest error-propagation samples")
    p.add_argument("--code", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--T", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_collect_ep)

    p = sub.add_parser("train-breakwater", help="train the complementary weight set")
    p.add_argument("--code", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--step-size", type=float, default=1e-3)
    p.add_argument("--T", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_breakwater)

    for name, fn in (("simulate", cmd_simulate), ("ep-eval", cmd_ep_eval)):
        p = sub.add_parser(name, help=f"{name} from an experiment config")
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--snr", type=float, nargs="*", default=None)
        p.add_argument("--min-errors", type=int, default=None)
        p.add_argument("--max-frames", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out-csv", default=None)
        p.set_defaults(fn=fn)

    p = sub.add_parser("dump-weights", help="print a weight set as a grid")
    p.add_argument("--weights", required=True)
    p.set_defaults(fn=cmd_dump_weights)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
