"""Canonical on-disk formats: weight sets, schedules, code specs, configs.

Documents are JSON with sorted keys and floats rounded to nine significant
digits before serialization, so identical contents always produce
byte-identical files.  Loaders reject unknown keys instead of silently
ignoring misspellings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .code_graph import (
    CoupledBaseMatrix,
    LiftedTannerGraph,
    build_coupled_base,
    lift,
    regular_block_base,
    uniform_edge_spread,
    _as_int_matrix,
)
from .decoder import ConfigurationError, DecoderConfig, ScheduleMask, WeightSet


class FileFormatError(ValueError):
    pass


def _round9(x):
    if isinstance(x, float):
        return float(f"{x:.9g}")
    if isinstance(x, dict):
        return {k: _round9(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round9(v) for v in x]
    return x


def canonical_json(obj) -> str:
    return json.dumps(_round9(obj), sort_keys=True, indent=1) + "\n"


def _check_keys(doc: dict, allowed, required, what: str):
    unknown = set(doc) - set(allowed)
    if unknown:
        raise FileFormatError(f"unknown keys in {what}: {sorted(unknown)}")
    missing = set(required) - set(doc)
    if missing:
        raise FileFormatError(f"missing keys in {what}: {sorted(missing)}")


# ---------------------------------------------------------------- weight sets

def weight_set_to_text(ws: WeightSet) -> str:
    doc = {
        "version": 1,
        "kind": "weight-set",
        "code_id": ws.code_id,
        "W": ws.W,
        "n_c": ws.n_c,
        "max_iters": ws.max_iters,
        "role": ws.role,
        "cn_weights": ws.cn_weights.ravel().tolist(),
        "provenance": ws.provenance,
    }
    if ws.damping is not None:
        doc["damping"] = ws.damping.ravel().tolist()
    return canonical_json(doc)


def save_weight_set(path, ws: WeightSet):
    with open(path, "w") as f:
        f.write(weight_set_to_text(ws))


def load_weight_set(path) -> WeightSet:
    with open(path) as f:
        doc = json.load(f)
    _check_keys(
        doc,
        {"version", "kind", "code_id", "W", "n_c", "max_iters", "role", "cn_weights", "damping", "provenance"},
        {"version", "kind", "W", "n_c", "max_iters", "role", "cn_weights"},
        "weight-set file",
    )
    if doc["kind"] != "weight-set":
        raise FileFormatError(f"not a weight-set file: kind={doc['kind']!r}")
    shape = (doc["max_iters"], doc["W"] * doc["n_c"])
    cn = np.asarray(doc["cn_weights"], dtype=np.float64)
    if cn.size != shape[0] * shape[1]:
        raise FileFormatError(f"cn_weights has {cn.size} entries, expected {shape[0] * shape[1]}")
    damping = None
    if "damping" in doc:
        damping = np.asarray(doc["damping"], dtype=np.float64).reshape(shape)
    return WeightSet(
        cn.reshape(shape),
        doc["W"],
        doc["n_c"],
        damping=damping,
        role=doc["role"],
        code_id=doc.get("code_id", ""),
        provenance=doc.get("provenance", {}),
    )


def weight_grid(ws: WeightSet) -> str:
    """Readable weight table: one row per iteration, one column per slot."""
    lines = [f"role={ws.role} W={ws.W} n_c={ws.n_c} max_iters={ws.max_iters}"]
    header = "iter " + " ".join(f"s{j + 1:>5d}" for j in range(ws.n_slots))
    lines.append(header)
    for i, row in enumerate(ws.cn_weights, 1):
        lines.append(f"{i:>4d} " + " ".join(f"{x:6.3f}" for x in row))
    if ws.damping is not None:
        lines.append("damping factors:")
        for i, row in enumerate(ws.damping, 1):
            lines.append(f"{i:>4d} " + " ".join(f"{x:6.3f}" for x in row))
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ schedules

def schedule_to_text(mask: ScheduleMask) -> str:
    doc = {
        "version": 1,
        "kind": "schedule",
        "W": mask.W,
        "n_c": mask.n_c,
        "max_iters": mask.max_iters,
        "active": [int(x) for x in mask.active.ravel()],
    }
    return canonical_json(doc)


def save_schedule(path, mask: ScheduleMask):
    with open(path, "w") as f:
        f.write(schedule_to_text(mask))


def load_schedule(path) -> ScheduleMask:
    with open(path) as f:
        doc = json.load(f)
    _check_keys(
        doc,
        {"version", "kind", "W", "n_c", "max_iters", "active"},
        {"version", "kind", "W", "n_c", "max_iters", "active"},
        "schedule file",
    )
    if doc["kind"] != "schedule":
        raise FileFormatError(f"not a schedule file: kind={doc['kind']!r}")
    shape = (doc["max_iters"], doc["W"] * doc["n_c"])
    active = np.asarray(doc["active"], dtype=np.uint8)
    if active.size != shape[0] * shape[1]:
        raise FileFormatError(f"active has {active.size} entries, expected {shape[0] * shape[1]}")
    return ScheduleMask(active.reshape(shape), doc["W"], doc["n_c"])


# ------------------------------------------------------------------ code spec

@dataclass(frozen=True)
class CodeSpec:
    """Construction parameters of one lifted coupled code."""

    w: int
    L: int
    z: int
    seed: int
    dv: Optional[int] = None
    dc: Optional[int] = None
    block_base: Optional[tuple] = None

    def build(self) -> LiftedTannerGraph:
        if self.block_base is not None:
            base = _as_int_matrix([list(r) for r in self.block_base])
        elif self.dv is not None and self.dc is not None:
            base = regular_block_base(self.dv, self.dc)
        else:
            raise FileFormatError("code spec needs either dv+dc or an explicit block_base")
        comps = uniform_edge_spread(base, self.w)
        coupled = build_coupled_base(comps, self.L)
        return lift(coupled, self.z, self.seed)


def code_spec_to_text(spec: CodeSpec) -> str:
    doc = {"kind": "code-spec", "version": 1, "w": spec.w, "L": spec.L, "z": spec.z, "seed": spec.seed}
    if spec.block_base is not None:
        doc["block_base"] = [list(r) for r in spec.block_base]
    else:
        doc["dv"] = spec.dv
        doc["dc"] = spec.dc
    return canonical_json(doc)


def save_code_spec(path, spec: CodeSpec):
    with open(path, "w") as f:
        f.write(code_spec_to_text(spec))


def load_code_spec(path) -> CodeSpec:
    with open(path) as f:
        doc = json.load(f)
    _check_keys(
        doc,
        {"kind", "version", "dv", "dc", "block_base", "w", "L", "z", "seed"},
        {"kind", "version", "w", "L", "z", "seed"},
        "code spec file",
    )
    if doc["kind"] != "code-spec":
        raise FileFormatError(f"not a code spec file: kind={doc['kind']!r}")
    bb = doc.get("block_base")
    return CodeSpec(
        w=doc["w"],
        L=doc["L"],
        z=doc["z"],
        seed=doc["seed"],
        dv=doc.get("dv"),
        dc=doc.get("dc"),
        block_base=None if bb is None else tuple(tuple(r) for r in bb),
    )


# ----------------------------------------------------------------- CSV output

SIM_CSV_COLUMNS = (
    "ebno_db",
    "frames",
    "stages",
    "block_err",
    "frame_err",
    "bler",
    "fer",
    "bler_ci",
    "fer_ci",
    "q1",
    "q1_events",
)


def _fmt6(x) -> str:
    if x is None:
        return ""
    return f"{x:.6g}"


def sim_points_to_csv(points) -> str:
    lines = [",".join(SIM_CSV_COLUMNS)]
    for p in points:
        lines.append(
            ",".join(
                [
                    _fmt6(p.ebno_db),
                    str(p.frames),
                    str(p.stages),
                    str(p.block_errors),
                    str(p.frame_errors),
                    _fmt6(p.bler),
                    _fmt6(p.fer),
                    _fmt6(p.bler_ci),
                    _fmt6(p.fer_ci),
                    _fmt6(p.q1),
                    str(p.q1_events),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def stage_records_to_csv(records) -> str:
    if not records:
        return "stage,norm_loss,is_best\n"
    n_points = len(records[0].point_losses)
    header = ["stage"] + [f"loss_p{i + 1}" for i in range(n_points)] + ["norm_loss", "is_best"]
    lines = [",".join(header)]
    for r in records:
        row = [str(r.stage)] + [str(x) for x in r.point_losses]
        row += [_fmt6(r.norm_loss), "1" if r.is_best else "0"]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------- decoder config IO

def decoder_config_from_doc(doc: dict) -> DecoderConfig:
    _check_keys(doc, {"W", "T", "max_iters", "llr_clip"}, {"W", "max_iters"}, "decoder config")
    return DecoderConfig(
        W=doc["W"],
        max_iters=doc["max_iters"],
        T=doc.get("T", 1),
        llr_clip=doc.get("llr_clip", 64.0),
    )


def base_matrix_dump(coupled: CoupledBaseMatrix) -> str:
    return coupled.dump()
