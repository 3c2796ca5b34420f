"""Non-uniform check-node update schedules for window decoding.

A schedule is derived from a damped training run: each slot's damping
factor divided by its normalized target-reach count gives an
insignificance score, and the greedy rule repeatedly deactivates the
highest-scoring cell among each position slot's currently last active
iteration.  Slots that cannot reach the targets at all start out
inactive.  The resulting per-slot active sets are iteration prefixes.

Omission accounting counts all inactive cells, including the initially
unreachable ones, against the full W * n_c * max_iters grid.  Schedules
derived from a damped weight set are meant to be executed with the plain
(undamped) weight set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decoder import ConfigurationError, ScheduleMask
from .unrolled_net import NormalizedCounts


@dataclass
class InsignificanceTable:
    """Damping factor over normalized reach count, per (iteration, slot).

    Entries are NaN (and ``defined`` False) where the normalized count is
    zero; those cells are permanently omitted from schedules.
    """

    scores: np.ndarray
    defined: np.ndarray
    W: int
    n_c: int

    @property
    def max_iters(self) -> int:
        return self.scores.shape[0]

    @property
    def n_slots(self) -> int:
        return self.scores.shape[1]


def insignificance(damping: np.ndarray, counts: NormalizedCounts, W: int, n_c: int) -> InsignificanceTable:
    """Element-wise damping / normalized reach count."""
    damping = np.asarray(damping, dtype=np.float64)
    nbar = counts.values
    if damping.shape != nbar.shape:
        raise ConfigurationError(
            f"damping shape {damping.shape} does not match counts shape {nbar.shape}"
        )
    if damping.shape[1] != W * n_c:
        raise ConfigurationError(f"slot dimension {damping.shape[1]} != W*n_c={W * n_c}")
    defined = nbar > 0
    scores = np.full_like(damping, np.nan)
    scores[defined] = damping[defined] / nbar[defined]
    return InsignificanceTable(scores=scores, defined=defined, W=W, n_c=n_c)


def deactivation_capacity(table: InsignificanceTable) -> int:
    """Cells removable by the greedy rule (iteration 1 is untouchable)."""
    last = _last_active(table.defined)
    return int(np.maximum(last, 0).sum())


def _last_active(active: np.ndarray) -> np.ndarray:
    """Per slot, the largest active iteration index (0-based; -1 if none)."""
    iters = active.shape[0]
    any_active = active.any(axis=0)
    last = np.where(any_active, iters - 1 - np.argmax(active[::-1], axis=0), -1)
    return last


def greedy_deactivate(table: InsignificanceTable, k: int) -> ScheduleMask:
    """Deactivate k cells, largest score first among last active iterations.

    Starts from the mask whose undefined (unreachable) cells are already
    inactive.  Each round considers, for every slot, only its currently
    last active iteration and removes the cell with the largest score;
    ties prefer the larger position, then the larger iteration.  Iteration
    1 is never deactivated.
    """
    cap = deactivation_capacity(table)
    if k > cap:
        raise ConfigurationError(f"cannot deactivate {k} cells; capacity is {cap}")
    active = table.defined.copy()
    last = _last_active(active)
    for _ in range(k):
        candidates = last >= 1  # keep iteration 1 alive
        if not candidates.any():
            raise ConfigurationError("no deactivatable cells left")
        slots = np.where(candidates)[0]
        scores = table.scores[last[slots], slots]
        order = np.lexsort((last[slots], slots, scores))
        pick = slots[order[-1]]
        active[last[pick], pick] = False
        last[pick] -= 1
    return ScheduleMask(active.astype(np.uint8), table.W, table.n_c)


def pragmatic_schedule(W: int, max_iters: int, n_c: int = 1) -> ScheduleMask:
    """Fixed rear-first deactivation pattern with period W.

    Iteration 1 updates everything; iteration j leaves the rear-most
    (j-1 mod W) positions inactive, growing one position per iteration
    and restarting every W iterations.
    """
    active = np.ones((max_iters, W * n_c), dtype=np.uint8)
    for j in range(max_iters):
        n_off = j % W
        if n_off:
            active[j, (W - n_off) * n_c :] = 0
    return ScheduleMask(active, W, n_c)


def omission_fraction(mask: ScheduleMask) -> float:
    """Inactive cells (including unreachable ones) over the full grid."""
    return mask.n_inactive / mask.active.size


def schedule_grid(mask: ScheduleMask) -> str:
    """Human-readable activity grid: rows are iterations, columns slots."""
    lines = []
    for row in mask.active:
        lines.append("".join("■" if x else "·" for x in row))
    return "\n".join(lines) + "\n"
