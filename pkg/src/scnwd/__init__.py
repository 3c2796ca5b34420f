"""Spatially coupled LDPC codes with a trainable neural window decoder.

Construction, windowed min-sum decoding with per-slot weights and damping,
reverse-mode training on the unrolled window, non-uniform schedule
derivation, and seeded Monte Carlo evaluation of block/frame error rates
and error propagation.
"""

from .channel import ChannelParams, llr_matrix, llr_vector, stream
from .code_graph import (
    CodeConstructionError,
    ComponentBases,
    CoupledBaseMatrix,
    LiftedTannerGraph,
    WindowView,
    build_coupled_base,
    lift,
    regular_block_base,
    uniform_edge_spread,
    window_view,
)
from .decoder import (
    ChainResult,
    ConfigurationError,
    DecoderConfig,
    ScheduleMask,
    StageResult,
    WeightSet,
    decode_chain,
    decode_window,
    genie_detect,
    ucn_detect,
)
from .fileio import CodeSpec, load_schedule, load_weight_set, save_schedule, save_weight_set
from .harness import SimPoint, SimResult, SimSetup, ci95, estimate_ep, simulate
from .scheduling import (
    InsignificanceTable,
    greedy_deactivate,
    insignificance,
    omission_fraction,
    pragmatic_schedule,
    schedule_grid,
)
from .training import (
    Adam,
    EPSamples,
    StageRecord,
    TrainingConfig,
    TrainResult,
    collect_ep_samples,
    collect_error_samples,
    hard_bler_loss,
    normalized_loss,
    soft_bler_grad,
    soft_bler_loss,
    train_breakwater,
    train_damped,
    train_plain,
)
from .unrolled_net import (
    GradientSet,
    NormalizedCounts,
    Tape,
    UnrolledGraph,
    backward,
    forward,
    normalize_counts,
    prune_to_targets,
    reach_counts,
    unroll,
)

__version__ = "0.1.0"
