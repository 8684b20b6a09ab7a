"""Consistent navigation-behavior generation via offset learning.

A doubly group-regularized least-squares model of actual robot behaviors,
an alternating reweighted solver with monotone descent, an independent
convex oracle for certification, execution-time offset prediction, and a
setback-injecting navigation simulator with evaluation metrics.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .errors import (
    DimensionMismatch,
    EmptyInput,
    IndexOutOfRange,
    InvalidProfile,
    LengthMismatch,
    NavOffsetError,
    NonFiniteObjective,
    NotConverged,
    SingularSystem,
    SingularTemporalBlock,
    TooShort,
)
from .metrics import AggregateSummary, RunMetrics, aggregate, inconsistency, jerkiness
from .model import (
    ModalityLayout,
    TrainingSet,
    WeightU,
    WeightW,
    build_differences,
    build_instance,
    split_instance,
)
from .norms import ObjectiveBreakdown, build_p, build_q, modality_norm, objective, temporal_norm
from .oracle import OracleOptions, group_prox, oracle_fit
from .predictor import (
    ExecutionState,
    current_offset,
    generate_behavior,
    invert_temporal_blocks,
    predicted_offset,
)
from .simulator import (
    Episode,
    ExpertPolicy,
    SetbackModel,
    TerrainProfile,
    TerrainSegment,
    closed_loop_run,
    episodes_to_training_set,
    evaluate_model,
    generate_episode,
    reference_trajectory,
    run_metrics,
    terrain_preset,
    with_noise_modality,
)
from .solver import FitOptions, FitResult, fit, solve_u, solve_w

__version__ = "0.1.0"
