"""Recurrence and escape theory, event classification and exit-time experiments."""
from .constants import (
    AdmissibilityReport,
    ComponentCheck,
    ConstantsTable,
    admissibility,
    constants_table,
    contraction_rate,
    eps_components,
    recurrence_time,
    suggest_parameters,
)
from .drift import (
    BrownianCheck,
    DriftReport,
    brownian_tail_bound,
    brownian_tail_mc,
    drift_constants,
    lyapunov_and_drift_check,
    lyapunov_function,
)
from .events import (
    EVENT1,
    EVENT2,
    NEITHER,
    EnsembleSummary,
    EventMonitor,
    EventWindow,
    MetastabilityVerdict,
    classify,
    classify_ensemble,
)
from .exits import (
    ExitPrediction,
    ExitResult,
    RefinementTable,
    config_for,
    ek_prediction,
    exit_experiment,
    paired_ratio,
    stepsize_refinement,
)
from .params import MODES, NLD_MODE, ULD_CRITICAL, ULD_SMALL, ProblemParams, resolve_mode
