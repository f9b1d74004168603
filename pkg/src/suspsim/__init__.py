"""Adaptive LQ control of a trailing-arm quarter-car suspension.

Library layout: ``plant`` (nonlinear dynamics, equilibrium,
linearization), ``roads`` (input generators), ``estimator`` (online
gradient identification), ``lq`` (Riccati synthesis and gains),
``observer`` (reference-blended Luenberger estimator), ``trajectory``
(acceleration-driven reference), ``ride`` (weighted-RMS comfort
metrics), ``harness`` (closed-loop scenario runner) and ``cli``.
"""

from .config import load_physical_params, read_kv
from .estimator import GradientEstimator, band_limited_torque, project
from .harness import (
    ComparisonReport,
    ScenarioAbort,
    ScenarioConfig,
    SimTrace,
    export_csv,
    import_csv,
    passive_equilibrium,
    run_comparison,
    run_scenario,
)
from .lq import (
    Gains,
    LqWeights,
    StateSpaceModel,
    control_torque,
    default_observer_poles,
    feedback_gain,
    observer_gain,
    realize,
    solve_care,
    synthesize,
)
from .observer import MultiObserver, blend, parallel_estimate_step
from .plant import (
    PhysicalParams,
    PlantState,
    PolynomialPlant,
    equilibrium,
    eval_dynamics,
    linear_jacobians,
    linearize,
    rk4_step,
    total_energy,
)
from .ride import (
    RideMetrics,
    WeightingFilter,
    classify,
    default_weighting,
    load_weighting,
    percent_reduction,
    weight,
    weighted_rms,
)
from .roads import (
    RoadProfile,
    load_road_table,
    road_bump,
    road_limited_ramp,
    road_sinusoid,
)
from .trajectory import ReferenceCalculator, TrajectoryConfig, delta_ref, lowpass, reference

__version__ = "0.1.0"
