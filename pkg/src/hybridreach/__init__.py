"""Hybrid optimal control with reach time to a target set.

Model hybrid systems with autonomous and controlled jumps, simulate them,
solve the value function of the reach-time problem on a grid, and check the
hitting-time, boundedness and uniqueness estimates numerically.
"""

from .errors import (
    AssumptionViolation,
    ConfigurationError,
    HybridError,
    InputError,
    ModelViolation,
    ZenoError,
)
from .geometry import Ball, Box, HalfSpace, Union, set_distance, signed_distance
from .instance import Instance, bundled, bundled_names, load_instance
from .model import (
    AffineDynamics,
    AffineExpr,
    BoxControls,
    ConstantsEstimate,
    ControlledJumpCost,
    FiniteControls,
    HybridSystem,
    Jump,
    Mode,
    estimate_constants,
    validate_assumptions,
)
from .solver import (
    Grid,
    PolicyTable,
    SolveReport,
    ValueField,
    bellman_step,
    extract_policy,
    solve_qvi,
)
from .trajectory import (
    ControlPolicy,
    ControlSchedule,
    PlannedJump,
    Trajectory,
    apply_autonomous_jump,
    evaluate_cost,
    first_hitting_time,
    integrate_arc,
    simulate,
)
from .verification import (
    bound_suite,
    check_dpp,
    check_first_hit_bounds,
    check_iterated_bounds,
    check_lemma1,
    check_uniqueness,
    check_value_bound,
    estimate_holder,
    operator_properties,
)

__version__ = "0.1.0"
