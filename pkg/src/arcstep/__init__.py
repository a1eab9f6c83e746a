"""Gradient descent with i.i.d. Arcsine-distributed inverse stepsizes."""
from .distributions import (
    ArcsineDist,
    ConditionClass,
    FlippedArcsineDist,
    ParameterError,
    PointMass,
    QuadratureSingularityError,
    RngStream,
    UniformDist,
    expect_monte_carlo,
    expect_quadrature,
)
from .engine import (
    RunConfig,
    chebyshev_rate_closed_form,
    factor_statistics,
    run_batch,
    run_gd,
    worst_case_quadratic_rate,
)
from .objectives import (
    InexactGradientModel,
    RadialObjective,
    SeparableObjective,
    check_commuting_hessians,
    logcosh_benchmark,
    radial_benchmark,
)
from .potential import (
    equalization_residual,
    equilibrium_potential,
    factor_variance,
    game_payoff,
    inexact_slowdown,
    log_rate_at,
    rate_value,
)
from .schedules import ScheduleExhausted, ScheduleSpec, ScheduleStream, empirical_measure

__version__ = "0.1.0"
