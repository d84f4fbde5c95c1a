"""Nash equilibria of non-potential games via monotone operator splitting."""

from .games import (
    EquilibriumCertificate,
    ProblemSpec,
    build_custom_linear,
    build_cyclic_projection,
    build_cyclic_prox,
    build_gne,
    build_saddle,
    build_zero_sum,
    game_value,
    solve_problem,
    verify_equilibrium,
    zero_sum_oracle,
)
from .operators import (
    AffineOperator,
    CustomOperator,
    CyclicOperator,
    MonotoneOperator,
    SaddleOperator,
    ZeroSumOperator,
    apply,
    check_cocoercive,
    check_lipschitz,
    check_monotone,
    finite_difference_gradient,
)
from .problem_io import ProblemFileError, load_problem, write_problem
from .prox import (
    IndicatorAffine,
    IndicatorBall,
    IndicatorBox,
    IndicatorHalfspace,
    IndicatorSimplex,
    ProductSet,
    ProxFunction,
    SeparableSum,
    Zero,
    membership_residual,
    project_simplex,
    prox,
)
from .solver import (
    ConfigError,
    SolverConfig,
    SolveReport,
    Status,
    default_gamma,
    make_error_schedule,
    residual,
    solve,
    solve_fb,
    solve_fbf,
)
from .space import BlockVector, LinearMap, SpaceLayout, axpy, dot, norm, spectral_norm

__version__ = "0.1.0"
