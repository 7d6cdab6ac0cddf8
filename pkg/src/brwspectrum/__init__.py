"""brwspectrum: positive discrete spectrum of branching random walks on Z^d.

Builds symmetric jump kernels (finite-variance and heavy-tailed), evaluates
the Fourier symbol and lattice Green's function by Brillouin-zone
quadrature, reduces the spectral problem of the perturbed walk generator to
the N x N source matrix Gamma(lambda), solves the branch equations
gamma_i(lambda) beta = 1, and cross-validates everything against truncated
operators, uniformization, and event-driven Monte Carlo.
"""
from .backend import DEFAULT_BACKEND, HAVE_COMPILED, get_backend
from .criticality import (
    CriticalIntensities,
    SpectrumResult,
    beta_c,
    beta_c1,
    critical_intensities,
    extrapolate_gamma_at_zero,
    gap_bound_cstar,
    gap_bound_hopf,
    gamma_values,
    solve_lambda_i,
    spectrum,
    theta_power_integral,
)
from .errors import (
    BoxTooLargeError,
    BrwError,
    ConfigError,
    DegenerateInputError,
    DegenerateKernelError,
    DivergentGreenError,
    EstimationImpossibleError,
    InternalConsistencyFailure,
    InvalidParameterError,
    NumericalDegeneracyError,
    QuadratureFailureError,
    SeriesTooLongError,
    SolverOverflowError,
    SymbolDegeneracyError,
)
from .gamma import (
    EigenDecomposition,
    GammaCurve,
    GammaMatrix,
    SourceConfiguration,
    build_gamma,
    eigs,
    gamma_curve,
    jacobi_eigh,
    simplex_sources,
)
from .green import (
    GreenValue,
    green,
    green_batch,
    green_zero,
    green_zero_is_divergent,
)
from .kernels import (
    JumpKernel,
    TailSpec,
    ValidationReport,
    VarianceClass,
    default_truncation_radius,
    kernel_from_entries,
    kernel_from_text,
    kernel_to_text,
    make_heavy_tail_kernel,
    make_simple_kernel,
    validate,
    variance_class,
)
from .oracles import (
    BranchingLaw,
    M1Evolution,
    TruncatedOperator,
    binary_law,
    critical_binary_law,
    evolve_m1,
    green_bessel_simple,
    green_time_domain,
    surviving_mass,
    transition_prob,
    truncated_top_eigs,
)
from .simplex import (
    SimplexConfiguration,
    is_permutation_symmetric,
    simplex_betas,
    simplex_lambdas,
)
from .simulate import (
    SimulationOutcome,
    estimate_growth_rate,
    estimate_lambda0,
    simulate_brw,
)
from .symbol import (
    SymbolEvaluator,
    get_evaluator,
    symbol_alpha_bounds,
    symbol_max_s,
    symbol_phi,
)

__version__ = "0.1.0"
