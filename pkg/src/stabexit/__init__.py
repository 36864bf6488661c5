"""Mean exit times of symmetric alpha-stable Levy processes from balls.

Closed-form values, principal-value quadrature of the generator identities
behind them, and Monte Carlo estimation for arbitrary spectral measures.
"""

from .core import (
    ProfileFunction,
    StabilityIndex,
    c_alpha,
    kappa,
    mean_exit_closed_form,
    profile,
)
from .errors import (
    ConfigError,
    CrossCheckError,
    DegenerateDirectionError,
    DomainError,
    QuadratureError,
    StabExitError,
)
from .pvquad import (
    PVQuadResult,
    PVQuadSpec,
    apply_K,
    apply_K_nu,
    apply_Kv,
    getoor_identity_check,
    pv_fractional_integral_1d,
)
from .simulate import (
    CompoundPoissonGaussian,
    ExactIncrement,
    ExitTimeConfig,
    ExitTimeEstimate,
    StableScale,
    c1,
    estimate_mean_exit,
    sample_sas_1d,
    simulate_exit_cpg,
    simulate_exit_exact,
)
from .spectral import (
    SpectralMeasure,
    big_jump_intensity,
    nu_ball_complement,
    sample_big_jump,
    sample_direction,
    small_jump_covariance,
    symmetrize,
    total_mass,
)

__version__ = "0.1.0"
