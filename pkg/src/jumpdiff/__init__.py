"""Simulation and nonparametric estimation for scalar Markovian semimartingales
with state-dependent jump activity."""

from .models import (
    ModelSpec,
    StableLikeJumpSpec,
    StateFunction,
    build_capped_model,
    build_example_model,
    build_levy_model,
    build_model_from_config,
    freeze,
    jump_density,
    total_levy_density,
)
from .design import (
    DesignFunction,
    builtin_drift_f,
    builtin_ja_f,
    builtin_sigma_f,
    design_function,
    rescale,
    square,
    check_class,
)
from .sampling import (
    RngStream,
    sample_sas,
    sample_tail_jumps,
    stable_constant,
    stable_increment,
)
from .functionals import (
    QuadratureSettings,
    alpha_clt_sd,
    drift_clt_sd,
    filtered_drift_clt_sd,
    frac_functional,
    gen_star,
    jump_gen_star,
    levy_expectation,
    levy_moments,
    variance_factor_s2,
)

__version__ = "0.1.0"
