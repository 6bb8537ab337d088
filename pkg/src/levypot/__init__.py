"""levypot: numerical laboratory for symmetric pure-jump Levy operators.

Layers: model (Levy measure, symbol, scale functions), heatkernel
(Fourier inversion), potential (fundamental solution), killed (exit
simulation and domain kernels), harmonic (Poisson extensions and the
estimate verifications), and the expcli front end.
"""

from .model import (
    LevyModel,
    MajorantProfile,
    NotInYError,
    QuadratureError,
    ScaleFunctions,
    ScalingAudit,
    audit_scaling,
    majorant,
    make_model,
    scale_eval,
    scale_functions,
    symbol,
    y_norm,
)
from .heatkernel import (
    QuadratureSpec,
    ck_residual,
    grad_time_integral,
    heat_kernel,
    heat_kernel_grad,
)
# NB: the bare `potential` op stays in its submodule (the name would
# shadow the module itself at package level)
from .potential import classify_transience, potential_grad, potential_kernel
from .killed import (
    DomainSpec,
    EstimatorResult,
    ExitBatch,
    SimConfig,
    VerificationReport,
    boundary_decay_check,
    exit_moment,
    green_function,
    grad_green,
    killed_density,
    poisson_kernel,
    regularized_poisson,
    sample_exit,
)
from .harmonic import (
    BumpShell,
    GradientReport,
    HarmonicField,
    HarnackReport,
    HeavyTailData,
    IndicatorShell,
    annulus_split_check,
    dynkin_residual,
    gradient_bound_report,
    green_gradient_bound,
    harmonic_extend,
    harnack_report,
    mvp_residual,
)

__version__ = "0.1.0"
