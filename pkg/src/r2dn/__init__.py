"""Direct parameterizations of robust recurrent models.

Contracting and incrementally Lipschitz-bounded recurrent networks built as
the feedback interconnection of a certified LTI system with a 1-Lipschitz
feedforward network, plus a recurrent-equilibrium baseline, empirical
verification tools, a scalar training benchmark, and timing benchmarks.
"""

from ._kernels import BACKEND
from .checkpoint import load as load_checkpoint
from .checkpoint import save as save_checkpoint
from .lipschitz_net import LipschitzNet, SandwichLayer, empirical_lipschitz_lb
from .lti_param import (
    ExplicitLTI,
    LMISpec,
    cayley,
    construct_contracting,
    construct_lipschitz,
    contraction_spec,
    lipschitz_spec,
    lmi_residual,
    low_rank_H_term,
)
from .model import (
    DirectParams,
    ExplicitR2DN,
    R2DNConfig,
    init_params,
    param_specs,
    realize,
    simulate,
)
from .ren import (
    ExplicitREN,
    RENConfig,
    equilibrium_residual,
    ren_realize,
    solve_equilibrium,
)
from .train import TrainSchedule, fit_expressivity, loss_grad, nrmse, target_f
from .verify import check_dissipation, estimate_contraction, estimate_gain

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DirectParams",
    "ExplicitLTI",
    "ExplicitR2DN",
    "ExplicitREN",
    "LMISpec",
    "LipschitzNet",
    "R2DNConfig",
    "RENConfig",
    "SandwichLayer",
    "TrainSchedule",
    "cayley",
    "check_dissipation",
    "construct_contracting",
    "construct_lipschitz",
    "contraction_spec",
    "empirical_lipschitz_lb",
    "equilibrium_residual",
    "estimate_contraction",
    "estimate_gain",
    "fit_expressivity",
    "init_params",
    "lipschitz_spec",
    "lmi_residual",
    "load_checkpoint",
    "loss_grad",
    "low_rank_H_term",
    "nrmse",
    "param_specs",
    "realize",
    "ren_realize",
    "save_checkpoint",
    "simulate",
    "solve_equilibrium",
    "target_f",
]
