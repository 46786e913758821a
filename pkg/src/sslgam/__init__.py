"""Sparse additive models with a two-part spike-and-slab lasso prior.

Smooth terms are reparameterized so each variable's linear and nonlinear
spaces can be selected separately; generalized linear and Cox models are
fitted by EM coordinate descent, tuned by cross-validation over the spike
scale, and summarized with bi-level selection reports and fitted curves.
"""

from .archive import ModelArchive, load_archive, save_archive
from .basis import (
    AdditiveDesign,
    GroupStructure,
    SmoothSpec,
    SmoothTransform,
    build_smooth,
    construct_smooth_data,
    make_group,
    make_predict_dat,
    parse_spec_table,
)
from .cox import SurvivalResponse, breslow_loglik, c_index, cox_deviance, fit_cox
from .families import Family, deviance, get_family
from .glm import FittedModel, fit, kkt_violations, predict
from .prior import (
    InclusionState,
    SSLConfig,
    de_density,
    e_step_group,
    e_step_linear,
    penalty_scale,
    update_theta,
)
from .selection import (
    CVResult,
    SelectionReport,
    curve_data,
    metrics_binomial,
    select_variables,
    tune,
)
from .simulate import SimOutput, sim_bai

__version__ = "0.1.0"

__all__ = [
    "AdditiveDesign",
    "CVResult",
    "Family",
    "FittedModel",
    "GroupStructure",
    "InclusionState",
    "ModelArchive",
    "SSLConfig",
    "SelectionReport",
    "SimOutput",
    "SmoothSpec",
    "SmoothTransform",
    "SurvivalResponse",
    "breslow_loglik",
    "build_smooth",
    "c_index",
    "construct_smooth_data",
    "cox_deviance",
    "curve_data",
    "de_density",
    "deviance",
    "e_step_group",
    "e_step_linear",
    "fit",
    "fit_cox",
    "get_family",
    "kkt_violations",
    "load_archive",
    "make_group",
    "make_predict_dat",
    "metrics_binomial",
    "parse_spec_table",
    "penalty_scale",
    "predict",
    "save_archive",
    "select_variables",
    "sim_bai",
    "tune",
    "update_theta",
]
