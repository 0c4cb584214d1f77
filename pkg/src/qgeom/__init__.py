"""Q-curvature and its companion tensors on model manifolds, computed with Taylor jets.

The modules stack as follows: :mod:`jets` (truncated Taylor arithmetic),
:mod:`geometry` (chart tensor calculus), :mod:`qcurvature` (Schouten, Weyl,
Bach, T, J, Q, Paneitz), :mod:`variations` (linearisations, adjoints and
finite-difference oracles), :mod:`models` (tori, spheres, products and
perturbations), :mod:`quadrature` (tensor-product rules) and
:mod:`report` / :mod:`cli` (verification suite and command line).
"""

from .errors import (ArgumentError, DomainError, ModelDefinitionError, PreconditionError,
                     SingularValueError)
from .geometry import MetricSample, TensorValue, metric_sample
from .jets import Jet, extract_partial, jet_variable, variables
from .models import ModelManifold, get_model, list_models, model_ids
from .qcurvature import (bach, j_tensor, paneitz_apply, q_curvature, schouten_weyl,
                         script_l_apply, t_tensor, weyl_norm2)
from .quadrature import build_rule, integrate_scalar, volume
from .report import CONVENTIONS_VERSION, RunConfig, VerificationReport, run_suite

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "DomainError", "ModelDefinitionError", "PreconditionError",
    "SingularValueError", "MetricSample", "TensorValue", "metric_sample", "Jet",
    "extract_partial", "jet_variable", "variables", "ModelManifold", "get_model", "list_models",
    "model_ids", "bach", "j_tensor", "paneitz_apply", "q_curvature", "schouten_weyl",
    "script_l_apply", "t_tensor", "weyl_norm2", "build_rule", "integrate_scalar", "volume",
    "CONVENTIONS_VERSION", "RunConfig", "VerificationReport", "run_suite",
]
