"""Score-based estimation of higher-order information measures.

Total correlation, dual total correlation, S-information, O-information and
per-variable O-information gradients for continuous multivariate systems,
estimated from denoising score functions (one amortized network or exact
Gaussian scores), with synthetic benchmark generators and a closed-form
Gaussian oracle for verification.
"""

from .diffusion import DiffusionSchedule, KernelCoeffs, coeffs, perturb, sample_time
from .estimators import (
    MeasureEstimate,
    MissingTaskError,
    OInfoEstimates,
    ScoreSource,
    estimate_dtc,
    estimate_gradient,
    estimate_gradients,
    estimate_kl,
    estimate_mi,
    estimate_oinfo,
    estimate_s,
    estimate_tc,
)
from .oracle import GaussianScoreSource, MeasureSet, gaussian_entropy, gradient_vector, measures
from .rng import RngStream
from .score_net import ModelScoreSource, NetConfig, default_net_config
from .systems import (
    CovarianceMatrix,
    Dataset,
    SystemSpec,
    VariablePartition,
    build_cov,
    sample,
    sample_system,
)
from .tasks import Conditional, Joint, Marginal, ScoreTask, SubsystemJoint
from .trainer import TrainConfig, TrainedModel, fit, load_model, required_tasks, save_model

__version__ = "0.1.0"

__all__ = [
    "Conditional",
    "CovarianceMatrix",
    "Dataset",
    "DiffusionSchedule",
    "GaussianScoreSource",
    "Joint",
    "KernelCoeffs",
    "Marginal",
    "MeasureEstimate",
    "MeasureSet",
    "MissingTaskError",
    "ModelScoreSource",
    "NetConfig",
    "OInfoEstimates",
    "RngStream",
    "ScoreSource",
    "ScoreTask",
    "SubsystemJoint",
    "SystemSpec",
    "TrainConfig",
    "TrainedModel",
    "VariablePartition",
    "build_cov",
    "coeffs",
    "default_net_config",
    "estimate_dtc",
    "estimate_gradient",
    "estimate_gradients",
    "estimate_kl",
    "estimate_mi",
    "estimate_oinfo",
    "estimate_s",
    "estimate_tc",
    "fit",
    "gaussian_entropy",
    "gradient_vector",
    "load_model",
    "measures",
    "perturb",
    "required_tasks",
    "sample",
    "sample_system",
    "sample_time",
    "save_model",
]
