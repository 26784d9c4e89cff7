from codband.models.bayes_linear import LinearPosterior, Observation, RidgeStatistics
from codband.models.change_detect import DetectorConfig, DetectorState, recommended_tau
from codband.models.dp_pool import GlobalModel, ModelPool

__all__ = [
    "DetectorConfig",
    "DetectorState",
    "GlobalModel",
    "LinearPosterior",
    "ModelPool",
    "Observation",
    "RidgeStatistics",
    "recommended_tau",
]
