"""Phase-insensitive estimation of an unknown Gaussian process by classical interferometry."""
__version__ = "0.1.0"

from .core import GaussianState, NoiseChannel, Source, SymplecticTransform
from .estimators import EstimateReport, EstimationError
from .interferometer import ExperimentPlan, ProcessParams, SchemeConfig, ShotStats

__all__ = [
    "EstimateReport",
    "EstimationError",
    "ExperimentPlan",
    "GaussianState",
    "NoiseChannel",
    "ProcessParams",
    "SchemeConfig",
    "ShotStats",
    "Source",
    "SymplecticTransform",
]
