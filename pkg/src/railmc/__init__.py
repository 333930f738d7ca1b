"""Non-homogeneous Markov chain models of train delay evolution.

Provides the Markov property test for sparse transition counts, four
transition-matrix recovery strategies (including Gaussian kernel density
estimation), Chapman-Kolmogorov delay forecasting, and the composite
F1/RWMSE prediction score, plus a CLI tying them together.
"""

from .config import RunConfig
from .core import (
    CountTensor,
    DelayDistribution,
    DelaySeries,
    FrequencyEstimates,
    RowStatus,
    StateSpace,
    TransitionMatrix,
    build_count_tensor,
    estimate_frequencies,
)
from .forecast import MetricConfig, Prediction

__version__ = "0.1.0"

__all__ = [
    "RunConfig",
    "StateSpace",
    "DelaySeries",
    "CountTensor",
    "FrequencyEstimates",
    "TransitionMatrix",
    "DelayDistribution",
    "RowStatus",
    "MetricConfig",
    "Prediction",
    "build_count_tensor",
    "estimate_frequencies",
    "__version__",
]
