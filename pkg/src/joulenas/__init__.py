"""Energy-budgeted detector architecture search toolkit.

Subpackages cover the elastic search space, a small MLP engine with compiled
kernels, the two-stage few-shot energy estimator, budget-constrained
coordinate search, compound scaling, and reproducible experiment harnesses.
"""

__version__ = "0.1.0"

from .arch_space import (  # noqa: F401
    Attention,
    BlockChoice,
    DetectorArchitecture,
    ScaledDetector,
    ScalingFactor,
    StageArchitecture,
    StageKind,
)
from .devices import DeviceId, DeviceRegistry  # noqa: F401
from .energy_estimator import JointEstimator, NormalizationStats, TwoStageEstimator  # noqa: F401
from .iterative_search import SearchConfig, SearchResult  # noqa: F401
from .mlp_core import Network, TrainConfig  # noqa: F401
