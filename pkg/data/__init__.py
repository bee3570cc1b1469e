"""
Data module for mdlnr
Contains schemas, the graph state and synthetic generators
"""

from .errors import (
    CategoryError,
    ConvergenceWarning,
    DataError,
    DimensionMismatchError,
    ReconstructionError,
    SelfLoopError,
    UnknownCategoryError,
)
from .network import NodeFields, WeightCategories, WeightedNetwork
from .schema import (
    Alphabet,
    BaselineConfig,
    Dataset,
    DataKind,
    ModelKind,
    OptimizerConfig,
    PriorHyper,
    RunReport,
)

__all__ = [
    "CategoryError",
    "ConvergenceWarning",
    "DataError",
    "DimensionMismatchError",
    "ReconstructionError",
    "SelfLoopError",
    "UnknownCategoryError",
    "NodeFields",
    "WeightCategories",
    "WeightedNetwork",
    "Alphabet",
    "BaselineConfig",
    "Dataset",
    "DataKind",
    "ModelKind",
    "OptimizerConfig",
    "PriorHyper",
    "RunReport",
]
