"""
Reconstruction Errors
Exception hierarchy shared by the graph state, the services and the CLI
"""


class ReconstructionError(Exception):
    """Base class for all library errors"""


class SelfLoopError(ReconstructionError, ValueError):
    """An entry (i, i) was addressed; the network has no self-loops"""

    def __init__(self, node: int):
        super().__init__(f"Self-loop at node {node} is not allowed")
        self.node = node


class UnknownCategoryError(ReconstructionError, KeyError):
    """A nonzero weight does not match any existing weight category"""

    def __init__(self, value: float):
        super().__init__(f"Weight {value!r} does not match any category")
        self.value = value

    def __str__(self) -> str:
        return self.args[0]


class CategoryError(ReconstructionError, ValueError):
    """Invalid category data: zero/off-grid values, duplicates, empty counts, K > E"""


class DataError(ReconstructionError, ValueError):
    """Invalid input data or files"""


class DimensionMismatchError(ReconstructionError, ValueError):
    """Two networks (or a network and a dataset) disagree on the number of nodes"""


class ConvergenceWarning(UserWarning):
    """An iterative procedure stopped before meeting its convergence criterion"""
