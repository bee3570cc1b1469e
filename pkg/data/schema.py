"""
Reconstruction Data Schema
Pydantic models for datasets, model kinds, hyperparameters, optimizer settings and reports
"""

from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config import (
    DEFAULT_BISECTION_ITERS,
    DEFAULT_DELTA,
    DEFAULT_KAPPA,
    DEFAULT_LAMBDA,
    DEFAULT_MAX_SWEEPS,
    DEFAULT_TOL,
    settings,
)
from data.errors import DataError


# ============== ENUMS ==============

class Dynamics(str, Enum):
    KINETIC = "kinetic"
    EQUILIBRIUM = "equilibrium"  # pseudolikelihood


class Alphabet(str, Enum):
    BINARY = "binary"  # {-1, +1}
    ZERO_VALUED = "zero_valued"  # {-1, 0, +1}


class DataKind(str, Enum):
    IID = "iid"
    MARKOV = "markov"


class SweepOrder(str, Enum):
    FIXED = "fixed"
    SHUFFLED = "shuffled"


class CandidateMode(str, Enum):
    EXACT = "exact"
    NND = "nnd"


class InitialState(str, Enum):
    RANDOM = "random"
    PRESENT = "present"  # all nodes +1


ALPHABET_VALUES = {
    Alphabet.BINARY: frozenset({-1, 1}),
    Alphabet.ZERO_VALUED: frozenset({-1, 0, 1}),
}


# ============== MODEL KIND ==============

class ModelKind(BaseModel):
    """Generative model: dynamics x alphabet"""
    model_config = ConfigDict(frozen=True)

    dynamics: Dynamics
    alphabet: Alphabet = Alphabet.BINARY

    @classmethod
    def parse(cls, token: str) -> "ModelKind":
        """Parse a CLI token: kinetic, equilibrium, kinetic-z, equilibrium-z"""
        base, _, suffix = token.strip().lower().partition("-")
        if suffix not in ("", "z"):
            raise ValueError(f"Unknown model kind: {token}")
        try:
            dynamics = Dynamics(base)
        except ValueError:
            raise ValueError(f"Unknown model kind: {token}") from None
        return cls(dynamics=dynamics, alphabet=Alphabet.ZERO_VALUED if suffix else Alphabet.BINARY)

    @property
    def token(self) -> str:
        suffix = "-z" if self.zero_valued else ""
        return f"{self.dynamics.value}{suffix}"

    @property
    def kinetic(self) -> bool:
        return self.dynamics == Dynamics.KINETIC

    @property
    def zero_valued(self) -> bool:
        return self.alphabet == Alphabet.ZERO_VALUED

    @property
    def data_kind(self) -> DataKind:
        return DataKind.MARKOV if self.kinetic else DataKind.IID


# ============== DATASET ==============

class Dataset(BaseModel):
    """
    N x M matrix of observed node states.
    Rows are nodes, columns are samples (iid) or consecutive time steps (markov).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    states: np.ndarray
    kind: DataKind = DataKind.IID
    alphabet: Alphabet = Alphabet.BINARY
    labels: Optional[List[str]] = None

    @field_validator("states", mode="before")
    @classmethod
    def _as_matrix(cls, value):
        arr = np.asarray(value)
        if arr.ndim != 2:
            raise DataError(f"State matrix must be 2-D, got shape {arr.shape}")
        if arr.size and not np.all(np.equal(np.mod(arr, 1), 0)):
            raise DataError("State matrix must hold integer values")
        return arr.astype(np.int8)

    @model_validator(mode="after")
    def _check_alphabet(self) -> "Dataset":
        allowed = ALPHABET_VALUES[self.alphabet]
        if self.states.size:
            bad = ~np.isin(self.states, list(allowed))
            if bad.any():
                row, col = np.argwhere(bad)[0]
                raise DataError(
                    f"Value {int(self.states[row, col])} at row {row + 1}, column {col + 1} "
                    f"is outside the {self.alphabet.value} alphabet"
                )
        if self.kind == DataKind.MARKOV and self.n_samples == 1:
            raise DataError("A Markov trajectory needs at least 2 time steps")
        if self.labels is not None and len(self.labels) != self.n_nodes:
            raise DataError(f"Got {len(self.labels)} labels for {self.n_nodes} nodes")
        return self

    @property
    def n_nodes(self) -> int:
        return int(self.states.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.states.shape[1])

    @property
    def n_units(self) -> int:
        """Likelihood terms per node: samples (iid) or transitions (markov)"""
        if self.kind == DataKind.MARKOV:
            return max(self.n_samples - 1, 0)
        return self.n_samples


# ============== HYPERPARAMETERS & CONFIG ==============

class PriorHyper(BaseModel):
    """Quantization grids and Laplace scales of the weight and field priors"""
    delta: float = Field(DEFAULT_DELTA, gt=0)
    lam: float = Field(DEFAULT_LAMBDA, gt=0)
    delta_theta: float = Field(DEFAULT_DELTA, gt=0)
    lambda_theta: float = Field(DEFAULT_LAMBDA, gt=0)


class OptimizerConfig(BaseModel):
    """Settings of the MDL optimizer"""
    kappa: float = Field(DEFAULT_KAPPA, gt=0)
    bisection_iters: int = Field(DEFAULT_BISECTION_ITERS, ge=1)
    sweep_order: SweepOrder = SweepOrder.SHUFFLED
    tol_nats: float = Field(DEFAULT_TOL, gt=0)
    max_sweeps: int = Field(DEFAULT_MAX_SWEEPS, ge=1)
    seed: Optional[int] = None
    candidate_mode: CandidateMode = CandidateMode.EXACT
    nnd_list_length: Optional[int] = Field(None, ge=1)
    nnd_rounds: int = Field(10, ge=1)
    swap_proposals: Optional[int] = Field(None, ge=0)  # default: E per round
    weight_range: float = Field(default_factory=lambda: settings.weight_range, gt=0)
    theta_range: float = Field(default_factory=lambda: settings.theta_range, gt=0)
    optimize_lambda: bool = False
    debug_checks: bool = False
    threads: int = Field(default_factory=lambda: settings.threads, ge=1)

    @property
    def list_length(self) -> int:
        if self.nnd_list_length is not None:
            return self.nnd_list_length
        return int(2 * self.kappa + 8)


class BaselineConfig(BaseModel):
    """Settings shared by the L1, decimation and true-prior baselines"""
    kappa: float = Field(DEFAULT_KAPPA, gt=0)
    max_sweeps: int = Field(100, ge=1)
    tol: float = Field(1e-8, gt=0)  # relative objective change
    candidate_mode: CandidateMode = CandidateMode.EXACT
    weight_range: float = Field(default_factory=lambda: settings.weight_range, gt=0)
    theta_range: float = Field(default_factory=lambda: settings.theta_range, gt=0)
    fit_theta: bool = True
    seed: Optional[int] = None
    threads: int = Field(default_factory=lambda: settings.threads, ge=1)


class McSpec(BaseModel):
    """Monte Carlo settings for macrostate perturbation"""
    t_relax: int = Field(1000, ge=0)  # sweeps
    n_measure: int = Field(2000, ge=2)  # sweeps
    n_blocks: int = Field(10, ge=2)
    x_init: InitialState = InitialState.RANDOM
    r_hat_threshold: float = Field(1.1, gt=1)


class DecimationStop(BaseModel):
    target_edges: Optional[int] = Field(None, ge=0)
    plateau_threshold: float = Field(1e-4, gt=0)
    use_plateau: bool = True
    record_networks: bool = False


# ============== REPORTS ==============

class RunReport(BaseModel):
    """
    Outcome of an MDL reconstruction.
    Carries enough to recompute the description length from its own fields.
    """
    model_config = ConfigDict(populate_by_name=True)

    method: str = "mdl"
    model: str
    description_length: float
    loglik: float
    prior_weights: float
    prior_theta: float
    n_nodes: int
    E: int
    K: int
    categories: List[Tuple[float, int]] = []
    theta_categories: List[Tuple[float, int]] = []
    lam: float = Field(DEFAULT_LAMBDA, alias="lambda")
    delta: float = DEFAULT_DELTA
    lambda_theta: float = DEFAULT_LAMBDA
    delta_theta: float = DEFAULT_DELTA
    sweeps: int = 0
    acceptance: Dict[str, int] = {}
    dl_trajectory: List[float] = []
    converged: bool = True
    weight_range: Optional[float] = None
    seed: Optional[int] = None
    wall_time: float = 0.0
    warnings: List[str] = []


class CvResult(BaseModel):
    """K-fold cross-validation of the L1 penalty"""
    lambda_grid: List[float]
    heldout_mean: List[float]
    lambda_hat: float
    fits: List[List[int]] = []  # per lambda, edge count of each fold fit
    n_folds: int
    refined: bool = False
    E_hat: Optional[int] = None


class DecimationStep(BaseModel):
    E_active: int
    loglik: float
    edges: Optional[List[Tuple[int, int, float]]] = None


class DecimationTrajectory(BaseModel):
    steps: List[DecimationStep] = []
    step_fraction: float
    stop_reason: str = ""  # "target", "plateau heuristic", "exhausted"
    warnings: List[str] = []


class ChainDiagnostics(BaseModel):
    r_hat: List[float] = []
    ess: List[float] = []
    n_chains: int
    burn_in: int
    thin: int
    kept_samples: int = 0
    converged: bool = False
    sufficient: bool = True


class PerturbationResult(BaseModel):
    node_j: int
    z_value: float
    mc_stderr: float
    marginals_before: List[float]
    marginals_after: List[float]
    equilibrated: bool = True
    r_hat: float = 1.0
    method: str = "mcmc glauber"


class KeystoneScan(BaseModel):
    results: List[PerturbationResult] = []
    bin_edges: List[float] = []
    counts: List[int] = []


class NetworkSidecar(BaseModel):
    """JSON companion of a network edge list: categories, fields and metadata"""
    model_config = ConfigDict(populate_by_name=True)

    format_version: str = "1.0"
    n_nodes: int
    E: int
    delta: float = DEFAULT_DELTA
    lam: float = Field(DEFAULT_LAMBDA, alias="lambda")
    categories: List[Tuple[float, int]] = []
    theta: List[float] = []
    delta_theta: float = DEFAULT_DELTA
    lambda_theta: float = DEFAULT_LAMBDA
    labels: Optional[List[str]] = None
    model: Optional[str] = None
