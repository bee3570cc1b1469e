"""
MDL Network Reconstruction Configuration
Central configuration for the reconstruction library and CLI
"""

from pathlib import Path

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables
load_dotenv()

# Paths
BASE_DIR = Path(__file__).parent
DATA_DIR = BASE_DIR / "data"

# Application Settings
APP_NAME = "mdlnr - MDL network reconstruction"
APP_VERSION = "1.0.0"

# Prior hyperparameters (description-length conventions)
DEFAULT_DELTA = 1e-8  # grid spacing of weight categories
DEFAULT_LAMBDA = 1.0  # initial scale of the quantized Laplace

# Optimizer defaults
DEFAULT_KAPPA = 1.0  # candidates per node
DEFAULT_TOL = 1e-6  # nats
DEFAULT_MAX_SWEEPS = 50
DEFAULT_BISECTION_ITERS = 40

# Exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NOT_CONVERGED = 3


class Settings(BaseSettings):
    """Runtime settings read from MDLNR_* environment variables (or a .env file)"""

    model_config = SettingsConfigDict(env_prefix="MDLNR_", env_file=".env", extra="ignore")

    threads: int = 1
    log_level: str = "INFO"
    weight_range: float = 10.0  # bisection interval is [-range, range]
    theta_range: float = 10.0
    decimation_max_nodes: int = 300
    decimation_warn_nodes: int = 100


settings = Settings()
