"""Mean-field game edge caching for ultra-dense small-cell networks."""
from .config import ExperimentConfig, default_config, parse_config
from .costs import TerminalCost, instantaneous_cost, lra_cost
from .dynamics import CacheSpec, ContentSpec
from .geometry import NetworkParams, spectral_efficiency
from .solver import GridSpec, MfeSolution, solve_mfe

__all__ = [
    "CacheSpec", "ContentSpec", "ExperimentConfig", "GridSpec", "MfeSolution", "NetworkParams",
    "TerminalCost", "default_config", "instantaneous_cost", "lra_cost", "parse_config",
    "solve_mfe", "spectral_efficiency",
]
