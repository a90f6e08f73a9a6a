"""Value of information for a learning monopolist facing growing demand.

Modules
-------
filter_core    linear-Gaussian state-space model and Kalman recursion
steady_state   long-run prior covariance (closed form and iteration)
voi_analysis   stage value of information as a function of signal noise
market_sim     Monte Carlo simulation of myopic pricing with learning
nonmyopic      dynamic pricing with multiplicative noise (value iteration)
cli            command-line front end
"""
__version__ = "0.1.0"

from .errors import (ConfigError, DomainError, GridEscape, GridEscapeWarning, GrowVoIError,
                     NoConvergence, NumericalError, SingularInnovation)
from .filter_core import Belief, KalmanStep, StateSpaceModel, covariance_path, kalman_gain, update
from .steady_state import SteadyState, riccati_fixed_point, sigma_star_closed_form, steady_state
from .voi_analysis import Classification, GrowthRegion, VoICurve, growth_threshold, voi_curve
from .market_sim import SimConfig, SimResult, simulate
from .nonmyopic import NonMyopicModel, ValueFunctionGrid, solve_bellman

__all__ = [
    "__version__",
    "GrowVoIError", "ConfigError", "DomainError", "NumericalError", "SingularInnovation",
    "NoConvergence", "GridEscape", "GridEscapeWarning",
    "StateSpaceModel", "Belief", "KalmanStep", "kalman_gain", "update", "covariance_path",
    "SteadyState", "riccati_fixed_point", "sigma_star_closed_form", "steady_state",
    "Classification", "GrowthRegion", "VoICurve", "growth_threshold", "voi_curve",
    "SimConfig", "SimResult", "simulate",
    "NonMyopicModel", "ValueFunctionGrid", "solve_bellman",
]
