"""wasn-sync: sampling-rate and sampling-time offset estimation for two-node acoustic sensor networks."""

from .async_model import compensate_sro
from .errors import ConfigError, SyncError
from .estimators import DwacdEstimator, DwacdParams, EstimateTrace, get_estimator
from .sad import SadParams
from .scene import ScenarioSpec, generate_scenario, scenario_preset
from .sro_model import OuParams, simulate_trajectory
from .sto import StoParams, estimate_sto

__version__ = '0.1.0'

__all__ = [
    '__version__',
    'SyncError',
    'ConfigError',
    'OuParams',
    'simulate_trajectory',
    'ScenarioSpec',
    'generate_scenario',
    'scenario_preset',
    'SadParams',
    'DwacdParams',
    'DwacdEstimator',
    'EstimateTrace',
    'get_estimator',
    'compensate_sro',
    'StoParams',
    'estimate_sto',
]
