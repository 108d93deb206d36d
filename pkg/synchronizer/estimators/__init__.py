"""SRO estimators.

Estimators register by name so the experiment runner and the CLI can pick
one from config.  Only DWACD is implemented.
"""

from typing import Dict, Type

from ..errors import InvalidArgumentError
from ..sad import SadParams
from .base import EstimateTrace, SroEstimator, SroTracePoint, delay_from_sro
from .dwacd import (
    DwacdEstimator,
    DwacdParams,
    DwacdState,
    coarse_sync,
    coherence_product,
    estimate_coherence,
    run_dwacd,
    sro_from_smoothed,
    update_smoothed,
)


ESTIMATORS: Dict[str, Type[SroEstimator]] = {
    DwacdEstimator.name: DwacdEstimator,
}


def get_estimator(name: str, params=None, sad: SadParams = SadParams()) -> SroEstimator:
    """Instantiate a registered estimator with its default parameters unless given."""
    if name not in ESTIMATORS:
        raise InvalidArgumentError(f"Unknown estimator '{name}', available: {sorted(ESTIMATORS)}")
    cls = ESTIMATORS[name]
    if params is None:
        return cls(sad=sad)
    return cls(params, sad=sad)


__all__ = [
    'ESTIMATORS',
    'get_estimator',
    'SroEstimator',
    'EstimateTrace',
    'SroTracePoint',
    'delay_from_sro',
    'DwacdEstimator',
    'DwacdParams',
    'DwacdState',
    'coarse_sync',
    'estimate_coherence',
    'coherence_product',
    'update_smoothed',
    'sro_from_smoothed',
    'run_dwacd',
]
