"""Exception types raised by the synchronizer package."""

from typing import List, Optional


class SyncError(Exception):
    """동기화 처리 실패의 공통 부모."""
    pass


class InvalidArgumentError(SyncError, ValueError):
    """파라미터가 허용 범위를 벗어남."""
    pass


class InsufficientSamplesError(SyncError):
    """입력 신호가 처리에 필요한 길이보다 짧음."""
    pass


class DegenerateInputError(SyncError):
    """Zero-energy input: no unique correlation peak exists."""
    pass


class ModelValidityError(SyncError):
    """Accumulated shift too large for the STFT-domain phase model."""
    pass


class TrajectoryError(SyncError):
    """SRO trajectory does not cover the requested frames."""
    pass


class CoarseSyncError(SyncError):
    """Coarse synchronization unavailable (too little activity or boundary peak)."""
    pass


class NotSettledError(SyncError):
    """Smoothed coherence product is still zero."""
    pass


class GeometryError(SyncError):
    """Node and source positions coincide."""
    pass


class IngestionError(SyncError):
    """Audio could not be read (missing, empty, unsupported format)."""
    pass


class NoConsensusError(SyncError):
    """RANSAC consensus below the required fraction.

    The best-effort estimate is attached as ``best_estimate``.  Raised from
    estimate_sto, it also carries the collected ``observations``.
    """

    def __init__(self, message: str, best_estimate=None, observations=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.observations = list(observations or [])


class ConfigError(SyncError):
    """설정 파일 검증 실패."""

    def __init__(self, message: str, errors: Optional[List[str]] = None):
        super().__init__(message)
        self.errors = errors or []
