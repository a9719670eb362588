"""
Utils package initialization.
Contains logging, monitoring, configuration and artifact helpers.
"""
__version__ = "1.0.0"

from .analytics import TrainingAnalytics
from .errors import ConfigError, TrainingDivergedError, WeightArchiveError
from .files import RunManifest, atomic_path, read_json, write_json
from .logger import AppLogger
from .monitor import PerformanceMonitor

__all__ = [
    'TrainingAnalytics',
    'ConfigError',
    'TrainingDivergedError',
    'WeightArchiveError',
    'RunManifest',
    'atomic_path',
    'read_json',
    'write_json',
    'AppLogger',
    'PerformanceMonitor'
]
