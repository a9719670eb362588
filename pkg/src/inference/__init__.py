"""
Inference package initialization.
Contains the tri-planar prediction pipeline and label post-processing.
"""
from .pipeline import NetworkPredictor, ProbabilityVolumes, fuse_planes, predict_plane, segment_volume
from .postprocess import assign_labels, filter_components, remove_small_components

__all__ = [
    'NetworkPredictor',
    'ProbabilityVolumes',
    'fuse_planes',
    'predict_plane',
    'segment_volume',
    'assign_labels',
    'filter_components',
    'remove_small_components'
]
