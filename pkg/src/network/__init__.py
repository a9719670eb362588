"""
Network package initialization.
Contains the DenseNet encoder, the U-net decoder, the M1/M2 segmentation network and weight archives.
"""
from .config import NetworkConfig
from .densenet import DenseNetEncoder, FeaturePyramid, pyramid_channels
from .layers import ConvBNReLU, ResidualBlock
from .model import Decoder, Precoder, SegmentationNetwork, count_parameters, model_forward
from .weights import LoadReport, WeightArchive, build_model, load_archive, load_weights, save_archive

__all__ = [
    'NetworkConfig',
    'DenseNetEncoder',
    'FeaturePyramid',
    'pyramid_channels',
    'ConvBNReLU',
    'ResidualBlock',
    'Decoder',
    'Precoder',
    'SegmentationNetwork',
    'count_parameters',
    'model_forward',
    'LoadReport',
    'WeightArchive',
    'build_model',
    'load_archive',
    'load_weights',
    'save_archive'
]
