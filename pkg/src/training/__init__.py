"""
Training package initialization.
Contains the loss functions, the optimizer and learning-rate schedule, BN calibration and the epoch loop.
"""
from .objective import LossConfig, cross_entropy, dice_loss, soft_dice, total_loss
from .schedule import OptimState, TrainConfig, cyclic_lr, freeze_mask, sgd_momentum_step
from .trainer import TrainResult, calibrate_batchnorm, train

__all__ = [
    'LossConfig',
    'cross_entropy',
    'dice_loss',
    'soft_dice',
    'total_loss',
    'OptimState',
    'TrainConfig',
    'cyclic_lr',
    'freeze_mask',
    'sgd_momentum_step',
    'TrainResult',
    'calibrate_batchnorm',
    'train'
]
