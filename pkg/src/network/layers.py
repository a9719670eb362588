# Импорт необходимых библиотек
from collections import OrderedDict    # Имена слоёв внутри nn.Sequential

import torch.nn as nn                  # Строительные блоки сети


class ConvBNReLU(nn.Sequential):
    """
    Свёртка с отражающим дополнением, batch normalization и ReLU.

    Args:
        in_channels (int): Входные каналы
        out_channels (int): Выходные каналы
        kernel_size (int): Размер ядра (1 или 3)
        stride (int): Шаг свёртки
        bn_momentum (float): Вес нового батча в скользящей статистике BN
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3,
                 stride: int = 1, bn_momentum: float = 1.0 / 5000.0):
        super().__init__(OrderedDict([
            ("conv", nn.Conv2d(in_channels, out_channels, kernel_size, stride=stride,
                               padding=kernel_size // 2, padding_mode="reflect", bias=False)),
            ("norm", nn.BatchNorm2d(out_channels, momentum=bn_momentum)),
            ("relu", nn.ReLU(inplace=True)),
        ]))


class ResidualBlock(nn.Module):
    """
    Остаточный блок: out = x + ConvBNReLU(ConvBNReLU(x)), ядра 3x3.

    Пространственный размер и число каналов сохраняются.
    """

    def __init__(self, channels: int, bn_momentum: float = 1.0 / 5000.0):
        super().__init__()
        self.channels = channels
        self.body = nn.Sequential(
            ConvBNReLU(channels, channels, 3, bn_momentum=bn_momentum),
            ConvBNReLU(channels, channels, 3, bn_momentum=bn_momentum),
        )

    def forward(self, x):
        if x.shape[1] != self.channels:
            raise ValueError(f"residual block expects {self.channels} channels, got {x.shape[1]}")
        return x + self.body(x)
