# Импорт необходимых библиотек
import math                             # Округление числа каналов в переходных слоях
from collections import OrderedDict    # Имена слоёв как в распространённой раскладке DenseNet
from dataclasses import dataclass

import torch                            # Конкатенация признаков
import torch.nn as nn                   # Строительные блоки сети
import torch.nn.functional as F


@dataclass
class FeaturePyramid:
    """
    Признаки энкодера на масштабах 1/2, 1/4, 1/8, 1/16, 1/32 входа.

    Attributes:
        features (list): Тензоры (B, C_s, H / 2^(s+1), W / 2^(s+1))
    """
    features: list

    @property
    def channels(self) -> tuple:
        return tuple(f.shape[1] for f in self.features)

    @property
    def sizes(self) -> tuple:
        return tuple(tuple(f.shape[-2:]) for f in self.features)

    def __len__(self):
        return len(self.features)


class DenseLayer(nn.Module):
    """Bottleneck-слой: BN-ReLU-Conv1x1 (bn_size * k) - BN-ReLU-Conv3x3 (k)."""

    def __init__(self, in_channels: int, growth_rate: int, bottleneck_factor: int, bn_momentum: float):
        super().__init__()
        inner = bottleneck_factor * growth_rate
        self.norm1 = nn.BatchNorm2d(in_channels, momentum=bn_momentum)
        self.relu1 = nn.ReLU(inplace=True)
        self.conv1 = nn.Conv2d(in_channels, inner, kernel_size=1, bias=False)
        self.norm2 = nn.BatchNorm2d(inner, momentum=bn_momentum)
        self.relu2 = nn.ReLU(inplace=True)
        self.conv2 = nn.Conv2d(inner, growth_rate, kernel_size=3, padding=1,
                               padding_mode="reflect", bias=False)

    def forward(self, x):
        out = self.conv1(self.relu1(self.norm1(x)))
        return self.conv2(self.relu2(self.norm2(out)))


class DenseBlock(nn.ModuleDict):
    """Плотный блок: каждый слой получает конкатенацию всех предыдущих выходов."""

    def __init__(self, num_layers: int, in_channels: int, growth_rate: int,
                 bottleneck_factor: int, bn_momentum: float):
        super().__init__()
        for i in range(num_layers):
            self[f"denselayer{i + 1}"] = DenseLayer(
                in_channels + i * growth_rate, growth_rate, bottleneck_factor, bn_momentum)

    def forward(self, x):
        features = [x]
        for layer in self.values():
            features.append(layer(torch.cat(features, 1)))
        return torch.cat(features, 1)


class Transition(nn.Sequential):
    """Переходный слой: BN-ReLU-Conv1x1 со сжатием каналов и AvgPool 2x2."""

    def __init__(self, in_channels: int, out_channels: int, bn_momentum: float):
        super().__init__(OrderedDict([
            ("norm", nn.BatchNorm2d(in_channels, momentum=bn_momentum)),
            ("relu", nn.ReLU(inplace=True)),
            ("conv", nn.Conv2d(in_channels, out_channels, kernel_size=1, bias=False)),
            ("pool", nn.AvgPool2d(kernel_size=2, stride=2)),
        ]))


def pyramid_channels(config) -> tuple:
    """
    Число каналов на каждом масштабе пирамиды по рекуррентной формуле:
    c_out = c_in + layers * growth, сжатие в переходных слоях.
    """
    channels = [config.stem_channels]
    c = config.stem_channels
    for i, num_layers in enumerate(config.encoder_blocks):
        c = c + num_layers * config.growth_rate
        channels.append(c)
        if i < len(config.encoder_blocks) - 1:
            c = int(math.floor(c * config.transition_compression))
    return tuple(channels)


class DenseNetEncoder(nn.Module):
    """
    Энкодер DenseNet.

    С stem (M2): Conv7x7/2 - BN - ReLU - MaxPool3x3/2 - плотные блоки.
    Без stem (M1): вход уже имеет stem_channels каналов и половинное
    разрешение, max pool перед первым блоком сохраняется.

    Пирамида признаков снимается после stem (для M1 - сам вход) и после
    каждого плотного блока до переходного слоя; последний блок проходит
    через финальную нормализацию norm5 и ReLU.
    """

    def __init__(self, config, with_stem: bool = True):
        super().__init__()
        self.with_stem = with_stem
        self.in_channels = 3 if with_stem else config.stem_channels
        self.size_divisor = config.size_divisor if with_stem else config.size_divisor // 2
        momentum = config.bn_momentum

        layers = OrderedDict()
        if with_stem:
            layers["conv0"] = nn.Conv2d(3, config.stem_channels, kernel_size=7, stride=2, padding=3,
                                        padding_mode="reflect", bias=False)
            layers["norm0"] = nn.BatchNorm2d(config.stem_channels, momentum=momentum)
            layers["relu0"] = nn.ReLU(inplace=True)
        layers["pool0"] = nn.MaxPool2d(kernel_size=3, stride=2, padding=1)

        c = config.stem_channels
        for i, num_layers in enumerate(config.encoder_blocks):
            layers[f"denseblock{i + 1}"] = DenseBlock(num_layers, c, config.growth_rate,
                                                      config.bottleneck_factor, momentum)
            c = c + num_layers * config.growth_rate
            if i < len(config.encoder_blocks) - 1:
                out = int(math.floor(c * config.transition_compression))
                layers[f"transition{i + 1}"] = Transition(c, out, momentum)
                c = out
        layers["norm5"] = nn.BatchNorm2d(c, momentum=momentum)

        self.features = nn.Sequential(layers)
        self.channels = pyramid_channels(config)

    def forward(self, x) -> FeaturePyramid:
        if x.shape[1] != self.in_channels:
            raise ValueError(f"encoder expects {self.in_channels} input channels, got {x.shape[1]}")
        if any(s % self.size_divisor for s in x.shape[-2:]):
            raise ValueError(f"input size {tuple(x.shape[-2:])} is not divisible by {self.size_divisor}")

        f = self.features
        if self.with_stem:
            x = f.relu0(f.norm0(f.conv0(x)))
        taps = [x]
        x = f.pool0(x)

        blocks = [name for name, _ in f.named_children() if name.startswith("denseblock")]
        for i, name in enumerate(blocks):
            x = getattr(f, name)(x)
            if i == len(blocks) - 1:
                taps.append(F.relu(f.norm5(x)))
            else:
                taps.append(x)
                x = getattr(f, f"transition{i + 1}")(x)
        return FeaturePyramid(taps)
