# Импорт необходимых библиотек
from collections import OrderedDict    # Имена слоёв ветвей precoder

import torch                            # Тензорные операции
import torch.nn as nn                   # Строительные блоки сети
import torch.nn.functional as F         # Upsample и sigmoid

from network.config import NetworkConfig                                  # Гиперпараметры сети
from network.densenet import DenseNetEncoder, FeaturePyramid, pyramid_channels  # Энкодер и его пирамида
from network.layers import ConvBNReLU, ResidualBlock

# Имена выходных голов в порядке каналов предсказания
HEAD_NAMES = ("wt", "tc", "et")

# Префикс параметров, принадлежащих энкодеру
ENCODER_PREFIX = "encoder."


def is_encoder_parameter(name: str) -> bool:
    return name.startswith(ENCODER_PREFIX)


def count_parameters(module: nn.Module, trainable_only: bool = False) -> int:
    """Число скалярных параметров модуля."""
    return sum(p.numel() for p in module.parameters() if p.requires_grad or not trainable_only)


class Precoder(nn.Module):
    """
    Обучаемый вход варианта M1.

    Каждая модальность обрабатывается своей ветвью:
    ConvBNReLU 3x3 со stride 2 (3 -> w каналов), затем остаточные блоки
    R1 и R2. Выходы ветвей конкатенируются в stem_channels каналов на
    половинном разрешении, что совпадает с выходом stem DenseNet.
    """

    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.num_modalities = config.num_modalities
        width = config.precoder_width
        momentum = config.bn_momentum
        self.branches = nn.ModuleList([
            nn.Sequential(OrderedDict([
                ("down", ConvBNReLU(3, width, 3, stride=2, bn_momentum=momentum)),
                ("r1", ResidualBlock(width, momentum)),
                ("r2", ResidualBlock(width, momentum)),
            ]))
            for _ in range(config.num_modalities)
        ])

    def forward(self, x):
        """
        Args:
            x (torch.Tensor): (B, M, 3, H, W)

        Returns:
            torch.Tensor: (B, stem_channels, H/2, W/2)
        """
        if x.shape[1] != self.num_modalities:
            raise ValueError(f"precoder expects {self.num_modalities} modality stacks, got {x.shape[1]}")
        return torch.cat([branch(x[:, m]) for m, branch in enumerate(self.branches)], dim=1)


class Decoder(nn.Module):
    """
    Многомасштабный декодер U-net.

    Самый глубокий масштаб проходит через 1x1 ConvBNReLU и остаточные
    блоки. Далее для каждого более мелкого масштаба: nearest-upsample x2,
    конкатенация со skip-признаками, 1x1 ConvBNReLU до ширины масштаба,
    остаточные блоки. В конце upsample x2 до разрешения входа и три
    независимые 1x1 головы (wt, tc, et).

    Args:
        skip_channels (tuple): Каналы skip-признаков по масштабам, от мелкого к глубокому
        widths (tuple): Ширины декодера, от глубокого масштаба к мелкому
        num_blocks (int): Остаточных блоков на масштаб
        bn_momentum (float): Вес нового батча в статистике BN
    """

    def __init__(self, skip_channels, widths, num_blocks: int = 2, bn_momentum: float = 1.0 / 5000.0):
        super().__init__()
        if len(skip_channels) != len(widths):
            raise ValueError(f"decoder needs one width per skip scale: {len(skip_channels)} scales, "
                             f"{len(widths)} widths")
        self.skip_channels = tuple(skip_channels)

        # Стадии идут от глубокого масштаба к мелкому
        stages = []
        previous = 0
        for k, width in enumerate(widths):
            scale = len(skip_channels) - 1 - k
            stages.append(nn.Sequential(
                ConvBNReLU(previous + skip_channels[scale], width, 1, bn_momentum=bn_momentum),
                *[ResidualBlock(width, bn_momentum) for _ in range(num_blocks)],
            ))
            previous = width
        self.stages = nn.ModuleList(stages)
        self.heads = nn.ModuleDict({name: nn.Conv2d(previous, 1, kernel_size=1) for name in HEAD_NAMES})

    def forward(self, skips: list):
        """
        Args:
            skips (list): Skip-признаки по масштабам, от мелкого к глубокому

        Returns:
            torch.Tensor: Логиты (B, 3, H, W) в порядке wt, tc, et
        """
        if len(skips) != len(self.skip_channels):
            raise ValueError(f"pyramid scale mismatch: decoder expects {len(self.skip_channels)} scales, "
                             f"got {len(skips)}")

        x = None
        for k, stage in enumerate(self.stages):
            # skip-признаки берутся с конца пирамиды
            skip = skips[len(skips) - 1 - k]
            if x is not None:
                x = F.interpolate(x, scale_factor=2, mode="nearest")
                if x.shape[-2:] != skip.shape[-2:]:
                    raise ValueError(f"pyramid scale mismatch: upsampled {tuple(x.shape[-2:])} "
                                     f"vs skip {tuple(skip.shape[-2:])}")
                skip = torch.cat([x, skip], dim=1)
            x = stage(skip)

        # Последний upsample до разрешения входа
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        return torch.cat([self.heads[name](x) for name in HEAD_NAMES], dim=1)


class SegmentationNetwork(nn.Module):
    """
    U-net с предобученным энкодером DenseNet.

    M1: precoder -> энкодер без stem -> декодер.
    M2: общий энкодер со stem применяется к каждой модальности отдельно,
        skip-признаки всех модальностей конкатенируются на каждом масштабе.

    При freeze_encoder параметры энкодера не получают градиентов, а при
    freeze_bn_stats энкодер остаётся в режиме фиксированной статистики BN
    даже в model.train().
    """

    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config.validate()

        # M1 заменяет stem энкодера обучаемым precoder
        with_stem = config.variant == "M2"
        self.precoder = None if with_stem else Precoder(config)
        self.encoder = DenseNetEncoder(config, with_stem=with_stem)

        # В M2 skip-признаки всех модальностей конкатенируются
        copies = config.num_modalities if with_stem else 1
        skip_channels = tuple(c * copies for c in pyramid_channels(config))
        self.decoder = Decoder(skip_channels, config.decoder_widths, config.decoder_blocks, config.bn_momentum)

        # Стандартизация входа предобученного stem (только M2), не сохраняется в архиве модели
        self.register_buffer("input_mean", None, persistent=False)
        self.register_buffer("input_std", None, persistent=False)

        # Замороженный энкодер
        if config.freeze_encoder:
            for p in self.encoder.parameters():
                p.requires_grad_(False)
        self.train()

    def train(self, mode: bool = True):
        super().train(mode)
        if self.config.freeze_encoder and self.config.freeze_bn_stats:
            self.encoder.eval()
        return self

    def set_standardization(self, mean, std):
        """
        Поканальная стандартизация входа энкодера M2.

        Args:
            mean (sequence): 3 средних
            std (sequence): 3 стандартных отклонения (> 0)
        """
        if self.config.variant != "M2":
            return
        mean = torch.as_tensor(mean, dtype=torch.float32).reshape(1, 3, 1, 1)
        std = torch.as_tensor(std, dtype=torch.float32).reshape(1, 3, 1, 1)
        if torch.any(std <= 0):
            raise ValueError(f"standardization std must be positive, got {std.flatten().tolist()}")
        self.input_mean = mean.to(self.encoder.features.norm5.weight.device)
        self.input_std = std.to(self.encoder.features.norm5.weight.device)

    @property
    def standardization(self):
        if self.input_mean is None:
            return None
        return {"mean": self.input_mean.flatten().tolist(), "std": self.input_std.flatten().tolist()}

    def _check_input(self, x):
        if x.ndim != 5 or x.shape[2] != 3:
            raise ValueError(f"expected input of shape (B, M, 3, H, W), got {tuple(x.shape)}")
        if x.shape[1] != self.config.num_modalities:
            raise ValueError(f"expected {self.config.num_modalities} modality stacks, got {x.shape[1]}")

    def encode(self, x) -> list:
        """
        Пирамиды признаков: одна для M1, по одной на модальность для M2.

        Args:
            x (torch.Tensor): (B, M, 3, H, W)
        """
        self._check_input(x)
        if self.precoder is not None:
            return [self.encoder(self.precoder(x))]

        # Общий энкодер по очереди для каждой модальности
        pyramids = []
        for m in range(x.shape[1]):
            image = x[:, m]
            if self.input_mean is not None:
                image = (image - self.input_mean.to(image.dtype)) / self.input_std.to(image.dtype)
            pyramids.append(self.encoder(image))
        return pyramids

    def forward(self, x):
        """Логиты (B, 3, H, W) в порядке wt, tc, et."""
        pyramids: list[FeaturePyramid] = self.encode(x)
        skips = [torch.cat([p.features[s] for p in pyramids], dim=1) if len(pyramids) > 1
                 else pyramids[0].features[s]
                 for s in range(len(pyramids[0]))]
        return self.decoder(skips)


def model_forward(model: SegmentationNetwork, stacks):
    """
    Вероятности трёх классов для центрального среза.

    Args:
        model (SegmentationNetwork): Сеть
        stacks (torch.Tensor): (B, M, 3, H, W)

    Returns:
        torch.Tensor: (B, 3, H, W), значения в (0, 1)
    """
    return torch.sigmoid(model(stacks))
