# Импорт необходимых библиотек
import hashlib                             # Отпечаток архитектуры
import json                                # Каноническая сериализация полей
from dataclasses import asdict, dataclass, fields, replace

from utils.errors import ConfigError

# Допустимые варианты архитектуры
VARIANTS = ("M1", "M2")

# Поля, определяющие форму параметров сети
ARCHITECTURE_FIELDS = (
    "variant", "encoder_blocks", "growth_rate", "stem_channels", "transition_compression",
    "bottleneck_factor", "decoder_widths", "decoder_blocks", "num_modalities", "head_classes",
)

# Поля, определяющие форму параметров энкодера (без учёта наличия stem)
ENCODER_FIELDS = ("encoder_blocks", "growth_rate", "stem_channels", "transition_compression", "bottleneck_factor")


@dataclass(frozen=True)
class NetworkConfig:
    """
    Гиперпараметры сети.

    Значения по умолчанию соответствуют DenseNet-121 (блоки 6/12/24/16,
    growth 32, stem 64) и декодеру с шириной, убывающей вдвое на каждом
    масштабе. M1 - precoder + энкодер без stem, M2 - общий энкодер для
    каждой модальности.
    """
    variant: str = "M2"
    encoder_blocks: tuple = (6, 12, 24, 16)
    growth_rate: int = 32
    stem_channels: int = 64
    transition_compression: float = 0.5
    bottleneck_factor: int = 4
    decoder_widths: tuple = (512, 256, 128, 64, 32)
    decoder_blocks: int = 2
    num_modalities: int = 4
    freeze_encoder: bool = True
    freeze_bn_stats: bool = True
    bn_momentum: float = 1.0 / 5000.0
    head_classes: int = 3
    input_size: tuple = (224, 224)

    @classmethod
    def densenet121(cls, variant: str = "M2", **overrides) -> "NetworkConfig":
        """Полная топология DenseNet-121."""
        return cls(variant=variant, **overrides)

    @classmethod
    def tiny(cls, variant: str = "M2", **overrides) -> "NetworkConfig":
        """Маленькая топология для настольных экспериментов и тестов."""
        params = dict(
            variant=variant,
            encoder_blocks=(2, 2, 2, 2),
            growth_rate=8,
            stem_channels=16,
            decoder_widths=(64, 32, 32, 16, 16),
            input_size=(64, 64),
        )
        params.update(overrides)
        return cls(**params)

    @property
    def size_divisor(self) -> int:
        """Во сколько раз уменьшается вход на самом глубоком масштабе."""
        return 2 ** (len(self.encoder_blocks) + 1)

    @property
    def precoder_width(self) -> int:
        """Число каналов одной ветви precoder (M1)."""
        return self.stem_channels // self.num_modalities

    def problems(self) -> list:
        """Список нарушений инвариантов в виде "ключ: сообщение"."""
        problems = []
        if self.variant not in VARIANTS:
            problems.append(f"variant: expected one of {VARIANTS}, got {self.variant!r}")
        if self.head_classes != 3:
            problems.append(f"head_classes: must be 3 (WT, TC, ET), got {self.head_classes}")
        if not self.encoder_blocks or any(int(n) < 1 for n in self.encoder_blocks):
            problems.append(f"encoder_blocks: need positive layer counts, got {self.encoder_blocks}")
        if len(self.decoder_widths) != len(self.encoder_blocks) + 1:
            problems.append(f"decoder_widths: need {len(self.encoder_blocks) + 1} entries "
                            f"(one per skip scale), got {len(self.decoder_widths)}")
        if any(int(w) < 1 for w in self.decoder_widths):
            problems.append(f"decoder_widths: widths must be positive, got {self.decoder_widths}")
        for name in ("growth_rate", "stem_channels", "bottleneck_factor", "num_modalities"):
            if getattr(self, name) < 1:
                problems.append(f"{name}: must be positive, got {getattr(self, name)}")
        if self.decoder_blocks < 0:
            problems.append(f"decoder_blocks: must be >= 0, got {self.decoder_blocks}")
        if not 0.0 < self.transition_compression <= 1.0:
            problems.append(f"transition_compression: must be in (0, 1], got {self.transition_compression}")
        if not 0.0 < self.bn_momentum <= 1.0:
            problems.append(f"bn_momentum: must be in (0, 1], got {self.bn_momentum}")
        # Отражающее дополнение 3x3 требует хотя бы 2 пикселя на самом глубоком масштабе
        min_side = 2 * self.size_divisor
        if len(self.input_size) != 2 or any(int(s) % self.size_divisor or int(s) < min_side
                                            for s in self.input_size):
            problems.append(f"input_size: both sides must be multiples of {self.size_divisor} "
                            f"and at least {min_side}, got {self.input_size}")
        if self.variant == "M1" and self.num_modalities >= 1 and self.stem_channels % self.num_modalities:
            problems.append(f"num_modalities: M1 precoder needs stem_channels ({self.stem_channels}) "
                            f"divisible by num_modalities ({self.num_modalities})")
        return problems

    def validate(self) -> "NetworkConfig":
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    def to_dict(self) -> dict:
        data = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in data.items()}

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        known = {f.name for f in fields(cls)}
        values = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items() if k in known}
        return cls(**values)

    def with_overrides(self, **changes) -> "NetworkConfig":
        return replace(self, **changes)

    def fingerprint(self) -> str:
        """Хеш полей, определяющих набор и формы параметров всей сети."""
        return _digest({name: getattr(self, name) for name in ARCHITECTURE_FIELDS})

    def encoder_fingerprint(self) -> str:
        """Хеш полей энкодера; совпадает у M1 и M2 с одинаковым энкодером."""
        return _digest({name: getattr(self, name) for name in ENCODER_FIELDS})


def _digest(values: dict) -> str:
    canonical = json.dumps({k: list(v) if isinstance(v, tuple) else v for k, v in values.items()},
                           sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
