# Импорт необходимых библиотек
from dataclasses import asdict, dataclass  # Конфигурация функции потерь

import torch                       # Дифференцируемые функции потерь

from utils.errors import ConfigError      # Сводная ошибка конфигурации

# Режимы кросс-энтропии
CE_MODES = ("binary", "verbatim")

# Границы вероятностей перед логарифмом
PROB_MIN = 1e-7
PROB_MAX = 1.0 - 1e-7


@dataclass(frozen=True)
class LossConfig:
    """
    Параметры функции потерь.

    Attributes:
        epsilon (float): Сглаживающая константа Dice
        ce_mode (str): "binary" - два слагаемых y*log p + (1-y)*log(1-p),
                       "verbatim" - только положительное слагаемое
        ce_weight (float): Вес кросс-энтропии
        dice_weight (float): Вес Dice
    """
    epsilon: float = 1.0
    ce_mode: str = "binary"
    ce_weight: float = 1.0
    dice_weight: float = 1.0

    def problems(self) -> list:
        problems = []
        if not self.epsilon > 0:
            problems.append(f"epsilon: must be > 0, got {self.epsilon}")
        if self.ce_mode not in CE_MODES:
            problems.append(f"ce_mode: expected one of {CE_MODES}, got {self.ce_mode!r}")
        for name in ("ce_weight", "dice_weight"):
            if getattr(self, name) < 0:
                problems.append(f"{name}: must be >= 0, got {getattr(self, name)}")
        return problems

    def validate(self) -> "LossConfig":
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def _check(p, y):
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: probabilities {tuple(p.shape)} vs targets {tuple(y.shape)}")
    if p.ndim != 4 or p.shape[1] != 3:
        raise ValueError(f"expected (B, 3, H, W) maps, got {tuple(p.shape)}")


def cross_entropy(p, y, cfg: LossConfig = LossConfig()):
    """
    Средняя кросс-энтропия, просуммированная по трём классам.

    Для каждого класса берётся среднее по пикселям, затем по батчу.

    Args:
        p (torch.Tensor): Вероятности (B, 3, H, W)
        y (torch.Tensor): Бинарные цели (B, 3, H, W)
        cfg (LossConfig): Параметры

    Returns:
        torch.Tensor: Скаляр
    """
    _check(p, y)
    # log(0) исключён обрезкой вероятностей
    p = p.clamp(PROB_MIN, PROB_MAX)
    terms = y * torch.log(p)
    # Фоновое слагаемое только в режиме binary
    if cfg.ce_mode == "binary":
        terms = terms + (1 - y) * torch.log(1 - p)
    return -terms.mean(dim=(0, 2, 3)).sum()


def dice_terms(p, y, epsilon: float = 1.0):
    """
    Слагаемые Dice по образцам и классам: 1 - (2*sum(p*y) + eps) / (sum(p) + sum(y) + eps).

    Returns:
        torch.Tensor: (B, 3)
    """
    _check(p, y)
    # Суммы по пикселям для каждого образца и класса
    intersection = (p * y).sum(dim=(2, 3))
    total = p.sum(dim=(2, 3)) + y.sum(dim=(2, 3))
    return 1 - (2 * intersection + epsilon) / (total + epsilon)


def dice_loss(p, y, cfg: LossConfig = LossConfig()):
    """Сумма слагаемых Dice по трём классам, среднее по батчу."""
    return dice_terms(p, y, cfg.epsilon).sum(dim=1).mean()


def total_loss(p, y, cfg: LossConfig = LossConfig()):
    """ce_weight * cross_entropy + dice_weight * dice_loss."""
    return cfg.ce_weight * cross_entropy(p, y, cfg) + cfg.dice_weight * dice_loss(p, y, cfg)


def soft_dice(p, y, epsilon: float = 1.0):
    """
    Мягкий коэффициент Dice по классам (wt, tc, et), среднее по батчу.

    Returns:
        torch.Tensor: (3,) без графа вычислений
    """
    with torch.no_grad():
        return 1 - dice_terms(p, y, epsilon).mean(dim=0)
