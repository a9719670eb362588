# Импорт необходимых библиотек
from dataclasses import asdict, dataclass, field  # Неизменяемые конфигурации и состояние оптимизатора

import torch                       # Оптимизатор SGD

from network.config import NetworkConfig          # Архитектура для freeze_mask
from network.model import SegmentationNetwork     # Сборка сети на устройстве meta
from utils.errors import ConfigError              # Сводная ошибка конфигурации


@dataclass(frozen=True)
class TrainConfig:
    """
    Параметры обучения.

    Attributes:
        epochs (int): Количество эпох
        batch_size (int): Размер батча
        momentum (float): Момент SGD
        l2 (float): Коэффициент L2-регуляризации
        lr_max (float): Верхняя граница циклической скорости обучения
        lr_min (float): Нижняя граница
        lr_period_epochs (int): Период цикла в эпохах
        lr_phase (int): Сдвиг фазы в шагах (0 - старт с lr_max)
        seed (int): Seed генераторов
        checkpoint_interval (int): Каждые сколько эпох писать контрольную точку
        bn_calibration_samples (int): Срезов для финальной калибровки BN (0 - без калибровки)
        samples_per_case (int): Случайных срезов на случай за эпоху
        tumor_fraction (float): Доля срезов из области опухоли
        deterministic (bool): Однопоточный воспроизводимый режим
        jobs (int): Потоков подготовки срезов
        calibration_batch_size (int): Батч калибровки (0 - как batch_size)
    """
    epochs: int = 160
    batch_size: int = 16
    momentum: float = 0.9
    l2: float = 1e-5
    lr_max: float = 2e-4
    lr_min: float = 5e-5
    lr_period_epochs: int = 20
    lr_phase: int = 0
    seed: int = 0
    checkpoint_interval: int = 10
    bn_calibration_samples: int = 5000
    samples_per_case: int = 20
    tumor_fraction: float = 0.5
    deterministic: bool = True
    jobs: int = 1
    calibration_batch_size: int = 0

    @property
    def effective_calibration_batch_size(self) -> int:
        return self.calibration_batch_size or self.batch_size

    def problems(self) -> list:
        problems = []
        for name in ("epochs", "batch_size", "lr_period_epochs", "checkpoint_interval",
                     "samples_per_case", "jobs"):
            if getattr(self, name) < 1:
                problems.append(f"{name}: must be positive, got {getattr(self, name)}")
        for name in ("lr_min", "lr_max"):
            if not getattr(self, name) > 0:
                problems.append(f"{name}: must be positive, got {getattr(self, name)}")
        if not self.lr_min < self.lr_max:
            problems.append(f"lr_min: must be below lr_max ({self.lr_max}), got {self.lr_min}")
        if not 0.0 <= self.momentum < 1.0:
            problems.append(f"momentum: must be in [0, 1), got {self.momentum}")
        if self.l2 < 0:
            problems.append(f"l2: must be >= 0, got {self.l2}")
        if not 0.0 <= self.tumor_fraction <= 1.0:
            problems.append(f"tumor_fraction: must be in [0, 1], got {self.tumor_fraction}")
        for name in ("lr_phase", "seed", "bn_calibration_samples", "calibration_batch_size"):
            if getattr(self, name) < 0:
                problems.append(f"{name}: must be >= 0, got {getattr(self, name)}")
        return problems

    def validate(self) -> "TrainConfig":
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def cyclic_lr(step: int, cfg: TrainConfig, steps_per_epoch: int = 1) -> float:
    """
    Треугольная циклическая скорость обучения.

    Начинается с lr_max, линейно спускается до lr_min за полпериода и
    линейно возвращается. Период = lr_period_epochs * steps_per_epoch шагов.

    Args:
        step (int): Глобальный номер шага (>= 0)
        cfg (TrainConfig): Границы, период и фаза
        steps_per_epoch (int): Шагов оптимизатора в эпохе

    Returns:
        float: Значение в [lr_min, lr_max]
    """
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    # Период в шагах оптимизатора
    period = cfg.lr_period_epochs * max(int(steps_per_epoch), 1)
    t = (step + cfg.lr_phase) % period
    # frac = 1 на краях периода, 0 в середине
    frac = abs(t / (period / 2) - 1.0)
    lr = frac * cfg.lr_max + (1.0 - frac) * cfg.lr_min
    # Результат строго в [lr_min, lr_max]
    return min(max(lr, cfg.lr_min), cfg.lr_max)


@dataclass
class OptimState:
    """
    Состояние оптимизатора: SGD с моментом и L2 только по обучаемым параметрам.

    Правило обновления torch.optim.SGD (dampening 0, без Нестерова):
    v <- momentum * v + g + l2 * w;  w <- w - lr * v.

    Attributes:
        optimizer (torch.optim.SGD): Оптимизатор
        names (dict): Параметр -> имя
        step (int): Глобальный номер шага
        lr (float): Текущая скорость обучения
    """
    optimizer: torch.optim.SGD
    names: dict = field(default_factory=dict)
    step: int = 0
    lr: float = 0.0

    @classmethod
    def create(cls, named_parameters, cfg: TrainConfig) -> "OptimState":
        """
        Оптимизатор по обучаемым параметрам.

        Args:
            named_parameters: Пары (имя, параметр); замороженные пропускаются
            cfg (TrainConfig): momentum, l2, lr_max
        """
        # Замороженный энкодер в оптимизатор не попадает
        trainable = [(name, p) for name, p in named_parameters if p.requires_grad]
        if not trainable:
            raise ValueError("no trainable parameters")
        optimizer = torch.optim.SGD([p for _, p in trainable], lr=cfg.lr_max, momentum=cfg.momentum,
                                    dampening=0.0, weight_decay=cfg.l2, nesterov=False)
        return cls(optimizer=optimizer, names={p: name for name, p in trainable}, lr=cfg.lr_max)

    @property
    def parameters(self) -> list:
        return self.optimizer.param_groups[0]["params"]

    @property
    def velocities(self) -> dict:
        """Буферы момента по именам параметров (появляются после первого шага)."""
        return {self.names[p]: self.optimizer.state[p]["momentum_buffer"]
                for p in self.parameters
                if self.optimizer.state[p].get("momentum_buffer") is not None}

    def zero_grad(self):
        self.optimizer.zero_grad(set_to_none=True)


def sgd_momentum_step(state: OptimState, lr: float) -> OptimState:
    """
    Один шаг SGD с моментом.

    Raises:
        ValueError: Нет градиента у обучаемого параметра или форма не совпадает
    """
    # Проверка градиентов до изменения весов
    for p in state.parameters:
        if p.grad is None:
            raise ValueError(f"missing gradient for parameter '{state.names[p]}'")
        if p.grad.shape != p.shape:
            raise ValueError(f"gradient shape {tuple(p.grad.shape)} does not match parameter "
                             f"'{state.names[p]}' {tuple(p.shape)}")

    # Скорость обучения задаётся на каждом шаге
    for group in state.optimizer.param_groups:
        group["lr"] = lr
    state.optimizer.step()
    state.step += 1
    state.lr = lr
    return state


def freeze_mask(config: NetworkConfig) -> set:
    """
    Имена параметров, исключённых из обучения.

    Сеть строится на устройстве meta, поэтому память под веса не выделяется.

    Returns:
        set: Все параметры энкодера при freeze_encoder, иначе пустое множество
    """
    with torch.device("meta"):
        model = SegmentationNetwork(config)
    return {name for name, p in model.named_parameters() if not p.requires_grad}
