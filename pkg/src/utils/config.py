# Импорт необходимых библиотек
import os                                      # Переменные окружения
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from dotenv import dotenv_values, load_dotenv  # Разбор файлов KEY=VALUE и загрузка .env

from network.config import NetworkConfig
from training.objective import LossConfig
from training.schedule import TrainConfig
from utils.errors import ConfigError

# Пресеты архитектуры
PRESETS = {"densenet121": NetworkConfig.densenet121, "tiny": NetworkConfig.tiny}

TRUE_VALUES = ("true", "1", "yes", "on")
FALSE_VALUES = ("false", "0", "no", "off")


def load_environment(dotenv_path=None) -> dict:
    """
    Загрузка значений по умолчанию из .env в окружение процесса.

    Уже заданные переменные окружения не перезаписываются.

    Returns:
        dict: BRAINSEG_LOG_DIR, BRAINSEG_LOG_LEVEL, BRAINSEG_JOBS
    """
    load_dotenv(dotenv_path=dotenv_path, override=False)
    return {
        "BRAINSEG_LOG_DIR": os.getenv("BRAINSEG_LOG_DIR", "logs"),
        "BRAINSEG_LOG_LEVEL": os.getenv("BRAINSEG_LOG_LEVEL", "INFO"),
        "BRAINSEG_JOBS": os.getenv("BRAINSEG_JOBS", "1"),
    }


def env_jobs(default: int = 1) -> int:
    """Число потоков по умолчанию из BRAINSEG_JOBS."""
    try:
        return max(1, int(os.getenv("BRAINSEG_JOBS", default)))
    except ValueError:
        return default


def _coerce(raw: str, default):
    """Приведение строки к типу значения по умолчанию."""
    text = raw.strip()
    if isinstance(default, bool):
        lowered = text.lower()
        if lowered in TRUE_VALUES:
            return True
        if lowered in FALSE_VALUES:
            return False
        raise ValueError("expected a boolean (true/false/1/0/yes/no)")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ValueError("expected a comma separated list")
        return tuple(int(p) for p in parts)
    return text


@dataclass(frozen=True)
class RunConfig:
    """
    Полная конфигурация запуска.

    Attributes:
        network (NetworkConfig): Архитектура
        loss (LossConfig): Функция потерь
        train (TrainConfig): Обучение
        preset (str): Пресет архитектуры
        source (str): Путь к файлу конфигурации (None - значения по умолчанию)
    """
    network: NetworkConfig = field(default_factory=NetworkConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    preset: str = "densenet121"
    source: str = None

    def to_dict(self) -> dict:
        return {
            "preset": self.preset,
            "source": self.source,
            "network": self.network.to_dict(),
            "loss": self.loss.to_dict(),
            "train": self.train.to_dict(),
        }

    def with_train_overrides(self, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        if not changes:
            return self
        train = replace(self.train, **changes)
        problems = train.problems()
        if problems:
            raise ConfigError(problems)
        return replace(self, train=train)


def parse_run_config(values: dict, source: str = None) -> RunConfig:
    """
    Сборка RunConfig из словаря строковых значений.

    Ключ preset задаёт исходную архитектуру, остальные ключи - имена
    полей NetworkConfig, LossConfig и TrainConfig в нижнем регистре.

    Raises:
        ConfigError: Неизвестные ключи, неверные значения или нарушения инвариантов
    """
    values = {str(k).strip().lower(): v for k, v in values.items()}
    problems = []

    preset = (values.pop("preset", None) or "densenet121").strip().lower()
    if preset not in PRESETS:
        problems.append(f"preset: expected one of {sorted(PRESETS)}, got {preset!r}")
        preset = "densenet121"

    sections = {"network": PRESETS[preset](), "loss": LossConfig(), "train": TrainConfig()}
    owners = {f.name: name for name, obj in sections.items() for f in fields(obj)}
    changes = {name: {} for name in sections}

    for key, raw in values.items():
        if key not in owners:
            problems.append(f"{key}: unknown key")
            continue
        if raw is None:
            problems.append(f"{key}: missing value")
            continue
        section = owners[key]
        default = getattr(sections[section], key)
        try:
            changes[section][key] = _coerce(raw, default)
        except ValueError as e:
            problems.append(f"{key}: invalid value {raw!r} ({e})")

    built = {name: replace(obj, **changes[name]) for name, obj in sections.items()}
    for obj in built.values():
        problems.extend(obj.problems())
    if problems:
        raise ConfigError(problems)

    return RunConfig(network=built["network"], loss=built["loss"], train=built["train"],
                     preset=preset, source=source)


def load_run_config(path=None) -> RunConfig:
    """
    Чтение файла конфигурации KEY=VALUE.

    Args:
        path: Путь к файлу (None - значения по умолчанию)

    Raises:
        FileNotFoundError: Файла нет
        ConfigError: Ошибки в ключах или значениях
    """
    if path is None:
        return parse_run_config({})
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_run_config(dict(dotenv_values(path)), source=str(path))
