# Импорт необходимых библиотек
import json                       # Сериализация манифестов
import os                         # Атомарное переименование
import shutil                     # Удаление временных директорий
import uuid                       # Уникальные имена временных файлов
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path

# Имя файла сведений о запуске
MANIFEST_FILE = "run_manifest.json"


@contextmanager
def atomic_path(path):
    """
    Атомарная запись файла или директории.

    Возвращает временный путь рядом с целевым (с тем же окончанием имени,
    чтобы библиотеки определяли формат по расширению). После успешного
    выхода из блока временный путь переименовывается в целевой, при ошибке
    удаляется. Существующий целевой путь заменяется.

    Args:
        path: Целевой путь

    Yields:
        Path: Временный путь для записи
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_name(f".tmp-{uuid.uuid4().hex[:8]}-{target.name}")
    try:
        yield tmp
        if target.is_dir():
            shutil.rmtree(target)
        os.replace(tmp, target)
    finally:
        if tmp.is_dir():
            shutil.rmtree(tmp, ignore_errors=True)
        elif tmp.exists():
            tmp.unlink()


def write_json(data, path):
    """Атомарная запись JSON (UTF-8, отступ 2, ключи по порядку вставки)."""
    with atomic_path(path) as tmp:
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(data, f, ensure_ascii=False, indent=2)
            f.write("\n")


def read_json(path):
    """Чтение JSON-файла."""
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


@dataclass
class RunManifest:
    """
    Сведения о запуске команды, записываемые рядом с результатами.

    Attributes:
        command (str): Имя подкоманды
        config_path (str): Файл конфигурации (или None)
        seed (int): Seed запуска
        inputs (dict): Входные пути
        outputs (dict): Выходные пути
        code_version (str): Версия пакета
        timestamp (str): Время запуска в ISO 8601
        argv (list): Аргументы командной строки
        settings (dict): Итоговые параметры (конфигурации, флаги)
    """
    command: str
    config_path: str = None
    seed: int = None
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    code_version: str = ""
    timestamp: str = field(default_factory=lambda: datetime.now().isoformat(timespec="seconds"))
    argv: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    def write(self, out_dir) -> Path:
        """Атомарная запись out_dir/run_manifest.json."""
        path = Path(out_dir) / MANIFEST_FILE
        write_json(asdict(self), path)
        return path

    @classmethod
    def read(cls, out_dir) -> "RunManifest":
        return cls(**read_json(Path(out_dir) / MANIFEST_FILE))
