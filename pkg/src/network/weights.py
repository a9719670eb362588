# Импорт необходимых библиотек
import json                                # Манифест архива
import re                                  # Переименование сторонних ключей
import zipfile                             # Архив в одном файле
import zlib                                # CRC32 тензоров
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np                         # Сырые little-endian блоки
import torch                               # Копирование в параметры сети

from network.config import NetworkConfig
from network.model import SegmentationNetwork, is_encoder_parameter
from utils.errors import WeightArchiveError
from utils.files import atomic_path
from utils.logger import AppLogger

# Версия формата архива
ARCHIVE_FORMAT = "brainseg-weights/1"

MANIFEST_NAME = "manifest.json"
TENSOR_DIR = "tensors"

# Области архива: вся сеть или только предобученный энкодер
SCOPES = ("model", "encoder")

# Счётчики BN не архивируются
SKIPPED_SUFFIXES = ("num_batches_tracked",)

# Фиксированная дата записей zip для побитовой воспроизводимости
ZIP_DATE = (1980, 1, 1, 0, 0, 0)


@dataclass
class WeightArchive:
    """
    Именованные float32-тензоры и манифест.

    Attributes:
        scope (str): "model" или "encoder"
        config (NetworkConfig): Конфигурация сети, с которой сохранены веса
        tensors (dict): Имя -> np.ndarray float32
        standardization (dict): {"mean": [...], "std": [...]} или None
        metadata (dict): Произвольные сведения (эпоха, шаг)
    """
    scope: str
    config: NetworkConfig
    tensors: dict
    standardization: dict = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scope not in SCOPES:
            raise WeightArchiveError(f"unknown archive scope '{self.scope}'; expected one of {SCOPES}")

    @property
    def fingerprint(self) -> str:
        """Отпечаток, с которым сравнивается конфигурация при строгой загрузке."""
        if self.scope == "encoder":
            return self.config.encoder_fingerprint()
        return self.config.fingerprint()

    def check_compatible(self, config: NetworkConfig):
        """
        Raises:
            WeightArchiveError: Отпечаток архива не совпадает с конфигурацией
        """
        actual = config.encoder_fingerprint() if self.scope == "encoder" else config.fingerprint()
        if actual != self.fingerprint:
            raise WeightArchiveError(f"fingerprint mismatch: {self.scope} archive {self.fingerprint} "
                                     f"vs network {actual}")

    @property
    def parameter_count(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    @classmethod
    def from_model(cls, model: SegmentationNetwork, scope: str = "model", metadata: dict = None) -> "WeightArchive":
        """
        Снимок параметров и статистик BN сети.

        Args:
            model (SegmentationNetwork): Сеть
            scope (str): "model" - все тензоры, "encoder" - только энкодер
            metadata (dict): Дополнительные сведения для манифеста
        """
        tensors = {}
        for name, value in model.state_dict().items():
            if name.endswith(SKIPPED_SUFFIXES):
                continue
            if scope == "encoder" and not is_encoder_parameter(name):
                continue
            tensors[name] = value.detach().cpu().numpy().astype(np.float32)
        return cls(scope=scope, config=model.config, tensors=tensors,
                   standardization=model.standardization, metadata=dict(metadata or {}))

    def manifest(self) -> dict:
        entries = []
        for name, array in self.tensors.items():
            entries.append({
                "name": name,
                "shape": list(array.shape),
                "crc32": zlib.crc32(_to_bytes(array)),
                "file": f"{TENSOR_DIR}/{name}.bin",
            })
        manifest = {
            "format": ARCHIVE_FORMAT,
            "scope": self.scope,
            "fingerprint": self.fingerprint,
            "encoder_fingerprint": self.config.encoder_fingerprint(),
            "config": self.config.to_dict(),
            "dtype": "float32",
            "byte_order": "little",
            "tensors": entries,
        }
        if self.standardization is not None:
            manifest["standardization"] = self.standardization
        if self.metadata:
            manifest["metadata"] = self.metadata
        return manifest

    def summary(self) -> dict:
        """
        Сводка для команды inspect: итоги по пространствам имён верхнего уровня.

        Returns:
            dict: {"namespaces": {имя: {"tensors": n, "parameters": p}}, "total": p}
        """
        namespaces = {}
        for name, array in self.tensors.items():
            top = name.split(".", 1)[0]
            entry = namespaces.setdefault(top, {"tensors": 0, "parameters": 0})
            entry["tensors"] += 1
            entry["parameters"] += int(array.size)
        return {"namespaces": namespaces, "total": self.parameter_count}


@dataclass
class LoadReport:
    """
    Результат загрузки весов в сеть.

    Attributes:
        loaded (list): Загруженные тензоры
        missing (list): Тензоры сети, отсутствующие в архиве
        unexpected (list): Тензоры архива, которых нет в сети
    """
    loaded: list = field(default_factory=list)
    missing: list = field(default_factory=list)
    unexpected: list = field(default_factory=list)


def _to_bytes(array: np.ndarray) -> bytes:
    return np.ascontiguousarray(array, dtype="<f4").tobytes(order="C")


def save_archive(archive: WeightArchive, path, logger: AppLogger = None) -> Path:
    """
    Атомарная запись архива.

    Путь с окончанием .zip даёт один файл (без сжатия), иначе директорию
    с manifest.json и поддиректорией tensors/.

    Returns:
        Path: Путь к записанному архиву
    """
    logger = logger or AppLogger()
    path = Path(path)
    manifest = archive.manifest()
    manifest_bytes = (json.dumps(manifest, indent=2) + "\n").encode("utf-8")

    with atomic_path(path) as tmp:
        if path.suffix == ".zip":
            with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_STORED) as zf:
                zf.writestr(zipfile.ZipInfo(MANIFEST_NAME, date_time=ZIP_DATE), manifest_bytes)
                for entry in manifest["tensors"]:
                    zf.writestr(zipfile.ZipInfo(entry["file"], date_time=ZIP_DATE),
                                _to_bytes(archive.tensors[entry["name"]]))
        else:
            (tmp / TENSOR_DIR).mkdir(parents=True)
            (tmp / MANIFEST_NAME).write_bytes(manifest_bytes)
            for entry in manifest["tensors"]:
                (tmp / entry["file"]).write_bytes(_to_bytes(archive.tensors[entry["name"]]))

    logger.info(f"Saved {archive.scope} archive with {len(archive.tensors)} tensors "
                f"({archive.parameter_count} values) to {path}")
    return path


def _reader(path: Path):
    """Функция чтения файла архива по относительному имени."""
    if path.is_dir():
        def read(name):
            target = path / name
            if not target.exists():
                raise WeightArchiveError(f"archive {path} has no file '{name}'")
            return target.read_bytes()
        return read, None

    if zipfile.is_zipfile(path):
        zf = zipfile.ZipFile(path)

        def read(name):
            try:
                return zf.read(name)
            except KeyError:
                raise WeightArchiveError(f"archive {path} has no file '{name}'") from None
        return read, zf

    raise WeightArchiveError(f"not a weight archive: {path}")


def load_archive(path) -> WeightArchive:
    """
    Чтение архива с проверкой формата, форм и CRC32 каждого тензора.

    Raises:
        FileNotFoundError: Архив не найден
        WeightArchiveError: Повреждённый манифест, несовпадение контрольной суммы или размера
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"weight archive not found: {path}")

    read, handle = _reader(path)
    try:
        try:
            manifest = json.loads(read(MANIFEST_NAME).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise WeightArchiveError(f"corrupt manifest in {path}: {e}") from e

        if manifest.get("format") != ARCHIVE_FORMAT:
            raise WeightArchiveError(f"unsupported archive format {manifest.get('format')!r} in {path}")
        if manifest.get("dtype") != "float32" or manifest.get("byte_order") != "little":
            raise WeightArchiveError(f"unsupported tensor encoding in {path}: "
                                     f"{manifest.get('dtype')}/{manifest.get('byte_order')}")

        tensors = {}
        for entry in manifest["tensors"]:
            name = entry["name"]
            blob = read(entry["file"])
            if zlib.crc32(blob) != entry["crc32"]:
                raise WeightArchiveError(f"checksum mismatch for tensor '{name}' in {path}")
            shape = tuple(entry["shape"])
            expected = int(np.prod(shape, dtype=np.int64)) * 4
            if len(blob) != expected:
                raise WeightArchiveError(f"tensor '{name}' has {len(blob)} bytes, expected {expected} "
                                         f"for shape {shape}")
            tensors[name] = np.frombuffer(blob, dtype="<f4").reshape(shape).astype(np.float32)
    finally:
        if handle is not None:
            handle.close()

    return WeightArchive(
        scope=manifest["scope"],
        config=NetworkConfig.from_dict(manifest["config"]),
        tensors=tensors,
        standardization=manifest.get("standardization"),
        metadata=manifest.get("metadata", {}),
    )


def load_weights(archive: WeightArchive, model: SegmentationNetwork, strict: bool = True,
                 logger: AppLogger = None) -> LoadReport:
    """
    Загрузка тензоров архива в сеть по именам.

    Архив области "encoder" заполняет только энкодер; тензоры stem,
    отсутствующего у M1, считаются неиспользованными, а не ошибкой.
    Константы стандартизации из манифеста подключаются к сети M2.

    Args:
        archive (WeightArchive): Архив
        model (SegmentationNetwork): Сеть
        strict (bool): Сравнивать отпечаток и требовать все тензоры сети

    Returns:
        LoadReport: Загруженные, отсутствующие и лишние имена

    Raises:
        WeightArchiveError: Несовпадение отпечатка, формы или отсутствие тензора
    """
    logger = logger or AppLogger()
    if strict:
        archive.check_compatible(model.config)

    state = {name: value for name, value in model.state_dict().items()
             if not name.endswith(SKIPPED_SUFFIXES)
             and (archive.scope == "model" or is_encoder_parameter(name))}

    report = LoadReport()
    report.missing = [name for name in state if name not in archive.tensors]
    report.unexpected = [name for name in archive.tensors if name not in state]
    if strict and report.missing:
        raise WeightArchiveError(f"missing tensor '{report.missing[0]}' in {archive.scope} archive"
                                 + (f" (and {len(report.missing) - 1} more)" if len(report.missing) > 1 else ""))
    if strict and archive.scope == "model" and report.unexpected:
        raise WeightArchiveError(f"unexpected tensor '{report.unexpected[0]}' in model archive")

    with torch.no_grad():
        for name, target in state.items():
            if name not in archive.tensors:
                continue
            source = archive.tensors[name]
            if tuple(source.shape) != tuple(target.shape):
                raise WeightArchiveError(f"shape mismatch for tensor '{name}': archive {tuple(source.shape)} "
                                         f"vs network {tuple(target.shape)}")
            target.copy_(torch.from_numpy(np.array(source)))
            report.loaded.append(name)

    if archive.standardization is not None:
        model.set_standardization(archive.standardization["mean"], archive.standardization["std"])

    logger.info(f"Loaded {len(report.loaded)} tensors from {archive.scope} archive "
                f"({len(report.missing)} missing, {len(report.unexpected)} unused)")
    return report


def build_model(archive: WeightArchive, logger: AppLogger = None) -> SegmentationNetwork:
    """Сеть по конфигурации архива модели с загруженными весами."""
    if archive.scope != "model":
        raise WeightArchiveError(f"cannot build a network from a '{archive.scope}' archive; "
                                 f"a full model archive is required")
    model = SegmentationNetwork(archive.config)
    load_weights(archive, model, strict=True, logger=logger)
    model.eval()
    return model


def encoder_archive_from_state_dict(state_dict: dict, config: NetworkConfig, standardization: dict = None,
                                    metadata: dict = None) -> WeightArchive:
    """
    Архив энкодера из стороннего словаря тензоров в раскладке DenseNet.

    Ключи вида "features.denseblock1.denselayer1.norm1.weight" (а также
    старое написание "norm.1") переводятся в пространство имён энкодера.
    Ключи классификатора отбрасываются.

    Args:
        state_dict (dict): Имя -> тензор или массив
        config (NetworkConfig): Конфигурация, описывающая эту топологию
        standardization (dict): Поканальные mean/std входа предобученной сети
    """
    legacy = re.compile(r"^(.*denselayer\d+\.(?:norm|relu|conv))\.((?:[12])\.(?:weight|bias|running_mean|running_var))$")
    tensors = {}
    for key, value in state_dict.items():
        if not key.startswith("features."):
            continue
        if key.endswith(SKIPPED_SUFFIXES):
            continue
        match = legacy.match(key)
        if match:
            key = match.group(1) + match.group(2)
        array = value.detach().cpu().numpy() if isinstance(value, torch.Tensor) else np.asarray(value)
        tensors[f"encoder.{key}"] = array.astype(np.float32)
    if not tensors:
        raise WeightArchiveError("state dict has no 'features.*' tensors")
    return WeightArchive(scope="encoder", config=config, tensors=tensors,
                         standardization=standardization, metadata=dict(metadata or {}))
