# Импорт необходимых библиотек
from dataclasses import dataclass         # Контейнеры доменных типов
from pathlib import Path                  # Работа с путями

import nibabel as nib                     # Чтение и запись NIfTI-1
import numpy as np                        # Работа с массивами вокселей
from scipy import ndimage                 # Сглаживание шума фантома

from utils.files import atomic_path
from utils.logger import AppLogger

# Порядок модальностей во всех массивах конвейера
MODALITIES = ("t1", "t1ce", "t2", "flair")

# Допустимые значения карты меток: фон, некроз, отёк, усиление
LABEL_VALUES = (0, 1, 2, 4)

# Суффикс файла разметки в раскладке BRATS
LABEL_SUFFIX = "seg"

# Минимальный размер фантома по каждой оси
MIN_PHANTOM_EXTENT = 32

NIFTI_EXTENSIONS = (".nii.gz", ".nii")


@dataclass
class MultimodalVolume:
    """
    Четыре выровненных 3D-изображения одного пациента.

    Attributes:
        modalities (dict): Имя модальности -> массив float32 формы (X, Y, Z),
                           порядок ключей совпадает с MODALITIES
        spacing (tuple): Размер вокселя в мм (sx, sy, sz)
        case_id (str): Идентификатор случая
    """
    modalities: dict
    spacing: tuple
    case_id: str = "case"

    def __post_init__(self):
        shapes = {name: np.shape(grid) for name, grid in self.modalities.items()}
        if len(set(shapes.values())) > 1:
            raise ValueError(f"shape mismatch between modalities: {shapes}")
        if any(len(s) != 3 for s in shapes.values()):
            raise ValueError(f"modalities must be 3D grids, got {shapes}")
        self.spacing = tuple(float(s) for s in self.spacing)

    @property
    def names(self) -> tuple:
        return tuple(self.modalities)

    @property
    def shape(self) -> tuple:
        return np.shape(next(iter(self.modalities.values())))

    def stack(self) -> np.ndarray:
        """Все модальности одним массивом формы (M, X, Y, Z)."""
        return np.stack([self.modalities[name] for name in self.names])


@dataclass
class LabelMap:
    """
    Целочисленная карта меток {0, 1, 2, 4}.

    Attributes:
        labels (np.ndarray): Массив uint8 формы (X, Y, Z)
        spacing (tuple): Размер вокселя в мм
    """
    labels: np.ndarray
    spacing: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        labels = np.asarray(self.labels)
        illegal = np.setdiff1d(np.unique(labels), LABEL_VALUES)
        if illegal.size:
            raise ValueError(f"illegal label value(s) {illegal.tolist()}; allowed {list(LABEL_VALUES)}")
        self.labels = labels.astype(np.uint8)
        self.spacing = tuple(float(s) for s in self.spacing)

    @property
    def shape(self) -> tuple:
        return self.labels.shape


@dataclass
class MultiLabelMasks:
    """
    Вложенные бинарные маски: et ⊆ tc ⊆ wt.

    Attributes:
        wt (np.ndarray): Вся опухоль (метки 1, 2, 4)
        tc (np.ndarray): Ядро опухоли (метки 1, 4)
        et (np.ndarray): Усиливающаяся часть (метка 4)
    """
    wt: np.ndarray
    tc: np.ndarray
    et: np.ndarray

    def as_array(self) -> np.ndarray:
        """Маски одним массивом (3, ...) в порядке wt, tc, et."""
        return np.stack([self.wt, self.tc, self.et])

    def is_nested(self) -> bool:
        return bool(np.all(self.et <= self.tc) and np.all(self.tc <= self.wt))


def labels_to_masks(lm: LabelMap) -> MultiLabelMasks:
    """
    Перевод карты меток во вложенные маски (один воксель - несколько классов).

    Args:
        lm (LabelMap): Карта меток

    Returns:
        MultiLabelMasks: wt = {1,2,4}, tc = {1,4}, et = {4}
    """
    labels = lm.labels
    return MultiLabelMasks(
        wt=np.isin(labels, (1, 2, 4)),
        tc=np.isin(labels, (1, 4)),
        et=labels == 4,
    )


def masks_to_labels(masks: MultiLabelMasks, spacing=(1.0, 1.0, 1.0)) -> LabelMap:
    """
    Обратное преобразование: et -> 4, tc без et -> 1, wt без tc -> 2.

    Вложенность восстанавливается пересечением, поэтому функция
    принимает и маски, не удовлетворяющие et ⊆ tc ⊆ wt.
    """
    wt = np.asarray(masks.wt, dtype=bool)
    tc = np.asarray(masks.tc, dtype=bool) & wt
    et = np.asarray(masks.et, dtype=bool) & tc

    labels = np.zeros(wt.shape, dtype=np.uint8)
    labels[wt] = 2
    labels[tc] = 1
    labels[et] = 4
    return LabelMap(labels=labels, spacing=spacing)


def normalize(vol: MultimodalVolume, logger: AppLogger = None) -> MultimodalVolume:
    """
    Min-max нормализация каждой модальности в интервал [0, 1].

    Статистика считается по всему 3D-объёму отдельно для каждой модальности.
    Постоянная модальность (max == min) превращается в нули.

    Args:
        vol (MultimodalVolume): Исходный объём
        logger (AppLogger): Логгер для предупреждений о постоянных модальностях

    Returns:
        MultimodalVolume: Новый объём с float32 значениями в [0, 1]

    Raises:
        ValueError: Если в данных есть NaN или Inf
    """
    normalized = {}
    for name, grid in vol.modalities.items():
        data = np.asarray(grid, dtype=np.float64)
        if not np.all(np.isfinite(data)):
            raise ValueError(f"non-finite voxel values in modality '{name}' of case {vol.case_id}")

        lo, hi = data.min(), data.max()
        if hi == lo:
            if logger is not None:
                logger.warning(f"Constant modality '{name}' in case {vol.case_id} normalized to zeros")
            normalized[name] = np.zeros(data.shape, dtype=np.float32)
        else:
            normalized[name] = ((data - lo) / (hi - lo)).astype(np.float32)

    return MultimodalVolume(modalities=normalized, spacing=vol.spacing, case_id=vol.case_id)


# --- Чтение и запись NIfTI ---------------------------------------------------

def _find_file(directory: Path, case_id: str, suffix: str):
    """Поиск файла <case>_<suffix>.nii[.gz]; допускается любой префикс."""
    for ext in NIFTI_EXTENSIONS:
        exact = directory / f"{case_id}_{suffix}{ext}"
        if exact.exists():
            return exact
    for ext in NIFTI_EXTENSIONS:
        matches = sorted(directory.glob(f"*_{suffix}{ext}"))
        if matches:
            return matches[0]
    return None


def _read_nifti(path: Path):
    """Чтение данных и размера вокселя из заголовка (pixdim)."""
    try:
        image = nib.load(str(path))
        data = np.asanyarray(image.dataobj)
        spacing = tuple(float(z) for z in image.header.get_zooms()[:3])
    except Exception as e:
        raise ValueError(f"unreadable volume file {path}: {e}") from e
    return data, spacing, image.header


def _write_nifti(data: np.ndarray, spacing, path: Path, dtype, description: str = None):
    """Атомарная запись NIfTI-1 с аффинной матрицей diag(spacing)."""
    affine = np.diag([*spacing, 1.0])
    image = nib.Nifti1Image(np.asarray(data, dtype=dtype), affine)
    image.set_data_dtype(dtype)
    if description:
        image.header["descrip"] = description.encode("ascii")[:79]
    with atomic_path(path) as tmp:
        nib.save(image, str(tmp))


def load_label_file(path) -> LabelMap:
    """
    Чтение карты меток из NIfTI.

    Raises:
        ValueError: Нецелые значения или метки вне {0, 1, 2, 4}
    """
    data, spacing, _ = _read_nifti(Path(path))
    if not np.all(np.equal(np.mod(data, 1), 0)):
        raise ValueError(f"illegal label value: non-integer labels in {path}")
    return LabelMap(labels=np.rint(data).astype(np.int64), spacing=spacing)


def load_case(directory, require_labels: bool = False, logger: AppLogger = None):
    """
    Загрузка случая из директории с раскладкой BRATS.

    Ожидаются файлы <case>_t1, <case>_t1ce, <case>_t2, <case>_flair
    и необязательный <case>_seg в формате .nii или .nii.gz.

    Args:
        directory: Путь к директории случая
        require_labels (bool): Требовать наличие файла разметки
        logger (AppLogger): Логгер (по умолчанию создаётся новый)

    Returns:
        tuple: (MultimodalVolume, LabelMap или None)

    Raises:
        FileNotFoundError: Нет директории, модальности или обязательной разметки
        ValueError: Несовпадение форм/размеров вокселя, повреждённый заголовок,
                    недопустимые метки
    """
    logger = logger or AppLogger()
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"case directory not found: {directory}")
    case_id = directory.name

    modalities = {}
    spacings = {}
    for name in MODALITIES:
        path = _find_file(directory, case_id, name)
        if path is None:
            raise FileNotFoundError(f"missing modality '{name}' in {directory}")
        data, spacing, _ = _read_nifti(path)
        modalities[name] = np.asarray(data, dtype=np.float32)
        spacings[name] = spacing

    reference = spacings[MODALITIES[0]]
    for name, spacing in spacings.items():
        if not np.allclose(spacing, reference, rtol=0, atol=1e-5):
            raise ValueError(f"spacing mismatch in case {case_id}: {name} has {spacing}, expected {reference}")

    volume = MultimodalVolume(modalities=modalities, spacing=reference, case_id=case_id)

    labels = None
    label_path = _find_file(directory, case_id, LABEL_SUFFIX)
    if label_path is not None:
        labels = load_label_file(label_path)
        if labels.shape != volume.shape:
            raise ValueError(f"shape mismatch in case {case_id}: labels {labels.shape} vs volume {volume.shape}")
    elif require_labels:
        raise FileNotFoundError(f"missing label file '{LABEL_SUFFIX}' in {directory}")

    logger.debug(f"Loaded case {case_id}: shape {volume.shape}, spacing {volume.spacing}, "
                 f"labels {'yes' if labels is not None else 'no'}")
    return volume, labels


def load_case_labels(directory) -> LabelMap:
    """
    Чтение только разметки случая (<case>_seg.nii[.gz]).

    Raises:
        FileNotFoundError: Нет директории или файла разметки
    """
    directory = Path(directory)
    path = _find_file(directory, directory.name, LABEL_SUFFIX) if directory.is_dir() else None
    if path is None:
        raise FileNotFoundError(f"missing label file for case {directory.name} in {directory.parent}")
    return load_label_file(path)


def list_cases(root) -> list:
    """Отсортированный список директорий случаев в наборе данных."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    return sorted(p for p in root.iterdir() if p.is_dir() and not p.name.startswith("."))


def load_dataset(root, require_labels: bool = False, logger: AppLogger = None) -> list:
    """
    Загрузка всех случаев набора данных.

    Returns:
        list: Пары (MultimodalVolume, LabelMap или None) в порядке имён
    """
    logger = logger or AppLogger()
    cases = [load_case(d, require_labels=require_labels, logger=logger) for d in list_cases(root)]
    logger.info(f"Loaded {len(cases)} cases from {root}")
    return cases


def save_case(volume: MultimodalVolume, labels: LabelMap, directory, description: str = None):
    """
    Запись случая в раскладке BRATS: 4 модальности float32 и разметка uint8.

    Args:
        volume (MultimodalVolume): Изображения
        labels (LabelMap): Разметка (может быть None)
        directory: Директория случая
        description (str): Текст для поля descrip заголовка разметки
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in volume.names:
        _write_nifti(volume.modalities[name], volume.spacing,
                     directory / f"{volume.case_id}_{name}.nii.gz", np.float32)
    if labels is not None:
        save_label_map(labels, directory / f"{volume.case_id}_{LABEL_SUFFIX}.nii.gz", description)


def save_label_map(labels: LabelMap, path, description: str = None):
    """Запись карты меток (uint8 NIfTI-1)."""
    _write_nifti(labels.labels, labels.spacing, Path(path), np.uint8, description)


def save_probability_map(data: np.ndarray, spacing, path):
    """Запись вероятностного объёма (float32 NIfTI-1)."""
    _write_nifti(data, spacing, Path(path), np.float32)


def read_seed_record(directory):
    """
    Чтение seed фантома из поля descrip файла разметки.

    Returns:
        int или None, если запись отсутствует
    """
    directory = Path(directory)
    path = _find_file(directory, directory.name, LABEL_SUFFIX)
    if path is None:
        return None
    _, _, header = _read_nifti(path)
    text = header["descrip"].item().decode("ascii", errors="ignore")
    if not text.startswith("phantom seed="):
        return None
    return int(text.split("=", 1)[1])


# --- Синтетические фантомы ---------------------------------------------------

def _ellipsoid(shape, center, radii) -> np.ndarray:
    """Маска осевого эллипсоида."""
    grids = np.ogrid[tuple(slice(0, n) for n in shape)]
    dist = sum(((g - c) / r) ** 2 for g, c, r in zip(grids, center, radii))
    return dist <= 1.0


def _smooth_noise(rng, shape, sigma: float) -> np.ndarray:
    """Сглаженный гауссов шум, приведённый к [-1, 1]."""
    noise = ndimage.gaussian_filter(rng.standard_normal(shape), sigma=sigma, mode="reflect")
    peak = np.abs(noise).max()
    return noise / peak if peak > 0 else noise


def generate_phantom(seed: int, shape=(64, 64, 64), spacing=(1.0, 1.0, 1.0)):
    """
    Детерминированный синтетический случай с эталонной разметкой.

    Фон - сглаженный шум внутри эллипсоида "мозга" с тонкой "костью" вокруг.
    Опухоль - три вложенных случайных эллипсоида: отёк (2), некроз (1),
    усиление (4). Яркость модальностей повторяет типичную картину:
    FLAIR яркий на всей опухоли, T2 яркий на опухоли и сильнее на ядре,
    T1ce яркий на усиливающейся части, T1 почти нейтрален.

    Args:
        seed (int): Seed генератора
        shape (tuple): Размер (X, Y, Z), не меньше 32 по каждой оси
        spacing (tuple): Размер вокселя в мм

    Returns:
        tuple: (MultimodalVolume, LabelMap)

    Raises:
        ValueError: Размер слишком мал для размещения эллипсоидов
    """
    shape = tuple(int(n) for n in shape)
    if len(shape) != 3 or min(shape) < MIN_PHANTOM_EXTENT:
        raise ValueError(f"shape too small: {shape}; every extent must be >= {MIN_PHANTOM_EXTENT}")

    rng = np.random.default_rng(seed)
    extent = np.array(shape, dtype=np.float64)
    center = (extent - 1) / 2

    # "Мозг" и "кость"
    brain = _ellipsoid(shape, center, extent * 0.42)
    head = _ellipsoid(shape, center, extent * 0.47)
    skull = head & ~brain

    # Вложенные эллипсоиды опухоли
    wt_radii = rng.uniform(0.14, 0.20, size=3) * extent.min()
    margin = wt_radii + 2
    wt_center = np.array([rng.uniform(center[i] - extent[i] * 0.12, center[i] + extent[i] * 0.12)
                          for i in range(3)])
    wt_center = np.clip(wt_center, margin, extent - 1 - margin)
    tc_radii = wt_radii * 0.6
    tc_center = wt_center + rng.uniform(-0.15, 0.15, size=3) * wt_radii
    et_radii = tc_radii * 0.65

    wt = _ellipsoid(shape, wt_center, wt_radii)
    tc = _ellipsoid(shape, tc_center, tc_radii) & wt
    et = _ellipsoid(shape, tc_center, et_radii) & tc
    labels = masks_to_labels(MultiLabelMasks(wt=wt, tc=tc, et=et), spacing=spacing)

    edema = wt & ~tc
    necrosis = tc & ~et

    # Базовая ткань: общая гладкая текстура плюс своя для каждой модальности
    texture = _smooth_noise(rng, shape, sigma=4.0)
    tissue = {"t1": 0.55, "t1ce": 0.45, "t2": 0.35, "flair": 0.40}
    skull_level = {"t1": 0.8, "t1ce": 0.7, "t2": 0.2, "flair": 0.3}

    modalities = {}
    for name in MODALITIES:
        own = _smooth_noise(rng, shape, sigma=2.0)
        grid = np.zeros(shape, dtype=np.float64)
        grid[brain] = tissue[name] + 0.08 * texture[brain] + 0.04 * own[brain]
        grid[skull] = skull_level[name] + 0.05 * own[skull]

        if name == "flair":
            grid[edema] += 0.45
            grid[tc] += 0.25
        elif name == "t2":
            grid[wt] += 0.30
            grid[tc] += 0.20
        elif name == "t1ce":
            grid[et] += 0.55
            grid[necrosis] -= 0.15
        else:
            grid[wt] -= 0.05

        grid += 0.02 * rng.standard_normal(shape)
        # Масштаб, близкий к сырым МР-интенсивностям
        modalities[name] = (np.clip(grid, 0.0, None) * 1000.0).astype(np.float32)

    volume = MultimodalVolume(modalities=modalities, spacing=spacing, case_id=f"phantom_{seed}")
    return volume, labels
