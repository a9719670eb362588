# Импорт необходимых библиотек
from dataclasses import dataclass, field  # Контейнеры срезов и планов выборки

import numpy as np                        # Работа с массивами
import torch                              # Сборка батчей для сети

from data.volumedata import LabelMap, MultimodalVolume, normalize

# Номер оси массива (X, Y, Z) для каждой анатомической ориентации
AXES = {"sagittal": 0, "coronal": 1, "axial": 2}

# Порядок ориентаций при случайном выборе
AXIS_NAMES = ("axial", "coronal", "sagittal")

# Размер входа предобученного энкодера
NETWORK_NATIVE_SIZE = (224, 224)


def axis_number(axis) -> int:
    """Номер оси массива по имени ориентации."""
    if axis not in AXES:
        raise ValueError(f"unknown axis '{axis}'; expected one of {sorted(AXES)}")
    return AXES[axis]


def reflect_index(index: int, extent: int) -> int:
    """Отражение индекса среза на границе: -1 -> 1, extent -> extent - 2."""
    if index < 0:
        return -index
    if index >= extent:
        return 2 * (extent - 1) - index
    return index


@dataclass(frozen=True)
class Placement:
    """
    Геометрия перехода между нативным срезом (h, w) и входом сети (H, W).

    По каждой оси нативный размер больше входа - центральная обрезка,
    меньше - отражающее дополнение, равен - без изменений.

    Attributes:
        native_shape (tuple): (h, w) нативного среза
        size (tuple): (H, W) входа сети
        crop (tuple): Смещение окна обрезки в нативном срезе по каждой оси
        pad (tuple): Пары (до, после) дополнения по каждой оси
    """
    native_shape: tuple
    size: tuple
    crop: tuple
    pad: tuple

    @classmethod
    def for_shape(cls, native_shape, size) -> "Placement":
        crop, pad = [], []
        for native, target in zip(native_shape, size):
            if native > target:
                crop.append((native - target) // 2)
                pad.append((0, 0))
            else:
                crop.append(0)
                before = (target - native) // 2
                pad.append((before, target - native - before))
        return cls(tuple(native_shape), tuple(size), tuple(crop), tuple(pad))

    def apply(self, plane: np.ndarray, mode: str = "reflect") -> np.ndarray:
        """
        Приведение нативного среза (..., h, w) к размеру (..., H, W).

        Args:
            plane (np.ndarray): Нативный срез или стопка срезов
            mode (str): "reflect" для изображений, "constant" (нули) для масок
        """
        window = tuple(slice(c, c + min(n, s)) for c, n, s in zip(self.crop, self.native_shape, self.size))
        out = plane[(Ellipsis,) + window]
        if any(p != (0, 0) for p in self.pad):
            widths = [(0, 0)] * (out.ndim - 2) + list(self.pad)
            out = np.pad(out, widths, mode=mode)
        return out

    def paste_back(self, plane: np.ndarray) -> np.ndarray:
        """
        Возврат предсказания (..., H, W) в нативную сетку (..., h, w).

        Воксели вне окна обрезки получают 0, дополненные края отбрасываются.
        """
        out = np.zeros(plane.shape[:-2] + tuple(self.native_shape), dtype=plane.dtype)
        dst, src = [], []
        for crop, (before, _), native, size in zip(self.crop, self.pad, self.native_shape, self.size):
            length = min(native, size)
            dst.append(slice(crop, crop + length))
            src.append(slice(before, before + length))
        out[(Ellipsis,) + tuple(dst)] = plane[(Ellipsis,) + tuple(src)]
        return out


@dataclass
class SliceStack:
    """
    2.5D-вход сети: по три соседних среза для каждой модальности.

    Attributes:
        images (np.ndarray): float32 формы (M, 3, H, W); канал c модальности
                             равен нативному срезу center_index - 1 + c
        axis (str): Ориентация среза
        center_index (int): Индекс центрального среза
        placement (Placement): Геометрия для возврата предсказания
        case_id (str): Идентификатор случая
    """
    images: np.ndarray
    axis: str
    center_index: int
    placement: Placement
    case_id: str = ""


@dataclass
class SliceTarget:
    """Эталонные маски центрального среза: float32 (3, H, W) в порядке wt, tc, et."""
    masks: np.ndarray
    axis: str
    center_index: int
    placement: Placement

    @property
    def wt(self) -> np.ndarray:
        return self.masks[0]

    @property
    def tc(self) -> np.ndarray:
        return self.masks[1]

    @property
    def et(self) -> np.ndarray:
        return self.masks[2]


def _check_index(shape, axis, index) -> int:
    ax = axis_number(axis)
    extent = shape[ax]
    if extent < 2:
        raise ValueError(f"extent {extent} along {axis} is too small for a 3-slice stack")
    if not 0 <= index < extent:
        raise IndexError(f"slice index {index} out of range [0, {extent}) along {axis}")
    return ax


def _plane_shape(shape, ax) -> tuple:
    return tuple(n for i, n in enumerate(shape) if i != ax)


def extract_stack(vol: MultimodalVolume, axis: str, index: int, size=NETWORK_NATIVE_SIZE) -> SliceStack:
    """
    Извлечение 2.5D-стопки вокруг среза index.

    Args:
        vol (MultimodalVolume): Нормализованный объём
        axis (str): "axial", "coronal" или "sagittal"
        index (int): Индекс центрального среза
        size (tuple): Размер входа сети (H, W)

    Returns:
        SliceStack: Срезы index-1, index, index+1 с отражением на границах

    Raises:
        IndexError: Индекс вне диапазона
    """
    ax = _check_index(vol.shape, axis, index)
    extent = vol.shape[ax]
    indices = [reflect_index(index + offset, extent) for offset in (-1, 0, 1)]
    placement = Placement.for_shape(_plane_shape(vol.shape, ax), size)

    # Ось среза выносится вперёд, остальные оси сохраняют исходный порядок
    images = np.stack([np.moveaxis(vol.modalities[name], ax, 0)[indices] for name in vol.names])

    return SliceStack(
        images=placement.apply(images.astype(np.float32, copy=False), mode="reflect"),
        axis=axis,
        center_index=int(index),
        placement=placement,
        case_id=vol.case_id,
    )


def extract_target(lm: LabelMap, axis: str, index: int, size=NETWORK_NATIVE_SIZE) -> SliceTarget:
    """
    Эталонные маски центрального среза с той же геометрией, что у стопки.

    Дополнение масок заполняется нулями.
    """
    ax = _check_index(lm.shape, axis, index)
    plane = np.take(lm.labels, index, axis=ax)
    masks = np.stack([
        np.isin(plane, (1, 2, 4)),
        np.isin(plane, (1, 4)),
        plane == 4,
    ]).astype(np.float32)
    placement = Placement.for_shape(plane.shape, size)
    return SliceTarget(
        masks=placement.apply(masks, mode="constant"),
        axis=axis,
        center_index=int(index),
        placement=placement,
    )


@dataclass
class TrainingCase:
    """
    Случай для обучения: нормализованный объём, разметка и индексы
    срезов с опухолью по каждой ориентации.
    """
    volume: MultimodalVolume
    labels: LabelMap
    tumor_slices: dict = field(default_factory=dict)

    @classmethod
    def prepare(cls, volume: MultimodalVolume, labels: LabelMap, normalized: bool = False) -> "TrainingCase":
        """
        Подготовка случая: нормализация и поиск срезов с опухолью.

        Args:
            volume (MultimodalVolume): Объём
            labels (LabelMap): Разметка (обязательна)
            normalized (bool): Объём уже нормализован
        """
        if labels is None:
            raise ValueError(f"case {volume.case_id} has no label map")
        if labels.shape != volume.shape:
            raise ValueError(f"shape mismatch in case {volume.case_id}: labels {labels.shape} vs volume {volume.shape}")
        if not normalized:
            volume = normalize(volume)

        tumor = labels.labels > 0
        tumor_slices = {}
        for name, ax in AXES.items():
            other = tuple(i for i in range(3) if i != ax)
            tumor_slices[name] = np.flatnonzero(tumor.any(axis=other))
        return cls(volume=volume, labels=labels, tumor_slices=tumor_slices)


@dataclass(frozen=True)
class SamplePlan:
    """Один запланированный срез эпохи."""
    case_index: int
    axis: str
    index: int


def draw_epoch_plan(cases: list, rng: np.random.Generator, samples_per_case: int = 20,
                    tumor_fraction: float = 0.5) -> list:
    """
    Случайный план эпохи: samples_per_case срезов на каждый случай.

    Ориентация выбирается равновероятно. С вероятностью tumor_fraction
    индекс берётся из срезов с опухолью (если они есть), иначе - из всех.
    """
    if not cases:
        raise ValueError("cannot sample an epoch from an empty case list")

    plan = []
    for case_index, case in enumerate(cases):
        for _ in range(samples_per_case):
            axis = AXIS_NAMES[int(rng.integers(len(AXIS_NAMES)))]
            extent = case.volume.shape[AXES[axis]]
            tumor = case.tumor_slices[axis]
            if rng.random() < tumor_fraction and tumor.size:
                index = int(tumor[rng.integers(tumor.size)])
            else:
                index = int(rng.integers(extent))
            plan.append(SamplePlan(case_index, axis, index))
    return plan


def sample_epoch(cases: list, rng: np.random.Generator, samples_per_case: int = 20,
                 tumor_fraction: float = 0.5, size=NETWORK_NATIVE_SIZE, executor=None) -> list:
    """
    Выборка срезов одной эпохи.

    Args:
        cases (list): Список TrainingCase
        rng (np.random.Generator): Генератор случайных чисел
        samples_per_case (int): Срезов на случай
        tumor_fraction (float): Доля срезов, выбираемых из области опухоли
        size (tuple): Размер входа сети
        executor: Пул потоков для параллельного извлечения (порядок сохраняется)

    Returns:
        list: Пары (SliceStack, SliceTarget), ровно samples_per_case * len(cases)
    """
    plan = draw_epoch_plan(cases, rng, samples_per_case, tumor_fraction)

    def materialize(item: SamplePlan):
        case = cases[item.case_index]
        return (extract_stack(case.volume, item.axis, item.index, size),
                extract_target(case.labels, item.axis, item.index, size))

    if executor is not None:
        return list(executor.map(materialize, plan))
    return [materialize(item) for item in plan]


def collate(samples: list, dtype=torch.float32):
    """
    Сборка батча.

    Args:
        samples (list): Пары (SliceStack, SliceTarget) или только SliceStack

    Returns:
        tuple: (входы (B, M, 3, H, W), цели (B, 3, H, W) или None)
    """
    if samples and isinstance(samples[0], SliceStack):
        stacks, targets = samples, None
    else:
        stacks, targets = zip(*samples)

    x = torch.from_numpy(np.stack([s.images for s in stacks])).to(dtype)
    y = None
    if targets is not None:
        y = torch.from_numpy(np.stack([t.masks for t in targets])).to(dtype)
    return x, y
