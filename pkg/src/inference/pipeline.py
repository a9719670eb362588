# Импорт необходимых библиотек
from dataclasses import dataclass

import numpy as np                  # Сборка вероятностных объёмов
import torch                        # Прогон сети без градиентов

from data.sampling import AXIS_NAMES, NETWORK_NATIVE_SIZE, axis_number, collate, extract_stack
from data.volumedata import LabelMap, MultimodalVolume, normalize
from inference.postprocess import assign_labels, remove_small_components
from network.model import SegmentationNetwork, model_forward
from utils.logger import AppLogger


@dataclass
class ProbabilityVolumes:
    """
    Вероятности трёх классов на сетке входного объёма.

    Attributes:
        wt (np.ndarray): Вся опухоль
        tc (np.ndarray): Ядро опухоли
        et (np.ndarray): Усиливающаяся часть
    """
    wt: np.ndarray
    tc: np.ndarray
    et: np.ndarray

    def __post_init__(self):
        if not (self.wt.shape == self.tc.shape == self.et.shape):
            raise ValueError(f"shape mismatch: wt {self.wt.shape}, tc {self.tc.shape}, et {self.et.shape}")

    @property
    def shape(self) -> tuple:
        return self.wt.shape

    def as_array(self) -> np.ndarray:
        """(3, X, Y, Z) в порядке wt, tc, et."""
        return np.stack([self.wt, self.tc, self.et])

    @classmethod
    def from_array(cls, array: np.ndarray) -> "ProbabilityVolumes":
        return cls(wt=array[0], tc=array[1], et=array[2])


class NetworkPredictor:
    """
    Обёртка обученной сети в виде функции: список SliceStack -> (B, 3, H, W).

    Сеть переводится в режим фиксированной статистики BN, прогон идёт
    батчами без градиентов.
    """

    def __init__(self, model: SegmentationNetwork, batch_size: int = 16):
        self.model = model.eval()
        self.batch_size = batch_size
        self.input_size = tuple(model.config.input_size)
        self.dtype = next(model.parameters()).dtype

    def __call__(self, stacks: list) -> np.ndarray:
        expected = self.model.config.num_modalities
        for stack in stacks:
            if stack.images.shape[0] != expected:
                raise ValueError(f"network expects {expected} modalities, "
                                 f"case {stack.case_id} has {stack.images.shape[0]}")
            if tuple(stack.images.shape[-2:]) != self.input_size:
                raise ValueError(f"network expects input size {self.input_size}, "
                                 f"got {tuple(stack.images.shape[-2:])}")

        outputs = []
        with torch.no_grad():
            for start in range(0, len(stacks), self.batch_size):
                x, _ = collate(stacks[start:start + self.batch_size], dtype=self.dtype)
                outputs.append(model_forward(self.model, x).cpu().numpy())
        return np.concatenate(outputs).astype(np.float32, copy=False)


def predict_plane(predictor, vol: MultimodalVolume, axis: str, size=None, batch_size: int = None,
                  executor=None) -> ProbabilityVolumes:
    """
    Прогон сети по всем срезам одной ориентации.

    Вероятности центрального среза каждой стопки возвращаются в нативную
    сетку; воксели вне окна обрезки получают 0.

    Args:
        predictor: Функция список SliceStack -> массив (B, 3, H, W)
        vol (MultimodalVolume): Нормализованный объём
        axis (str): "axial", "coronal" или "sagittal"
        size (tuple): Размер входа (по умолчанию input_size предиктора)
        batch_size (int): Срезов на вызов предиктора
        executor: Пул потоков для извлечения срезов

    Returns:
        ProbabilityVolumes: Форма совпадает с формой объёма
    """
    ax = axis_number(axis)
    size = tuple(size or getattr(predictor, "input_size", NETWORK_NATIVE_SIZE))
    batch_size = batch_size or getattr(predictor, "batch_size", 16)
    extent = vol.shape[ax]

    out = np.zeros((3,) + tuple(vol.shape), dtype=np.float32)
    # Вид с осью среза на первом месте после оси классов
    view = np.moveaxis(out, ax + 1, 1)

    def extract(index):
        return extract_stack(vol, axis, index, size)

    for start in range(0, extent, batch_size):
        indices = range(start, min(start + batch_size, extent))
        stacks = list(executor.map(extract, indices)) if executor is not None else [extract(i) for i in indices]
        probs = np.asarray(predictor(stacks), dtype=np.float32)
        if probs.shape != (len(stacks), 3) + size:
            raise ValueError(f"predictor returned shape {probs.shape}, expected {(len(stacks), 3) + size}")
        for stack, plane in zip(stacks, probs):
            view[:, stack.center_index] = stack.placement.paste_back(plane)

    return ProbabilityVolumes.from_array(out)


def fuse_planes(pa: ProbabilityVolumes, pc: ProbabilityVolumes, ps: ProbabilityVolumes) -> ProbabilityVolumes:
    """
    Среднее трёх ориентаций по каждому классу и вокселю.

    Значения сортируются перед суммированием, поэтому результат не зависит
    от порядка аргументов и лежит между минимумом и максимумом входов.
    """
    if not (pa.shape == pc.shape == ps.shape):
        raise ValueError(f"shape mismatch: {pa.shape}, {pc.shape}, {ps.shape}")

    ordered = np.sort(np.stack([pa.as_array(), pc.as_array(), ps.as_array()]).astype(np.float64), axis=0)
    mean = (ordered[0] + ordered[1] + ordered[2]) / 3.0
    mean = np.clip(mean, ordered[0], ordered[2])
    return ProbabilityVolumes.from_array(mean.astype(np.float32))


def segment_volume(predictor, vol: MultimodalVolume, threshold: float = 0.5, min_size: int = 100,
                   connectivity: int = 26, normalized: bool = False, return_probabilities: bool = False,
                   executor=None, logger: AppLogger = None):
    """
    Полный конвейер сегментации одного случая.

    Три ориентации -> усреднение -> метка по максимуму -> удаление мелких
    компонент. Аугментации и ансамбли не используются.

    Args:
        predictor: Функция список SliceStack -> (B, 3, H, W)
        vol (MultimodalVolume): Объём
        threshold (float): Порог фона
        min_size (int): Минимальный размер компоненты
        connectivity (int): Связность компонент
        normalized (bool): Объём уже нормализован
        return_probabilities (bool): Вернуть также усреднённые вероятности
        executor: Пул потоков для извлечения срезов

    Returns:
        LabelMap или (LabelMap, ProbabilityVolumes)
    """
    logger = logger or AppLogger()
    if not normalized:
        vol = normalize(vol, logger)

    planes = {axis: predict_plane(predictor, vol, axis, executor=executor) for axis in AXIS_NAMES}
    fused = fuse_planes(planes["axial"], planes["coronal"], planes["sagittal"])
    labels = assign_labels(fused, threshold, spacing=vol.spacing)
    filtered = remove_small_components(labels, min_size, connectivity)

    removed = int(np.count_nonzero(labels.labels != filtered.labels))
    logger.debug(f"Segmented {vol.case_id}: {int(np.count_nonzero(filtered.labels))} tumour voxels, "
                 f"{removed} removed as small components")
    if return_probabilities:
        return filtered, fused
    return filtered
