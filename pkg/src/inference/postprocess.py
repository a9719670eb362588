# Импорт необходимых библиотек
import numpy as np                 # Работа с массивами
from scipy import ndimage          # Разметка связных компонент

from data.volumedata import LabelMap, MultiLabelMasks, labels_to_masks, masks_to_labels

# Связность -> ранг структурного элемента scipy
CONNECTIVITY_RANK = {6: 1, 18: 2, 26: 3}

# Метки классов в порядке специфичности (ET, TC, WT)
SPECIFIC_LABELS = np.array([4, 1, 2], dtype=np.uint8)


def assign_labels(pv, threshold: float = 0.5, spacing=(1.0, 1.0, 1.0)) -> LabelMap:
    """
    Метка вокселя по максимальной вероятности среди трёх классов.

    Если все три вероятности ниже порога - фон. Иначе argmax класса:
    WT -> 2, TC -> 1, ET -> 4; при равенстве выбирается более специфичный
    класс (ET, затем TC, затем WT).

    Args:
        pv (ProbabilityVolumes): Вероятности классов
        threshold (float): Порог фона
        spacing (tuple): Размер вокселя результата

    Returns:
        LabelMap: Метки {0, 1, 2, 4}
    """
    # np.argmax возвращает первый максимум, поэтому порядок - от специфичного к общему
    stacked = np.stack([pv.et, pv.tc, pv.wt])
    winner = np.argmax(stacked, axis=0)
    labels = SPECIFIC_LABELS[winner]
    labels[stacked.max(axis=0) < threshold] = 0
    return LabelMap(labels=labels, spacing=spacing)


def component_structure(connectivity: int) -> np.ndarray:
    """Структурный элемент 3x3x3 для 6-, 18- или 26-связности."""
    if connectivity not in CONNECTIVITY_RANK:
        raise ValueError(f"connectivity must be one of {sorted(CONNECTIVITY_RANK)}, got {connectivity}")
    return ndimage.generate_binary_structure(3, CONNECTIVITY_RANK[connectivity])


def filter_components(mask: np.ndarray, min_size: int, connectivity: int = 26) -> np.ndarray:
    """Удаление связных компонент бинарной маски размером меньше min_size вокселей."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return mask.copy()
    labeled, _ = ndimage.label(mask, structure=component_structure(connectivity))
    sizes = np.bincount(labeled.ravel())
    keep = sizes >= min_size
    keep[0] = False
    return keep[labeled]


def remove_small_components(lm: LabelMap, min_size: int = 100, connectivity: int = 26) -> LabelMap:
    """
    Удаление мелких связных компонент в каждой вложенной маске.

    Маски WT, TC, ET фильтруются независимо, затем метки собираются
    заново; вложенность восстанавливается пересечением.

    Args:
        lm (LabelMap): Карта меток
        min_size (int): Минимальный размер сохраняемой компоненты
        connectivity (int): 6, 18 или 26

    Returns:
        LabelMap: Отфильтрованная карта
    """
    masks = labels_to_masks(lm)
    filtered = MultiLabelMasks(
        wt=filter_components(masks.wt, min_size, connectivity),
        tc=filter_components(masks.tc, min_size, connectivity),
        et=filter_components(masks.et, min_size, connectivity),
    )
    return masks_to_labels(filtered, spacing=lm.spacing)
