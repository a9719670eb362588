# Импорт необходимых библиотек
from dataclasses import dataclass, field

import numpy as np                 # Подсчёт вокселей
from scipy import ndimage          # Поверхность маски и карта расстояний

from data.volumedata import LabelMap, labels_to_masks

# Классы в порядке столбцов итоговой таблицы
CLASSES = ("et", "wt", "tc")

# Значение HD95, когда поверхность одной из масок пуста
HD95_SENTINEL = float("nan")

# Столбцы таблицы оценок по случаям
SCORE_COLUMNS = (
    ("dice_et", "dice_wt", "dice_tc")
    + ("hd95_et", "hd95_wt", "hd95_tc")
    + ("sens_et", "sens_wt", "sens_tc")
    + ("spec_et", "spec_wt", "spec_tc")
)


def _check_shapes(a, b):
    if np.shape(a) != np.shape(b):
        raise ValueError(f"shape mismatch: {np.shape(a)} vs {np.shape(b)}")


def dice_score(a: np.ndarray, b: np.ndarray) -> float:
    """
    Коэффициент Dice 2|a∩b| / (|a| + |b|).

    Обе маски пусты - 1.0, пуста ровно одна - 0.0.
    """
    _check_shapes(a, b)
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / total


def surface(mask: np.ndarray) -> np.ndarray:
    """Воксели маски, у которых хотя бы один 6-сосед вне маски (за границей сетки - фон)."""
    mask = np.asarray(mask, dtype=bool)
    structure = ndimage.generate_binary_structure(mask.ndim, 1)
    return mask & ~ndimage.binary_erosion(mask, structure=structure, border_value=0)


def directed_surface_distances(a: np.ndarray, b: np.ndarray, spacing) -> np.ndarray:
    """Расстояния в мм от каждого вокселя поверхности a до ближайшего вокселя поверхности b."""
    surface_a = surface(a)
    surface_b = surface(b)
    distance_to_b = ndimage.distance_transform_edt(~surface_b, sampling=spacing)
    return distance_to_b[surface_a]


def hd95(a: np.ndarray, b: np.ndarray, spacing=(1.0, 1.0, 1.0)) -> float:
    """
    Симметричное 95-процентное расстояние Хаусдорфа в мм.

    Максимум из двух направленных 95-х процентилей (линейная интерполяция)
    расстояний между поверхностями.

    Returns:
        float: Расстояние или HD95_SENTINEL (NaN), если одна из масок пуста
    """
    _check_shapes(a, b)
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if not a.any() or not b.any():
        return HD95_SENTINEL

    spacing = tuple(float(s) for s in spacing)
    forward = np.percentile(directed_surface_distances(a, b, spacing), 95)
    backward = np.percentile(directed_surface_distances(b, a, spacing), 95)
    return float(max(forward, backward))


def sensitivity_specificity(a: np.ndarray, b: np.ndarray) -> tuple:
    """
    Чувствительность и специфичность предсказания a относительно эталона b.

    Пустой эталон - чувствительность 1.0; пустой фон эталона - специфичность 1.0.

    Returns:
        tuple: (sensitivity, specificity)
    """
    _check_shapes(a, b)
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    tp = int(np.count_nonzero(a & b))
    fn = int(np.count_nonzero(~a & b))
    fp = int(np.count_nonzero(a & ~b))
    tn = int(np.count_nonzero(~a & ~b))
    sensitivity = tp / (tp + fn) if tp + fn else 1.0
    specificity = tn / (tn + fp) if tn + fp else 1.0
    return sensitivity, specificity


@dataclass
class CaseScores:
    """
    Оценки одного случая по классам ET, WT, TC.

    Attributes:
        case_id (str): Идентификатор случая
        dice (dict): Класс -> Dice
        hd95 (dict): Класс -> HD95 в мм (NaN - пустая маска)
        sensitivity (dict): Класс -> чувствительность
        specificity (dict): Класс -> специфичность
    """
    case_id: str
    dice: dict = field(default_factory=dict)
    hd95: dict = field(default_factory=dict)
    sensitivity: dict = field(default_factory=dict)
    specificity: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        row = {"case_id": self.case_id}
        row.update({f"dice_{k}": self.dice[k] for k in CLASSES})
        row.update({f"hd95_{k}": self.hd95[k] for k in CLASSES})
        row.update({f"sens_{k}": self.sensitivity[k] for k in CLASSES})
        row.update({f"spec_{k}": self.specificity[k] for k in CLASSES})
        return row


def score_case(pred: LabelMap, truth: LabelMap, spacing=None, case_id: str = "case") -> CaseScores:
    """
    Все метрики для трёх вложенных классов.

    Args:
        pred (LabelMap): Предсказание
        truth (LabelMap): Эталон
        spacing (tuple): Размер вокселя в мм (по умолчанию из эталона)
        case_id (str): Идентификатор случая

    Raises:
        ValueError: Формы карт не совпадают
    """
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch in case {case_id}: prediction {pred.shape} vs truth {truth.shape}")
    spacing = tuple(spacing) if spacing is not None else truth.spacing

    predicted = labels_to_masks(pred)
    reference = labels_to_masks(truth)
    scores = CaseScores(case_id=case_id)
    for name in CLASSES:
        a = getattr(predicted, name)
        b = getattr(reference, name)
        scores.dice[name] = dice_score(a, b)
        scores.hd95[name] = hd95(a, b, spacing)
        scores.sensitivity[name], scores.specificity[name] = sensitivity_specificity(a, b)
    return scores
