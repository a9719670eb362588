# Импорт необходимых библиотек
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd                # Сводные таблицы и CSV

from evaluation.metrics import SCORE_COLUMNS
from utils.files import atomic_path

# Строки сводной таблицы
STATISTICS = ("Mean", "StdDev", "Median", "25% quantile", "75% quantile")

# Столбцы основной таблицы и их заголовки
TABLE_COLUMNS = {
    "dice_et": "Dice ET",
    "dice_wt": "Dice WT",
    "dice_tc": "Dice TC",
    "hd95_et": "Dist. ET",
    "hd95_wt": "Dist. WT",
    "hd95_tc": "Dist. TC",
}

SCORES_CSV = "scores.csv"
SUMMARY_CSV = "summary.csv"
SUMMARY_TXT = "summary.txt"


@dataclass
class MetricsReport:
    """
    Сводная статистика по случаям.

    Attributes:
        table (pd.DataFrame): Строки STATISTICS, столбцы SCORE_COLUMNS
        case_count (int): Число случаев
        excluded (dict): Столбец -> число значений NaN (пустые маски), не вошедших в статистику
        metadata (dict): Соглашения расчёта
    """
    table: pd.DataFrame
    case_count: int
    excluded: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def value(self, statistic: str, column: str) -> float:
        return float(self.table.loc[statistic, column])


def scores_frame(scores: list) -> pd.DataFrame:
    """Оценки по случаям одной таблицей (индекс - case_id)."""
    return pd.DataFrame([s.as_row() for s in scores], columns=("case_id",) + SCORE_COLUMNS).set_index("case_id")


def summarize(scores: list, ddof: int = 0) -> MetricsReport:
    """
    Среднее, стандартное отклонение, медиана и квартили по каждому столбцу.

    Квантили - линейная интерполяция. NaN (HD95 пустой маски) исключаются
    и подсчитываются отдельно.

    Args:
        scores (list): CaseScores
        ddof (int): 0 - популяционное отклонение, 1 - выборочное

    Raises:
        ValueError: Пустой список
    """
    if not scores:
        raise ValueError("cannot summarize an empty score list")

    frame = scores_frame(scores)
    table = pd.DataFrame(index=list(STATISTICS), columns=list(SCORE_COLUMNS), dtype=float)
    excluded = {}
    for column in SCORE_COLUMNS:
        values = frame[column].dropna()
        excluded[column] = int(frame[column].isna().sum())
        if values.empty:
            continue
        table.loc["Mean", column] = values.mean()
        table.loc["StdDev", column] = values.std(ddof=ddof) if len(values) > ddof else 0.0
        table.loc["Median", column] = values.median()
        table.loc["25% quantile", column] = values.quantile(0.25, interpolation="linear")
        table.loc["75% quantile", column] = values.quantile(0.75, interpolation="linear")

    metadata = {
        "hd95_symmetrization": "max of directed 95th percentiles",
        "quantile_method": "linear",
        "stddev_ddof": ddof,
        "hd95_empty_mask": "nan (excluded)",
    }
    return MetricsReport(table=table, case_count=len(scores), excluded=excluded, metadata=metadata)


def _write_text(text: str, path: Path):
    with atomic_path(path) as tmp:
        tmp.write_text(text, encoding="utf-8")


def write_scores_csv(scores: list, path) -> Path:
    """Таблица оценок по случаям (NaN записывается как nan)."""
    path = Path(path)
    _write_text(scores_frame(scores).to_csv(na_rep="nan"), path)
    return path


def format_report(report: MetricsReport, columns: dict = None) -> str:
    """Выровненная текстовая таблица в раскладке Dice/Dist. по классам ET, WT, TC."""
    columns = columns or TABLE_COLUMNS
    table = report.table[list(columns)].rename(columns=columns)
    lines = [table.to_string(float_format=lambda v: f"{v:.4f}", na_rep="nan"),
             "",
             f"Cases: {report.case_count}"]
    skipped = {k: v for k, v in report.excluded.items() if v and k in columns}
    if skipped:
        lines.append("Excluded (empty mask): " + ", ".join(f"{columns[k]}={v}" for k, v in skipped.items()))
    return "\n".join(lines) + "\n"


def write_report(report: MetricsReport, out_dir) -> tuple:
    """
    Запись сводки: summary.csv (все метрики) и summary.txt (основная таблица).

    Returns:
        tuple: Пути (csv, txt)
    """
    out_dir = Path(out_dir)
    csv_path = out_dir / SUMMARY_CSV
    txt_path = out_dir / SUMMARY_TXT
    _write_text(report.table.to_csv(na_rep="nan", index_label="statistic"), csv_path)
    _write_text(format_report(report), txt_path)
    return csv_path, txt_path


def format_comparison(reports: dict, columns: dict = None) -> str:
    """
    Сравнение нескольких наборов предсказаний в одной таблице.

    Строки сгруппированы по статистике: "Mean M1", "Mean M2", "StdDev M1", ...

    Args:
        reports (dict): Имя набора -> MetricsReport
    """
    columns = columns or TABLE_COLUMNS
    rows = {}
    for statistic in STATISTICS:
        for name, report in reports.items():
            rows[f"{statistic} {name}"] = report.table.loc[statistic, list(columns)]
    table = pd.DataFrame(rows).T.rename(columns=columns)
    return table.to_string(float_format=lambda v: f"{v:.4f}", na_rep="nan") + "\n"
