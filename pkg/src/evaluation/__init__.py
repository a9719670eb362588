"""
Evaluation package initialization.
Contains overlap and surface-distance metrics and summary reports.
"""
from .metrics import CaseScores, dice_score, hd95, score_case, sensitivity_specificity
from .report import MetricsReport, format_comparison, summarize, write_report, write_scores_csv

__all__ = [
    'CaseScores',
    'dice_score',
    'hd95',
    'score_case',
    'sensitivity_specificity',
    'MetricsReport',
    'format_comparison',
    'summarize',
    'write_report',
    'write_scores_csv'
]
