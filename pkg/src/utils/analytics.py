# Импорт необходимых библиотек
import json                  # Запись журнала обучения в формате JSON-lines
import time                  # Измерение длительности эпох
from pathlib import Path     # Работа с путями


class TrainingAnalytics:
    """
    Класс для сбора и анализа статистики обучения.

    Отслеживает по эпохам:
    - Средний loss и мягкий Dice для каждого класса (WT, TC, ET)
    - Скорость обучения и номер шага оптимизатора
    - Время, прошедшее с начала обучения
    - Общее количество просмотренных срезов
    """

    # Поля одной записи журнала обучения
    RECORD_FIELDS = ("epoch", "step", "lr", "loss", "dice_wt", "dice_tc", "dice_et", "wall_time")

    def __init__(self, log_path=None):
        """
        Инициализация системы аналитики.

        Args:
            log_path: Путь к журналу JSON-lines (None - без записи на диск).
                      Существующий файл перезаписывается
        """
        self.log_path = Path(log_path) if log_path else None
        self.start_time = time.time()
        self.records = []
        self.sample_visits = 0

        if self.log_path:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            self.log_path.write_text("", encoding="utf-8")

    def track_epoch(self, epoch: int, step: int, lr: float, loss: float,
                    dice: tuple, samples: int) -> dict:
        """
        Сохранение итогов одной эпохи.

        Args:
            epoch (int): Номер эпохи (с единицы)
            step (int): Глобальный номер шага после эпохи
            lr (float): Скорость обучения на последнем шаге
            loss (float): Средний loss эпохи
            dice (tuple): Мягкий Dice (wt, tc, et)
            samples (int): Количество срезов, просмотренных за эпоху

        Returns:
            dict: Записанная строка журнала
        """
        self.sample_visits += samples
        record = {
            "epoch": epoch,
            "step": step,
            "lr": float(lr),
            "loss": float(loss),
            "dice_wt": float(dice[0]),
            "dice_tc": float(dice[1]),
            "dice_et": float(dice[2]),
            "wall_time": time.time() - self.start_time,
        }
        self.records.append(record)

        # Одна строка JSON на эпоху
        if self.log_path:
            with open(self.log_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(record) + "\n")
        return record

    def get_statistics(self) -> dict:
        """
        Агрегированная статистика обучения.

        Returns:
            dict: epochs, steps, sample_visits, best_dice_sum, last_dice_sum,
                  last_loss, mean_epoch_seconds
        """
        if not self.records:
            return {"epochs": 0, "steps": 0, "sample_visits": 0}

        dice_sums = [r["dice_wt"] + r["dice_tc"] + r["dice_et"] for r in self.records]
        last = self.records[-1]
        return {
            "epochs": len(self.records),
            "steps": last["step"],
            "sample_visits": self.sample_visits,
            "best_dice_sum": max(dice_sums),
            "last_dice_sum": dice_sums[-1],
            "last_loss": last["loss"],
            "mean_epoch_seconds": last["wall_time"] / len(self.records),
        }

    def export_data(self) -> list:
        """Все записи журнала обучения."""
        return list(self.records)

    @staticmethod
    def read_log(path) -> list:
        """
        Чтение журнала обучения с диска.

        Args:
            path: Путь к файлу JSON-lines

        Returns:
            list: Список словарей-записей
        """
        with open(path, "r", encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]
