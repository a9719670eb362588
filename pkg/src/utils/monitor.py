# Импорт необходимых библиотек
import psutil      # Библиотека для мониторинга системных ресурсов (CPU, память, потоки)
import time        # Библиотека для работы с временными метками и измерения интервалов
from datetime import datetime  # Библиотека для работы с датой и временем


class PerformanceMonitor:
    """
    Класс для мониторинга ресурсов процесса во время обучения и предсказания.

    Отслеживает и анализирует:
    - Использование CPU
    - Резидентную память (RSS) и процент памяти
    - Количество активных потоков
    - Время работы процесса
    """

    # Максимальный размер истории замеров
    HISTORY_LIMIT = 1000

    def __init__(self, thresholds: dict = None):
        """
        Инициализация системы мониторинга.

        Args:
            thresholds (dict): Пороговые значения метрик; недостающие
                               ключи берутся из значений по умолчанию
        """
        self.start_time = time.time()    # Время запуска для расчета uptime
        self.metrics_history = []        # История замеров
        self.process = psutil.Process()  # Текущий процесс
        self.peak_rss_mb = 0.0           # Пиковое потребление памяти

        # Пороговые значения для предупреждений
        self.thresholds = {
            'cpu_percent': 95.0,     # Загрузка CPU процессом
            'memory_percent': 80.0,  # Доля системной памяти
            'thread_count': 64       # Количество потоков
        }
        if thresholds:
            self.thresholds.update(thresholds)

    def get_metrics(self) -> dict:
        """
        Получение текущих метрик процесса.

        Returns:
            dict: timestamp, cpu_percent, rss_mb, memory_percent,
                  thread_count, uptime. При ошибке psutil - словарь
                  с ключом 'error'
        """
        try:
            rss_mb = self.process.memory_info().rss / (1024 * 1024)
            metrics = {
                'timestamp': datetime.now(),
                'cpu_percent': self.process.cpu_percent(),
                'rss_mb': rss_mb,
                'memory_percent': self.process.memory_percent(),
                'thread_count': self.process.num_threads(),
                'uptime': time.time() - self.start_time
            }
        except psutil.Error as e:
            return {'error': str(e), 'timestamp': datetime.now()}

        self.peak_rss_mb = max(self.peak_rss_mb, rss_mb)
        self.metrics_history.append(metrics)
        if len(self.metrics_history) > self.HISTORY_LIMIT:
            self.metrics_history.pop(0)  # Удаление самой старой записи
        return metrics

    def check_health(self, metrics: dict) -> dict:
        """
        Сравнение замера с пороговыми значениями.

        Args:
            metrics (dict): Результат get_metrics()

        Returns:
            dict: status ('healthy', 'warning' или 'error') и список warnings
        """
        if 'error' in metrics:
            return {'status': 'error', 'warnings': [metrics['error']]}

        warnings = []
        if metrics['cpu_percent'] > self.thresholds['cpu_percent']:
            warnings.append(f"High CPU usage: {metrics['cpu_percent']:.1f}%")
        if metrics['memory_percent'] > self.thresholds['memory_percent']:
            warnings.append(f"High memory usage: {metrics['memory_percent']:.1f}%")
        if metrics['thread_count'] > self.thresholds['thread_count']:
            warnings.append(f"High thread count: {metrics['thread_count']}")

        return {
            'status': 'warning' if warnings else 'healthy',
            'warnings': warnings,
            'timestamp': metrics['timestamp']
        }

    def get_average_metrics(self) -> dict:
        """
        Средние показатели за всю историю наблюдений.

        Returns:
            dict: avg_cpu, avg_rss_mb, avg_threads, peak_rss_mb, samples_count
                  или сообщение об ошибке при пустой истории
        """
        if not self.metrics_history:
            return {"error": "No metrics available"}

        count = len(self.metrics_history)
        return {
            'avg_cpu': sum(m['cpu_percent'] for m in self.metrics_history) / count,
            'avg_rss_mb': sum(m['rss_mb'] for m in self.metrics_history) / count,
            'avg_threads': sum(m['thread_count'] for m in self.metrics_history) / count,
            'peak_rss_mb': self.peak_rss_mb,
            'samples_count': count
        }

    def log_metrics(self, logger) -> dict:
        """
        Замер и запись метрик в лог вместе с предупреждениями.

        Args:
            logger: Объект AppLogger

        Returns:
            dict: Сделанный замер
        """
        metrics = self.get_metrics()
        health = self.check_health(metrics)

        if 'error' not in metrics:
            logger.debug(
                f"Resources - "
                f"CPU: {metrics['cpu_percent']:.1f}%, "
                f"RSS: {metrics['rss_mb']:.0f} MB, "
                f"Threads: {metrics['thread_count']}, "
                f"Uptime: {metrics['uptime']:.0f}s"
            )

        for warning in health['warnings']:
            logger.warning(f"Performance warning: {warning}")
        return metrics
