# Импорт необходимых библиотек
import logging     # Стандартная библиотека Python для логирования
import os         # Библиотека для работы с операционной системой и файлами
from datetime import datetime  # Библиотека для работы с датой и временем

# Имя общего логгера конвейера сегментации
LOGGER_NAME = "BrainSeg"


class AppLogger:
    """
    Класс для логирования работы конвейера сегментации.

    Обеспечивает:
    - Сохранение логов в файлы с датой в имени
    - Вывод логов в консоль
    - Различные уровни логирования (debug, info, warning, error)
    - Форматирование сообщений с временными метками

    Несколько экземпляров AppLogger используют один и тот же именованный
    логгер, поэтому обработчики подключаются только один раз за процесс.
    """

    def __init__(self, log_dir: str = None, level: str = None):
        """
        Инициализация системы логирования.

        Args:
            log_dir (str): Директория для файлов логов
                           (по умолчанию BRAINSEG_LOG_DIR или "logs")
            level (str): Уровень логирования
                         (по умолчанию BRAINSEG_LOG_LEVEL или "INFO")
        """
        self.logs_dir = log_dir or os.getenv("BRAINSEG_LOG_DIR", "logs")
        level_name = (level or os.getenv("BRAINSEG_LOG_LEVEL", "INFO")).upper()

        self.logger = logging.getLogger(LOGGER_NAME)
        self.logger.setLevel(getattr(logging, level_name, logging.INFO))
        # Логгер не передаёт сообщения корневому, чтобы не было дублей
        self.logger.propagate = False

        if not self.logger.handlers:
            self._attach_handlers()

    def _attach_handlers(self):
        """Создание файлового и консольного обработчиков."""
        # Создание директории для хранения файлов логов
        os.makedirs(self.logs_dir, exist_ok=True)

        # Формат имени файла: brainseg_YYYY-MM-DD.log
        current_date = datetime.now().strftime("%Y-%m-%d")
        log_file = os.path.join(self.logs_dir, f"brainseg_{current_date}.log")

        # Формат: YYYY-MM-DD HH:MM:SS - LEVEL - Message
        formatter = logging.Formatter(
            '%(asctime)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setFormatter(formatter)

        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)

        self.logger.addHandler(file_handler)
        self.logger.addHandler(console_handler)

    def info(self, message: str):
        """
        Логирование информационного сообщения.

        Args:
            message (str): Текст информационного сообщения
        """
        self.logger.info(message)

    def error(self, message: str, exc_info=None):
        """
        Логирование ошибки.

        Args:
            message (str): Текст сообщения об ошибке
            exc_info: Информация об исключении (по умолчанию None).
                      Если передано True, в лог добавляется стек вызовов
        """
        self.logger.error(message, exc_info=exc_info)

    def debug(self, message: str):
        """Логирование отладочной информации."""
        self.logger.debug(message)

    def warning(self, message: str):
        """Логирование предупреждения."""
        self.logger.warning(message)
