"""Исключения конвейера сегментации."""


class ConfigError(ValueError):
    """
    Ошибка проверки конфигурации.

    Содержит полный список проблем, каждая начинается с имени ключа,
    чтобы пользователь мог исправить файл конфигурации за один проход.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


class WeightArchiveError(ValueError):
    """Несовместимый или повреждённый архив весов."""


class TrainingDivergedError(RuntimeError):
    """Loss стал бесконечным или NaN во время обучения."""
