"""
Исключения пакета
"""


class TypoAttackError(Exception):
    """Базовая ошибка пакета"""


class ConfigError(TypoAttackError):
    """Неверная конфигурация запуска"""


class UsageError(TypoAttackError):
    """Неверное использование CLI (нет файла, пустой ввод)"""


# Рендеринг

class InvalidFactor(TypoAttackError):
    """Значение типографического фактора вне допустимого набора"""


class EmptyText(TypoAttackError):
    """Пустой текст типографики"""


class UnresolvableFont(TypoAttackError):
    """Шрифт не найден или не читается"""


class GlyphLargerThanImage(TypoAttackError):
    """Глиф не помещается в изображение"""


class AnchorOutOfBounds(TypoAttackError):
    """Глиф по якорю выходит за границы изображения"""


# Сборка датасета

class CorpusFormatError(TypoAttackError):
    """Ошибка формата базового корпуса или манифеста"""


class EmptyTypoPool(TypoAttackError):
    """После исключения правильного ответа не осталось кандидатов"""


class EmptyBaseSet(TypoAttackError):
    """Пустой базовый набор"""


# Промпты

class UnknownTemplate(TypoAttackError):
    """Неизвестный идентификатор шаблона"""


class NoChoices(TypoAttackError):
    """Нет вариантов ответа"""


class LabelTypoCollision(TypoAttackError):
    """Метка совпадает с типографикой"""


# Оценка и метрики

class EndpointUnreachable(TypoAttackError):
    """Эндпоинт модели недоступен, запуск прерывается"""


class ImagesNotMaterialized(TypoAttackError):
    """Изображения манифеста не отрендерены"""


class AxisMismatch(TypoAttackError):
    """Записи не относятся к запрошенной оси факторов"""


class RequestFailed(TypoAttackError):
    """Запрос к модели не удался после всех повторов (мягкая ошибка записи)"""
