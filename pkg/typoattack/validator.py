"""
Модуль валидации параметров запуска
"""
import re
from pathlib import Path
from typing import Any, Iterable, Optional, Tuple
from urllib.parse import urlparse


def validate_url(url: str) -> Tuple[bool, Optional[str]]:
    """
    Валидирует базовый URL эндпоинта

    Returns:
        (is_valid, error_message)
    """
    if not url:
        return False, "URL эндпоинта не может быть пустым"

    parsed = urlparse(url)
    if parsed.scheme not in ('http', 'https'):
        return False, "URL должен начинаться с http:// или https://. Пример: http://localhost:8000/v1"

    if not parsed.netloc:
        return False, "В URL нет хоста. Пример: http://localhost:8000/v1"

    return True, None


def validate_seed(seed: Any) -> Tuple[bool, Optional[str]]:
    """
    Валидирует сид (беззнаковое 64-битное число)

    Returns:
        (is_valid, error_message)
    """
    if isinstance(seed, bool):
        return False, "Сид должен быть целым числом"

    if not isinstance(seed, int):
        try:
            seed = int(seed)
        except (TypeError, ValueError):
            return False, "Сид должен быть целым числом"

    if seed < 0 or seed >= 2 ** 64:
        return False, "Сид должен быть в диапазоне 0 .. 2^64-1"

    return True, None


def validate_timeout(timeout: Any) -> Tuple[bool, Optional[str]]:
    """
    Валидирует таймаут запроса в секундах

    Returns:
        (is_valid, error_message)
    """
    try:
        value = float(timeout)
    except (TypeError, ValueError):
        return False, "Таймаут должен быть числом"

    if value <= 0:
        return False, "Таймаут должен быть больше 0"

    return True, None


def validate_max_in_flight(value: Any) -> Tuple[bool, Optional[str]]:
    """
    Валидирует количество одновременных запросов

    Returns:
        (is_valid, error_message)
    """
    try:
        count = int(value)
    except (TypeError, ValueError):
        return False, "max_in_flight должен быть целым числом"

    if count < 1:
        return False, "max_in_flight должен быть не меньше 1"

    if count > 256:
        return False, "max_in_flight слишком большой (максимум 256)"

    return True, None


def validate_max_retries(value: Any) -> Tuple[bool, Optional[str]]:
    """
    Валидирует количество повторов запроса

    Returns:
        (is_valid, error_message)
    """
    try:
        count = int(value)
    except (TypeError, ValueError):
        return False, "max_retries должен быть целым числом"

    if count < 0 or count > 10:
        return False, "max_retries должен быть в диапазоне 0-10"

    return True, None


def validate_existing_path(path: Optional[str], label: str) -> Tuple[bool, Optional[str]]:
    """
    Проверяет что путь задан и существует

    Returns:
        (is_valid, error_message)
    """
    if not path:
        return False, f"Не указан путь: {label}"

    if not Path(path).exists():
        return False, f"{label}: файл не найден ({path})"

    return True, None


def validate_prompt_id(prompt_id: str, known_ids: Iterable[str]) -> Tuple[bool, Optional[str]]:
    """
    Валидирует идентификатор шаблона промпта

    Returns:
        (is_valid, error_message)
    """
    known = list(known_ids)
    if prompt_id not in known:
        return False, f"Неизвестный шаблон {prompt_id!r}. Доступны: {', '.join(known)}"

    return True, None


def validate_model_name(name: str) -> Tuple[bool, Optional[str]]:
    """
    Валидирует имя модели на эндпоинте

    Returns:
        (is_valid, error_message)
    """
    if not name:
        return False, "Имя модели не может быть пустым"

    if not re.match(r'^[\w.:/@+-]+$', name):
        return False, "Имя модели может содержать только буквы, цифры и символы . : / @ + - _"

    return True, None
