"""
Вспомогательные утилиты
"""
import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator, Tuple, Union

from rich.console import Console
from rich.logging import RichHandler

PathLike = Union[str, Path]


def ensure_dir(path: PathLike) -> Path:
    """Создает директорию если её нет"""
    dir_path = Path(path)
    dir_path.mkdir(parents=True, exist_ok=True)
    return dir_path


def get_project_root() -> Path:
    """Возвращает корневую директорию проекта"""
    return Path(__file__).parent.parent


def write_file(path: PathLike, content: str) -> None:
    """Записывает файл с созданием директорий если нужно"""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    file_path.write_text(content, encoding='utf-8')


def atomic_write_bytes(path: PathLike, data: bytes) -> None:
    """
    Атомарная запись: пишем во временный файл рядом и переименовываем.
    Читатель видит либо старое содержимое, либо новое целиком.
    """
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{file_path.name}.", suffix=".tmp", dir=file_path.parent)
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp_name, file_path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def sha256_bytes(data: bytes) -> str:
    """SHA-256 от байтов (hex)"""
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: PathLike) -> str:
    """SHA-256 содержимого файла (hex)"""
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def json_line(record: Any) -> str:
    """Одна строка JSONL со стабильным порядком полей"""
    return json.dumps(record, ensure_ascii=False, separators=(',', ':'))


def write_jsonl(path: PathLike, records: Iterable[Any]) -> int:
    """Записывает JSONL атомарно, возвращает количество строк"""
    lines = [json_line(r) for r in records]
    payload = ''.join(line + '\n' for line in lines)
    atomic_write_bytes(path, payload.encode('utf-8'))
    return len(lines)


def iter_jsonl(path: PathLike) -> Iterator[Tuple[int, Any]]:
    """Итерирует (номер строки, объект) по JSONL, пропуская пустые строки"""
    with open(path, 'r', encoding='utf-8') as f:
        for line_num, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            yield line_num, json.loads(line)


def format_bytes(bytes_value: float) -> str:
    """Форматирует байты в читаемый формат"""
    for unit in ['B', 'KB', 'MB', 'GB', 'TB']:
        if bytes_value < 1024.0:
            return f"{bytes_value:.2f} {unit}"
        bytes_value /= 1024.0
    return f"{bytes_value:.2f} PB"


def setup_logging(verbose: bool = False, console: Console = None) -> None:
    """Подключает RichHandler к корневому логгеру"""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=verbose)],
        force=True,
    )
