"""
Модуль проверки ресурсов перед рендерингом и прогоном
"""
from pathlib import Path
from typing import Dict, List, Tuple

import psutil
from rich.console import Console
from rich.panel import Panel

from typoattack.utils import format_bytes

console = Console()

# Средний размер PNG 224..512px после сжатия, с запасом
ESTIMATED_PNG_BYTES = 256 * 1024
DISK_RESERVE_BYTES = 512 * 1024 * 1024


def detect_hardware(path: Path = Path('.')) -> Dict:
    """
    Собирает информацию о CPU, RAM и диске под указанной папкой
    """
    existing = Path(path).resolve()
    while not existing.exists() and existing != existing.parent:
        existing = existing.parent

    mem = psutil.virtual_memory()
    disk = psutil.disk_usage(str(existing))
    return {
        'cpu': {
            'cores': psutil.cpu_count(logical=False) or 1,
            'threads': psutil.cpu_count(logical=True) or 1,
        },
        'ram': {
            'total_bytes': mem.total,
            'available_bytes': mem.available,
        },
        'disk': {
            'path': str(existing),
            'total_bytes': disk.total,
            'free_bytes': disk.free,
        },
    }


def check_render_resources(hardware: Dict, n_images: int,
                           bytes_per_image: int = ESTIMATED_PNG_BYTES) -> Tuple[bool, List[str], List[str]]:
    """
    Проверяет хватит ли места на диске под PNG

    Returns:
        (can_proceed, errors, warnings)
    """
    errors = []
    warnings = []

    required = n_images * bytes_per_image
    free = hardware['disk']['free_bytes']

    if required > free:
        errors.append(
            f"❌ Недостаточно места на диске ({hardware['disk']['path']})\n"
            f"   Требуется примерно: {format_bytes(required)}\n"
            f"   Свободно: {format_bytes(free)}"
        )
    elif required + DISK_RESERVE_BYTES > free:
        warnings.append(
            f"💡 Свободного места впритык: нужно ~{format_bytes(required)}, "
            f"свободно {format_bytes(free)}"
        )

    if hardware['ram']['available_bytes'] < 512 * 1024 * 1024:
        warnings.append(
            f"💡 Мало свободной RAM ({format_bytes(hardware['ram']['available_bytes'])}), "
            f"уменьшите --workers"
        )

    return len(errors) == 0, errors, warnings


def print_resource_check(can_proceed: bool, errors: List[str], warnings: List[str]) -> None:
    """Выводит результаты проверки ресурсов"""
    if errors:
        console.print(Panel("\n\n".join(errors), title="[red]Ошибки ресурсов[/red]", border_style="red"))
    if warnings:
        console.print(Panel("\n\n".join(warnings), title="[yellow]Предупреждения[/yellow]", border_style="yellow"))
    if can_proceed and not warnings:
        console.print("[green]✓ Ресурсов достаточно[/green]")
