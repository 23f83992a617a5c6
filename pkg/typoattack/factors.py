"""
Пространство типографических факторов: размер, прозрачность, цвет, позиция
"""
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Tuple

from typoattack.errors import InvalidFactor

FONT_SIZES: Tuple[int, ...] = (3, 6, 9, 12, 15)
OPACITIES: Tuple[int, ...] = (20, 40, 60, 80, 100)
GRID_ROWS = 4
GRID_COLS = 4

RGB = Tuple[int, int, int]

# Базовые тона; светлые и темные варианты выводятся смешиванием с белым/черным
_BASE_HUES: Dict[str, RGB] = {
    'red': (255, 0, 0),
    'orange': (255, 165, 0),
    'yellow': (255, 255, 0),
    'green': (0, 128, 0),
    'cyan': (0, 255, 255),
    'blue': (0, 0, 255),
    'purple': (128, 0, 128),
}
WHITE: RGB = (255, 255, 255)
BLACK: RGB = (0, 0, 0)


def _midpoint(color: RGB, target: RGB) -> RGB:
    # половина пути до target, округление половинок вверх
    return tuple((c + t + 1) // 2 for c, t in zip(color, target))


def _build_palette() -> Dict[str, RGB]:
    palette: Dict[str, RGB] = dict(_BASE_HUES)
    for name, rgb in _BASE_HUES.items():
        palette[f'd{name}'] = _midpoint(rgb, BLACK)
    for name, rgb in _BASE_HUES.items():
        palette[f'l{name}'] = _midpoint(rgb, WHITE)
    palette['white'] = WHITE
    palette['black'] = BLACK
    return palette


# Порядок как в таблицах приложения: тона, темные, светлые, white, black
PALETTE: Dict[str, RGB] = _build_palette()
COLOR_NAMES: Tuple[str, ...] = tuple(PALETTE)


def color_rgb(name: str) -> RGB:
    """Возвращает sRGB тройку по имени цвета"""
    try:
        return PALETTE[name]
    except KeyError:
        raise InvalidFactor(f"Неизвестный цвет {name!r}, доступно {len(PALETTE)} цветов") from None


@dataclass(frozen=True, order=True)
class GridCell:
    """Ячейка сетки 4x4, R{row}C{col}"""
    row: int
    col: int

    def __post_init__(self):
        if not (1 <= self.row <= GRID_ROWS and 1 <= self.col <= GRID_COLS):
            raise InvalidFactor(f"Ячейка вне сетки 4x4: row={self.row}, col={self.col}")

    @property
    def name(self) -> str:
        return f"R{self.row}C{self.col}"

    @classmethod
    def parse(cls, name: str) -> "GridCell":
        text = name.strip().upper()
        if len(text) != 4 or text[0] != 'R' or text[2] != 'C' or not (text[1] + text[3]).isdigit():
            raise InvalidFactor(f"Неверное имя ячейки {name!r}, ожидается формат R2C2")
        return cls(int(text[1]), int(text[3]))

    def __str__(self) -> str:
        return self.name


GRID_CELLS: Tuple[GridCell, ...] = tuple(
    GridCell(row, col) for row in range(1, GRID_ROWS + 1) for col in range(1, GRID_COLS + 1)
)


@dataclass(frozen=True)
class FactorConfig:
    """Одна точка пространства факторов"""
    font_size_px: int
    opacity_percent: int
    color: str
    cell: GridCell

    def __post_init__(self):
        if self.font_size_px not in FONT_SIZES:
            raise InvalidFactor(f"Размер шрифта {self.font_size_px}px вне набора {FONT_SIZES}")
        if self.opacity_percent not in OPACITIES:
            raise InvalidFactor(f"Прозрачность {self.opacity_percent}% вне набора {OPACITIES}")
        color_rgb(self.color)
        if not isinstance(self.cell, GridCell):
            raise InvalidFactor(f"Ячейка должна быть GridCell, получено {self.cell!r}")

    @classmethod
    def fixed(cls) -> "FactorConfig":
        """Конфигурация этапа Factor Fixing: 15px, 100%, R2C2, white"""
        return cls(font_size_px=15, opacity_percent=100, color='white', cell=GridCell(2, 2))

    @property
    def rgb(self) -> RGB:
        return color_rgb(self.color)

    def to_dict(self) -> Dict:
        return {
            'font_size_px': self.font_size_px,
            'opacity_percent': self.opacity_percent,
            'color': self.color,
            'cell': self.cell.name,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "FactorConfig":
        return cls(
            font_size_px=int(data['font_size_px']),
            opacity_percent=int(data['opacity_percent']),
            color=data['color'],
            cell=GridCell.parse(data['cell']),
        )


class Axis(str, Enum):
    """Ось перебора на этапе Factor Exploring"""
    FONT_SIZE = 'FS'
    OPACITY = 'FO'
    COLOR = 'FC'
    POSITION = 'FP'

    @classmethod
    def parse(cls, value: str) -> "Axis":
        aliases = {
            'fs': cls.FONT_SIZE, 'fontsize': cls.FONT_SIZE, 'size': cls.FONT_SIZE,
            'fo': cls.OPACITY, 'opacity': cls.OPACITY,
            'fc': cls.COLOR, 'color': cls.COLOR, 'colour': cls.COLOR,
            'fp': cls.POSITION, 'position': cls.POSITION,
        }
        key = value.strip().lower().replace('_', '').replace('-', '')
        if key not in aliases:
            raise InvalidFactor(f"Неизвестная ось {value!r}. Доступны: FS, FO, FC, FP")
        return aliases[key]

    @property
    def display_name(self) -> str:
        return {
            Axis.FONT_SIZE: 'Font Size',
            Axis.OPACITY: 'Font Opacity',
            Axis.COLOR: 'Font Color',
            Axis.POSITION: 'Position',
        }[self]


def axis_values(axis: Axis) -> List:
    """Значения на оси в порядке таблиц"""
    if axis is Axis.FONT_SIZE:
        return list(FONT_SIZES)
    if axis is Axis.OPACITY:
        return list(OPACITIES)
    if axis is Axis.COLOR:
        return list(COLOR_NAMES)
    return list(GRID_CELLS)


def setting_label(axis: Axis, value) -> str:
    """Подпись значения для отчетов: 3px, 20%, lred, R1C1"""
    if axis is Axis.FONT_SIZE:
        return f"{value}px"
    if axis is Axis.OPACITY:
        return f"{value}%"
    return str(value)


def variant_tag(axis: Axis, value) -> str:
    """Тег варианта: FS-6px, FO-20, FC-lred, FP-R1C1"""
    if axis is Axis.FONT_SIZE:
        return f"FS-{value}px"
    return f"{axis.value}-{value}"


def sweep_configs(axis: Axis) -> List[Tuple[str, FactorConfig]]:
    """
    Конфигурации перебора по оси; остальные факторы держим на фиксированных
    значениях этапа Factor Fixing
    """
    base = FactorConfig.fixed()
    configs = []
    for value in axis_values(axis):
        if axis is Axis.FONT_SIZE:
            config = FactorConfig(value, base.opacity_percent, base.color, base.cell)
        elif axis is Axis.OPACITY:
            config = FactorConfig(base.font_size_px, value, base.color, base.cell)
        elif axis is Axis.COLOR:
            config = FactorConfig(base.font_size_px, base.opacity_percent, value, base.cell)
        else:
            config = FactorConfig(base.font_size_px, base.opacity_percent, base.color, value)
        configs.append((variant_tag(axis, value), config))
    return configs


def axis_of_tag(tag: str):
    """Ось по тегу варианта или None для FIXED/WTYPO"""
    prefix = tag.split('-', 1)[0]
    for axis in Axis:
        if axis.value == prefix:
            return axis
    return None
