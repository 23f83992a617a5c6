"""
Модуль рендеринга типографики: растеризация текста и наложение на изображение
"""
import io
import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
from PIL import Image, ImageDraw, ImageFont, features

from typoattack.errors import AnchorOutOfBounds, EmptyText, GlyphLargerThanImage, InvalidFactor, UnresolvableFont
from typoattack.factors import FONT_SIZES, GRID_COLS, GRID_ROWS, FactorConfig, GridCell, color_rgb
from typoattack.utils import sha256_bytes, sha256_file

logger = logging.getLogger(__name__)

DEFAULT_FONT = "default"
PNG_COMPRESS_LEVEL = 6

FontAsset = Union[str, Path, None]

# FreeType лица не потокобезопасны: держим свой кэш шрифтов на каждый поток
_thread_fonts = threading.local()


@dataclass
class GlyphBitmap:
    """Маска покрытия растеризованного текста (alpha 0..255)"""
    alpha: np.ndarray

    @property
    def width(self) -> int:
        return int(self.alpha.shape[1])

    @property
    def height(self) -> int:
        return int(self.alpha.shape[0])

    @property
    def coverage(self) -> np.ndarray:
        """Покрытие в [0, 1]"""
        return self.alpha.astype(np.float64) / 255.0


@dataclass
class RasterImage:
    """RGB изображение, uint8 H x W x 3"""
    pixels: np.ndarray

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @classmethod
    def from_pil(cls, image: Image.Image) -> "RasterImage":
        return cls(np.asarray(image.convert('RGB'), dtype=np.uint8).copy())

    def to_pil(self) -> Image.Image:
        return Image.fromarray(self.pixels)


def _is_default(font_asset: FontAsset) -> bool:
    return font_asset is None or str(font_asset) in ('', DEFAULT_FONT)


def _load_font(font_asset: FontAsset, size: int) -> ImageFont.FreeTypeFont:
    if _is_default(font_asset):
        # Встроенный в Pillow >= 10.1 sans-serif шрифт, нужен FreeType
        if not features.check('freetype2'):
            raise UnresolvableFont("Pillow собран без FreeType, встроенный шрифт недоступен")
        font = ImageFont.load_default(size=size)
        if not isinstance(font, ImageFont.FreeTypeFont):
            raise UnresolvableFont("Встроенный шрифт Pillow не масштабируется, нужен Pillow >= 10.1")
        return font

    path = Path(font_asset)
    if not path.is_file():
        raise UnresolvableFont(f"Файл шрифта не найден: {path}")
    try:
        return ImageFont.truetype(str(path), size=size)
    except OSError as e:
        raise UnresolvableFont(f"Не удалось прочитать шрифт {path}: {e}") from e


def resolve_font(font_asset: FontAsset, size: int) -> ImageFont.FreeTypeFont:
    """Возвращает шрифт нужного размера (кэш на поток)"""
    cache: Dict[Tuple[str, int], ImageFont.FreeTypeFont] = getattr(_thread_fonts, 'cache', None)
    if cache is None:
        cache = _thread_fonts.cache = {}
    key = (str(font_asset) if not _is_default(font_asset) else DEFAULT_FONT, size)
    if key not in cache:
        cache[key] = _load_font(font_asset, size)
    return cache[key]


def font_digest(font_asset: FontAsset = DEFAULT_FONT) -> str:
    """SHA-256 байтов шрифта, пишется в заголовок манифеста"""
    if _is_default(font_asset):
        font = resolve_font(DEFAULT_FONT, max(FONT_SIZES))
        font_bytes = getattr(font, 'font_bytes', None)
        if not font_bytes:
            raise UnresolvableFont("Не удалось получить байты встроенного шрифта Pillow")
        return sha256_bytes(font_bytes)
    path = Path(font_asset)
    if not path.is_file():
        raise UnresolvableFont(f"Файл шрифта не найден: {path}")
    return sha256_file(path)


def rasterize_typo(text: str, font_size_px: int, font_asset: FontAsset = DEFAULT_FONT) -> GlyphBitmap:
    """
    Растеризует текст в одну строку с пиксельным кеглем font_size_px

    Returns:
        GlyphBitmap, обрезанный по bbox текста
    """
    if not text or not text.strip():
        raise EmptyText("Текст типографики не может быть пустым")
    if font_size_px not in FONT_SIZES:
        raise InvalidFactor(f"Размер шрифта {font_size_px}px вне набора {FONT_SIZES}")

    font = resolve_font(font_asset, font_size_px)
    left, top, right, bottom = font.getbbox(text)
    width, height = right - left, bottom - top
    if width <= 0 or height <= 0:
        raise EmptyText(f"Текст {text!r} не дает видимых глифов")

    mask = Image.new('L', (width, height), 0)
    ImageDraw.Draw(mask).text((-left, -top), text, font=font, fill=255)
    return GlyphBitmap(np.asarray(mask, dtype=np.uint8).copy())


def cell_region(image_w: int, image_h: int, cell: GridCell) -> Tuple[int, int, int, int]:
    """Полуоткрытый прямоугольник ячейки (x0, y0, x1, y1)"""
    x0 = (cell.col - 1) * image_w // GRID_COLS
    x1 = cell.col * image_w // GRID_COLS
    y0 = (cell.row - 1) * image_h // GRID_ROWS
    y1 = cell.row * image_h // GRID_ROWS
    return x0, y0, x1, y1


def anchor_in_cell(image_w: int, image_h: int, glyph_w: int, glyph_h: int, cell: GridCell) -> Tuple[int, int]:
    """
    Левый верхний угол глифа, центрированного в ячейке.
    Если глиф больше ячейки, позиция прижимается внутрь изображения.
    """
    if image_w < GRID_COLS or image_h < GRID_ROWS:
        raise InvalidFactor(f"Изображение {image_w}x{image_h} меньше сетки 4x4")
    if glyph_w > image_w or glyph_h > image_h:
        raise GlyphLargerThanImage(
            f"Глиф {glyph_w}x{glyph_h} не помещается в изображение {image_w}x{image_h}"
        )

    x0, y0, x1, y1 = cell_region(image_w, image_h, cell)
    x = x0 + ((x1 - x0) - glyph_w) // 2
    y = y0 + ((y1 - y0) - glyph_h) // 2
    x = max(0, min(x, image_w - glyph_w))
    y = max(0, min(y, image_h - glyph_h))
    return x, y


def blend(coverage, opacity, fg, bg) -> np.ndarray:
    """
    out = round(α·a·fg + (1 − α·a)·bg), половинки округляются вверх
    """
    weight = np.asarray(opacity, dtype=np.float64) * np.asarray(coverage, dtype=np.float64)
    mixed = weight * np.asarray(fg, dtype=np.float64) + (1.0 - weight) * np.asarray(bg, dtype=np.float64)
    return np.clip(np.floor(mixed + 0.5), 0, 255).astype(np.uint8)


def composite(base: RasterImage, glyph: GlyphBitmap, anchor: Tuple[int, int],
              color: str, opacity_percent: int) -> RasterImage:
    """Накладывает глиф цветом color с прозрачностью opacity_percent"""
    x, y = anchor
    if x < 0 or y < 0 or x + glyph.width > base.width or y + glyph.height > base.height:
        raise AnchorOutOfBounds(
            f"Глиф {glyph.width}x{glyph.height} в точке ({x}, {y}) выходит за "
            f"изображение {base.width}x{base.height}"
        )

    out = base.pixels.copy()
    region = out[y:y + glyph.height, x:x + glyph.width]
    out[y:y + glyph.height, x:x + glyph.width] = blend(
        glyph.coverage[..., None],
        opacity_percent / 100.0,
        np.array(color_rgb(color), dtype=np.float64),
        region,
    )
    return RasterImage(out)


def render_typo_image(base: RasterImage, typo_text: str, factors: FactorConfig,
                      font_asset: FontAsset = DEFAULT_FONT) -> RasterImage:
    """Полный цикл: растеризация, якорь в ячейке, наложение"""
    glyph = rasterize_typo(typo_text, factors.font_size_px, font_asset)
    anchor = anchor_in_cell(base.width, base.height, glyph.width, glyph.height, factors.cell)
    logger.debug("typo %r %dx%d at %s", typo_text, glyph.width, glyph.height, anchor)
    return composite(base, glyph, anchor, factors.color, factors.opacity_percent)


def load_raster(path: Union[str, Path]) -> RasterImage:
    """Читает изображение и приводит к RGB"""
    with Image.open(path) as image:
        return RasterImage.from_pil(image)


def encode_png(image: RasterImage) -> bytes:
    """Детерминированное PNG кодирование без метаданных"""
    buffer = io.BytesIO()
    image.to_pil().save(buffer, format='PNG', compress_level=PNG_COMPRESS_LEVEL)
    return buffer.getvalue()
