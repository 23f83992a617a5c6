"""
Модуль синтетического корпуса для офлайн прогонов и тестов.

Рисует простые сцены Pillow для всех пяти задач и пишет corpus.jsonl
рядом с папкой images/.
"""
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from PIL import Image, ImageDraw

from typoattack.dataset_builder import BaseItem, TaskKind
from typoattack.typo_render import DEFAULT_FONT, FontAsset, RasterImage, encode_png, resolve_font
from typoattack.utils import atomic_write_bytes, ensure_dir, write_jsonl

logger = logging.getLogger(__name__)

CANVAS_SIZE = 224
BACKGROUND = (235, 235, 235)
LETTERS = ('A', 'B', 'C', 'D')
ARITHMETIC_OPS = ('+', '-', 'x', '/')

SHAPES: Tuple[str, ...] = ('circle', 'square', 'triangle', 'diamond', 'cross')

FILL_COLORS: Dict[str, Tuple[int, int, int]] = {
    'red': (220, 30, 30),
    'orange': (245, 140, 20),
    'yellow': (240, 220, 30),
    'green': (40, 150, 50),
    'blue': (30, 70, 220),
    'purple': (130, 40, 160),
    'pink': (245, 150, 190),
    'brown': (120, 70, 30),
    'black': (10, 10, 10),
    'white': (255, 255, 255),
    'gray': (128, 128, 128),
}

# Базовые размеры этапов из таблицы счетчиков
TABLE1_BASE_SIZES: Dict[str, int] = {
    TaskKind.OBJECT.value: 500,
    TaskKind.ATTRIBUTE.value: 190,
    TaskKind.ENUMERATION.value: 380,
    TaskKind.REASONING.value: 500,
}

# Arithmetic есть только в переборе факторов
FIXING_TASKS: Tuple[TaskKind, ...] = (
    TaskKind.OBJECT, TaskKind.ATTRIBUTE, TaskKind.ENUMERATION, TaskKind.REASONING,
)

LARGE_BASE_SIZES: Dict[str, int] = {task.value: 5000 for task in FIXING_TASKS}

SCALE_SIZES: Dict[str, Dict[str, int]] = {
    'B': TABLE1_BASE_SIZES,
    'L': LARGE_BASE_SIZES,
}


def draw_shape(draw: ImageDraw.ImageDraw, kind: str, box: Tuple[int, int, int, int],
               fill: Tuple[int, int, int]) -> None:
    """Рисует фигуру в прямоугольнике (x0, y0, x1, y1)"""
    x0, y0, x1, y1 = box
    cx, cy = (x0 + x1) // 2, (y0 + y1) // 2
    outline = (40, 40, 40)
    if kind == 'circle':
        draw.ellipse(box, fill=fill, outline=outline, width=2)
    elif kind == 'square':
        draw.rectangle(box, fill=fill, outline=outline, width=2)
    elif kind == 'triangle':
        draw.polygon([(cx, y0), (x1, y1), (x0, y1)], fill=fill, outline=outline)
    elif kind == 'diamond':
        draw.polygon([(cx, y0), (x1, cy), (cx, y1), (x0, cy)], fill=fill, outline=outline)
    elif kind == 'cross':
        bar_w = max(2, (x1 - x0) // 3)
        draw.rectangle((cx - bar_w // 2, y0, cx + bar_w // 2, y1), fill=fill)
        draw.rectangle((x0, cy - bar_w // 2, x1, cy + bar_w // 2), fill=fill)
    else:
        raise ValueError(f"Неизвестная фигура {kind!r}")


def _canvas() -> Tuple[Image.Image, ImageDraw.ImageDraw]:
    image = Image.new('RGB', (CANVAS_SIZE, CANVAS_SIZE), BACKGROUND)
    return image, ImageDraw.Draw(image)


def _lettered(texts: Sequence[str], answer: str, rng: np.random.Generator) -> Tuple[Tuple[Tuple[str, str], ...], str]:
    order = [texts[i] for i in rng.permutation(len(texts))]
    choices = tuple(zip(LETTERS, order))
    letter = next(letter for letter, text in choices if text == answer)
    return choices, letter


def _pick(options: Sequence[str], k: int, exclude: str, rng: np.random.Generator) -> List[str]:
    pool = [o for o in options if o != exclude]
    return [pool[i] for i in rng.choice(len(pool), size=k, replace=False)]


def _object_item(index: int, rng: np.random.Generator) -> Tuple[Image.Image, Dict]:
    shape = SHAPES[int(rng.integers(len(SHAPES)))]
    image, draw = _canvas()
    margin = int(rng.integers(30, 60))
    draw_shape(draw, shape, (margin, margin, CANVAS_SIZE - margin, CANVAS_SIZE - margin), FILL_COLORS['blue'])
    choices, letter = _lettered([shape] + _pick(SHAPES, 3, shape, rng), shape, rng)
    return image, {'question': "What is the main object in the image?", 'choices': choices, 'answer': letter}


def _attribute_item(index: int, rng: np.random.Generator) -> Tuple[Image.Image, Dict]:
    names = list(FILL_COLORS)
    color = names[int(rng.integers(len(names)))]
    shape = SHAPES[int(rng.integers(len(SHAPES)))]
    image, draw = _canvas()
    draw_shape(draw, shape, (50, 50, 174, 174), FILL_COLORS[color])
    choices, letter = _lettered([color] + _pick(names, 2, color, rng), color, rng)
    return image, {'question': f"What is the color of the {shape} in the image?", 'choices': choices, 'answer': letter}


def _enumeration_item(index: int, rng: np.random.Generator) -> Tuple[Image.Image, Dict]:
    count = int(rng.integers(1, 10))
    image, draw = _canvas()
    # сетка 3x3 слотов, фигуры в случайных слотах
    slots = rng.choice(9, size=count, replace=False)
    step = CANVAS_SIZE // 3
    for slot in sorted(int(s) for s in slots):
        row, col = divmod(slot, 3)
        x0, y0 = col * step + 14, row * step + 14
        draw_shape(draw, 'circle', (x0, y0, x0 + step - 28, y0 + step - 28), FILL_COLORS['red'])
    numbers = [str(n) for n in range(1, 21)]
    choices, letter = _lettered([str(count)] + _pick(numbers, 2, str(count), rng), str(count), rng)
    return image, {'question': "How many circles are in the image?", 'choices': choices, 'answer': letter}


def _reasoning_item(index: int, rng: np.random.Generator) -> Tuple[Image.Image, Dict]:
    shapes = [SHAPES[i] for i in rng.choice(len(SHAPES), size=4, replace=False)]
    big = shapes[0]
    image, draw = _canvas()
    draw_shape(draw, big, (20, 20, 130, 130), FILL_COLORS['green'])
    small_boxes = [(150, 20, 200, 70), (150, 150, 200, 200), (20, 150, 70, 200)]
    for shape, box in zip(shapes[1:], small_boxes):
        draw_shape(draw, shape, box, FILL_COLORS['orange'])
    choices, letter = _lettered(shapes, big, rng)
    return image, {
        'question': "Which shape in the image is much larger than the others?",
        'choices': choices,
        'answer': letter,
    }


def arithmetic_problem(rng: np.random.Generator) -> Tuple[str, int]:
    """Выражение "a op b" и его целый результат"""
    a, b = int(rng.integers(1, 20)), int(rng.integers(1, 20))
    op = ARITHMETIC_OPS[int(rng.integers(len(ARITHMETIC_OPS)))]
    if op == '/':
        # делимое кратно делителю, ответ всегда целый
        a, result = a * b, a
    else:
        result = a + b if op == '+' else a - b if op == '-' else a * b
    return f"{a} {op} {b}", result


def _arithmetic_item(index: int, rng: np.random.Generator, font_asset: FontAsset) -> Tuple[Image.Image, Dict]:
    text, result = arithmetic_problem(rng)
    image, draw = _canvas()
    font = resolve_font(font_asset, 40)
    left, top, right, bottom = font.getbbox(text)
    x = (CANVAS_SIZE - (right - left)) // 2 - left
    y = (CANVAS_SIZE - (bottom - top)) // 2 - top
    draw.text((x, y), text, font=font, fill=(20, 20, 20))
    near = [str(n) for n in range(result - 10, result + 11)]
    choices, letter = _lettered([str(result)] + _pick(near, 3, str(result), rng), str(result), rng)
    return image, {
        'question': "What is the result of the arithmetic expression in the image?",
        'choices': choices,
        'answer': letter,
    }


def build_fixture_items(out_dir: Union[str, Path], seed: int, per_task: int = 4,
                        font_asset: FontAsset = DEFAULT_FONT) -> List[BaseItem]:
    """
    Рисует per_task сцен на задачу и сохраняет PNG в out_dir/images

    Returns:
        Список BaseItem с путями относительно out_dir
    """
    if per_task < 1:
        raise ValueError("per_task должен быть не меньше 1")
    images_dir = ensure_dir(Path(out_dir) / "images")
    rng = np.random.default_rng(seed)

    makers = [
        (TaskKind.OBJECT, 'obj', _object_item),
        (TaskKind.ATTRIBUTE, 'vis', _attribute_item),
        (TaskKind.ENUMERATION, 'enu', _enumeration_item),
        (TaskKind.REASONING, 'rea', _reasoning_item),
        (TaskKind.ARITHMETIC, 'ari', lambda i, r: _arithmetic_item(i, r, font_asset)),
    ]
    items: List[BaseItem] = []
    for task, prefix, make in makers:
        for index in range(per_task):
            image, scene = make(index, rng)
            item_id = f"{prefix}-{index:04d}"
            rel_path = f"images/{item_id}.png"
            atomic_write_bytes(images_dir / f"{item_id}.png", encode_png(RasterImage.from_pil(image)))
            item = BaseItem(
                id=item_id,
                task=task,
                image_path=rel_path,
                question=scene['question'],
                choices=scene['choices'],
                ground_truth_letter=scene['answer'],
            )
            item.validate()
            items.append(item)
    return items


def build_fixture_corpus(out_dir: Union[str, Path], seed: int, per_task: int = 4,
                         font_asset: FontAsset = DEFAULT_FONT) -> Path:
    """Пишет синтетический корпус: out_dir/images/*.png и out_dir/corpus.jsonl"""
    items = build_fixture_items(out_dir, seed, per_task, font_asset)
    corpus_path = Path(out_dir) / "corpus.jsonl"
    write_jsonl(corpus_path, (item.to_dict() for item in items))
    logger.info("Синтетический корпус: %d элементов в %s", len(items), corpus_path)
    return corpus_path


def scale_corpus(items: Sequence[BaseItem], per_task: Union[int, Dict[str, int]] = None) -> List[BaseItem]:
    """
    Растягивает корпус до нужных размеров по задачам, циклически повторяя
    элементы с новыми id. По умолчанию размеры из таблицы счетчиков.
    Число вместо словаря задает один размер для FIXING_TASKS, Arithmetic
    попадает в результат только из явного словаря.
    """
    sizes = per_task if per_task is not None else TABLE1_BASE_SIZES
    if isinstance(sizes, int):
        sizes = {task.value: sizes for task in FIXING_TASKS}
    by_task: Dict[str, List[BaseItem]] = {}
    for item in items:
        by_task.setdefault(item.task.value, []).append(item)

    scaled: List[BaseItem] = []
    for task in TaskKind:
        size = sizes.get(task.value, 0)
        source = by_task.get(task.value, [])
        if not size:
            continue
        if not source:
            raise ValueError(f"В корпусе нет элементов задачи {task.value} для масштабирования")
        for index in range(size):
            original = source[index % len(source)]
            scaled.append(BaseItem(
                id=f"{original.id}-s{index:05d}",
                task=original.task,
                image_path=original.image_path,
                question=original.question,
                choices=original.choices,
                ground_truth_letter=original.ground_truth_letter,
                typo_pool=original.typo_pool,
            ))
    return scaled
