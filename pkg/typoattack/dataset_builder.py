"""
Модуль сборки манифестов: Factor Exploring (перебор одной оси) и
Factor Fixing (фиксированная конфигурация + чистые двойники WTypo)
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from typoattack.errors import CorpusFormatError, EmptyBaseSet, EmptyTypoPool
from typoattack.factors import Axis, FactorConfig, axis_values, sweep_configs
from typoattack.typo_render import DEFAULT_FONT, FontAsset, font_digest
from typoattack.utils import iter_jsonl, sha256_file, write_jsonl

logger = logging.getLogger(__name__)

MANIFEST_FORMAT = 1
FIXED_TAG = "FIXED"
WTYPO_TAG = "WTYPO"

# Цвета-кандидаты для задачи Attribute
ATTRIBUTE_COLORS: Tuple[str, ...] = (
    'red', 'orange', 'yellow', 'green', 'blue', 'purple',
    'pink', 'brown', 'black', 'white', 'gray',
)
ENUMERATION_RANGE = range(1, 21)
ARITHMETIC_SPREAD = 10

_NUMBER_WORDS = {
    'zero': 0, 'one': 1, 'two': 2, 'three': 3, 'four': 4, 'five': 5, 'six': 6,
    'seven': 7, 'eight': 8, 'nine': 9, 'ten': 10, 'eleven': 11, 'twelve': 12,
    'thirteen': 13, 'fourteen': 14, 'fifteen': 15, 'sixteen': 16,
    'seventeen': 17, 'eighteen': 18, 'nineteen': 19, 'twenty': 20,
}


class TaskKind(str, Enum):
    """Семейство задач"""
    OBJECT = 'Object'
    ATTRIBUTE = 'Attribute'
    ENUMERATION = 'Enumeration'
    REASONING = 'Reasoning'
    ARITHMETIC = 'Arithmetic'

    @property
    def short(self) -> str:
        """Короткая подпись для таблиц"""
        return {
            TaskKind.OBJECT: 'Obj',
            TaskKind.ATTRIBUTE: 'Vis',
            TaskKind.ENUMERATION: 'Enu',
            TaskKind.REASONING: 'Rea',
            TaskKind.ARITHMETIC: 'Ari',
        }[self]

    @classmethod
    def parse(cls, value: str) -> "TaskKind":
        key = str(value).strip().lower()
        for task in cls:
            if key in (task.value.lower(), task.short.lower()):
                return task
        raise ValueError(f"Неизвестная задача {value!r}")


class Stage(str, Enum):
    EXPLORING = 'Exploring'
    FIXING = 'Fixing'


@dataclass(frozen=True)
class BaseItem:
    """Один элемент базового корпуса"""
    id: str
    task: TaskKind
    image_path: str
    question: str
    choices: Tuple[Tuple[str, str], ...]
    ground_truth_letter: str
    typo_pool: Optional[Tuple[str, ...]] = None

    @property
    def ground_truth_text(self) -> str:
        return self.choice_text(self.ground_truth_letter)

    @property
    def letters(self) -> Tuple[str, ...]:
        return tuple(letter for letter, _ in self.choices)

    def choice_text(self, letter: str) -> str:
        for choice_letter, text in self.choices:
            if choice_letter == letter:
                return text
        raise KeyError(letter)

    def validate(self) -> None:
        """Проверяет инварианты элемента, бросает ValueError"""
        if not self.id:
            raise ValueError("пустой id")
        if not self.choices:
            raise ValueError("нет вариантов ответа")
        letters = self.letters
        if len(set(letters)) != len(letters):
            raise ValueError(f"буквы вариантов повторяются: {letters}")
        if self.ground_truth_letter not in letters:
            raise ValueError(f"правильный ответ {self.ground_truth_letter!r} не среди вариантов {letters}")
        texts = [text.casefold() for _, text in self.choices]
        if len(set(texts)) != len(texts):
            raise ValueError("тексты вариантов должны быть попарно различны")
        if self.typo_pool is not None and not self.typo_pool:
            raise ValueError("typo_pool задан, но пуст")

    def to_dict(self) -> Dict:
        data = {
            'id': self.id,
            'task': self.task.value,
            'image_path': self.image_path,
            'question': self.question,
            'choices': [{'letter': letter, 'text': text} for letter, text in self.choices],
            'ground_truth_letter': self.ground_truth_letter,
        }
        if self.typo_pool is not None:
            data['typo_pool'] = list(self.typo_pool)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "BaseItem":
        missing = [key for key in ('id', 'task', 'image_path', 'question', 'choices', 'ground_truth_letter')
                   if key not in data]
        if missing:
            raise ValueError(f"нет полей: {', '.join(missing)}")
        choices = []
        for choice in data['choices']:
            if not isinstance(choice, dict) or 'letter' not in choice or 'text' not in choice:
                raise ValueError("вариант должен быть объектом {letter, text}")
            choices.append((str(choice['letter']).strip().upper(), str(choice['text'])))
        pool = data.get('typo_pool')
        item = cls(
            id=str(data['id']),
            task=TaskKind.parse(data['task']),
            image_path=str(data['image_path']),
            question=str(data['question']),
            choices=tuple(choices),
            ground_truth_letter=str(data['ground_truth_letter']).strip().upper(),
            typo_pool=tuple(str(p) for p in pool) if pool is not None else None,
        )
        item.validate()
        return item


@dataclass(frozen=True)
class TypoInstance:
    """
    Один элемент манифеста. Чистый двойник (WTYPO) не имеет typo_text и factors.
    """
    instance_id: str
    base: BaseItem
    typo_text: Optional[str]
    factors: Optional[FactorConfig]
    seed: int
    variant_tag: str

    @property
    def on_typo(self) -> bool:
        return self.typo_text is not None

    def to_dict(self) -> Dict:
        return {
            'record': 'instance',
            'instance_id': self.instance_id,
            'variant_tag': self.variant_tag,
            'typo_text': self.typo_text,
            'factors': self.factors.to_dict() if self.factors else None,
            'seed': self.seed,
            'base': self.base.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "TypoInstance":
        factors = data.get('factors')
        return cls(
            instance_id=data['instance_id'],
            base=BaseItem.from_dict(data['base']),
            typo_text=data.get('typo_text'),
            factors=FactorConfig.from_dict(factors) if factors else None,
            seed=int(data['seed']),
            variant_tag=data['variant_tag'],
        )


@dataclass
class DatasetManifest:
    """Упорядоченный набор элементов одного этапа и масштаба"""
    stage: Stage
    scale_tag: str
    seed: int
    instances: List[TypoInstance]
    counts: Dict = field(default_factory=dict)
    font_hash: str = ""
    axis: Optional[Axis] = None
    wtypo: bool = False
    corpus_dir: str = "."

    @property
    def typo_instances(self) -> List[TypoInstance]:
        return [inst for inst in self.instances if inst.on_typo]

    @property
    def clean_instances(self) -> List[TypoInstance]:
        return [inst for inst in self.instances if not inst.on_typo]

    def header(self) -> Dict:
        return {
            'record': 'header',
            'format': MANIFEST_FORMAT,
            'stage': self.stage.value,
            'scale_tag': self.scale_tag,
            'seed': self.seed,
            'axis': self.axis.value if self.axis else None,
            'wtypo': self.wtypo,
            'font_hash': self.font_hash,
            'corpus_dir': self.corpus_dir,
            'counts': self.counts,
        }

    def resolve_base_image(self, item: BaseItem) -> Path:
        """Путь к исходному изображению относительно папки корпуса"""
        path = Path(item.image_path)
        return path if path.is_absolute() else Path(self.corpus_dir) / path


# Корпус и пулы типографики

def load_corpus(path) -> List[BaseItem]:
    """
    Читает базовый корпус JSONL, один BaseItem на строку
    """
    corpus_path = Path(path)
    if not corpus_path.exists():
        raise CorpusFormatError(f"Корпус не найден: {corpus_path}")

    items: List[BaseItem] = []
    seen = set()
    try:
        for line_num, row in iter_jsonl(corpus_path):
            try:
                item = BaseItem.from_dict(row)
            except (ValueError, TypeError, AttributeError) as e:
                raise CorpusFormatError(f"{corpus_path}:{line_num}: {e}") from e
            if item.id in seen:
                raise CorpusFormatError(f"{corpus_path}:{line_num}: повторяющийся id {item.id!r}")
            seen.add(item.id)
            items.append(item)
    except json.JSONDecodeError as e:
        raise CorpusFormatError(f"{corpus_path}: неверный JSON ({e})") from e

    logger.info("Загружено %d элементов корпуса из %s", len(items), corpus_path)
    return items


def load_vocabulary(path) -> List[str]:
    """Словарь классов Object: одно имя на строку"""
    names = []
    for line in Path(path).read_text(encoding='utf-8').splitlines():
        name = line.strip()
        if name and not name.startswith('#'):
            names.append(name)
    return names


def object_vocabulary(items: Iterable[BaseItem]) -> List[str]:
    """Имена классов Object из корпуса: правильные ответы и тексты вариантов"""
    names: Dict[str, str] = {}
    for item in items:
        if item.task is not TaskKind.OBJECT:
            continue
        for _, text in item.choices:
            names.setdefault(text.casefold(), text)
    return sorted(names.values(), key=str.casefold)


def _as_number(text: str) -> Optional[int]:
    value = text.strip().lower()
    if value in _NUMBER_WORDS:
        return _NUMBER_WORDS[value]
    try:
        number = float(value)
    except ValueError:
        return None
    return int(number) if number.is_integer() else None


def build_typo_pool(item: BaseItem, vocabulary: Sequence[str] = ()) -> Tuple[str, ...]:
    """
    Пул кандидатов по правилу задачи; явный typo_pool корпуса имеет приоритет.
    Правильный ответ исключается всегда.
    """
    answer = item.ground_truth_text
    if item.typo_pool is not None:
        candidates = list(item.typo_pool)
    elif item.task is TaskKind.OBJECT:
        candidates = list(vocabulary)
    elif item.task is TaskKind.ATTRIBUTE:
        candidates = list(ATTRIBUTE_COLORS)
    elif item.task is TaskKind.ENUMERATION:
        value = _as_number(answer)
        candidates = [str(n) for n in ENUMERATION_RANGE if n != value]
    elif item.task is TaskKind.REASONING:
        candidates = [text for letter, text in item.choices if letter != item.ground_truth_letter]
    else:
        value = _as_number(answer)
        if value is None:
            raise CorpusFormatError(f"{item.id}: ответ арифметической задачи не целое число ({answer!r})")
        candidates = [str(n) for n in range(value - ARITHMETIC_SPREAD, value + ARITHMETIC_SPREAD + 1)
                      if n != value]

    pool: Dict[str, str] = {}
    for candidate in candidates:
        key = candidate.strip().casefold()
        if key and key != answer.strip().casefold():
            pool.setdefault(key, candidate.strip())
    return tuple(pool.values())


def resolve_typo_pools(items: Sequence[BaseItem], vocabulary: Optional[Sequence[str]] = None) -> List[BaseItem]:
    """Заполняет typo_pool у каждого элемента по правилам задач"""
    vocab = list(vocabulary) if vocabulary is not None else object_vocabulary(items)
    return [replace(item, typo_pool=build_typo_pool(item, vocab)) for item in items]


def instance_seed(manifest_seed: int, item_id: str) -> int:
    """Независимый 64-битный сид потока элемента"""
    digest = hashlib.sha256(f"{manifest_seed}:{item_id}".encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'big')


def select_typo(item: BaseItem, rng: np.random.Generator) -> str:
    """Равномерный выбор из пула без правильного ответа"""
    answer = item.ground_truth_text.strip().casefold()
    pool = [p for p in (item.typo_pool or ()) if p.strip().casefold() != answer]
    if not pool:
        raise EmptyTypoPool(f"{item.id}: нет кандидатов для типографики кроме правильного ответа")
    return pool[int(rng.integers(len(pool)))]


# Сборка манифестов

def _prepare(base: Sequence[BaseItem], vocabulary: Optional[Sequence[str]]) -> List[BaseItem]:
    if not base:
        raise EmptyBaseSet("Базовый набор пуст")
    ids = [item.id for item in base]
    if len(set(ids)) != len(ids):
        raise CorpusFormatError("id элементов корпуса должны быть уникальны")
    return resolve_typo_pools(base, vocabulary)


def _clean_twin(item: BaseItem, seed: int) -> TypoInstance:
    return TypoInstance(
        instance_id=f"{item.id}__{WTYPO_TAG}",
        base=item,
        typo_text=None,
        factors=None,
        seed=seed,
        variant_tag=WTYPO_TAG,
    )


def build_exploring_manifest(base: Sequence[BaseItem], axis: Axis, seed: int,
                             scale_tag: str = "B", include_wtypo: bool = False,
                             font_asset: FontAsset = DEFAULT_FONT,
                             vocabulary: Optional[Sequence[str]] = None,
                             corpus_dir: str = ".") -> DatasetManifest:
    """
    Этап Factor Exploring: по одному элементу на каждое значение оси.
    Типографика выбирается один раз на элемент и общая для всех значений.
    """
    items = _prepare(base, vocabulary)
    configs = sweep_configs(axis)

    instances: List[TypoInstance] = []
    for item in items:
        item_seed = instance_seed(seed, item.id)
        typo = select_typo(item, np.random.default_rng(item_seed))
        if include_wtypo:
            instances.append(_clean_twin(item, item_seed))
        for tag, factors in configs:
            instances.append(TypoInstance(
                instance_id=f"{item.id}__{tag}",
                base=item,
                typo_text=typo,
                factors=factors,
                seed=item_seed,
                variant_tag=tag,
            ))

    manifest = DatasetManifest(
        stage=Stage.EXPLORING,
        scale_tag=scale_tag,
        seed=seed,
        instances=instances,
        font_hash=font_digest(font_asset),
        axis=axis,
        wtypo=include_wtypo,
        corpus_dir=corpus_dir,
    )
    manifest.counts = tally(manifest.instances)
    logger.info("Exploring %s: %d элементов из %d базовых", axis.value, len(instances), len(items))
    return manifest


def build_fixed_manifest(base: Sequence[BaseItem], seed: int, scale_tag: str = "B",
                         font_asset: FontAsset = DEFAULT_FONT,
                         vocabulary: Optional[Sequence[str]] = None,
                         corpus_dir: str = ".") -> DatasetManifest:
    """
    Этап Factor Fixing: {15px, 100%, R2C2, white} на каждый элемент,
    сразу за ним чистый двойник WTYPO
    """
    items = _prepare(base, vocabulary)
    factors = FactorConfig.fixed()

    instances: List[TypoInstance] = []
    for item in items:
        item_seed = instance_seed(seed, item.id)
        typo = select_typo(item, np.random.default_rng(item_seed))
        instances.append(TypoInstance(
            instance_id=f"{item.id}__{FIXED_TAG}",
            base=item,
            typo_text=typo,
            factors=factors,
            seed=item_seed,
            variant_tag=FIXED_TAG,
        ))
        instances.append(_clean_twin(item, item_seed))

    manifest = DatasetManifest(
        stage=Stage.FIXING,
        scale_tag=scale_tag,
        seed=seed,
        instances=instances,
        font_hash=font_digest(font_asset),
        wtypo=True,
        corpus_dir=corpus_dir,
    )
    manifest.counts = tally(manifest.instances)
    logger.info("Fixing %s: %d типографических + %d чистых", scale_tag,
                len(manifest.typo_instances), len(manifest.clean_instances))
    return manifest


# Подсчеты

def tally(instances: Iterable[TypoInstance]) -> Dict:
    """Счетчики по задачам (base/typo/clean) и по вариантам"""
    base_ids: Dict[str, set] = {}
    typo: Dict[str, int] = {}
    clean: Dict[str, int] = {}
    variants: Dict[str, int] = {}
    for inst in instances:
        task = inst.base.task.value
        base_ids.setdefault(task, set()).add(inst.base.id)
        typo.setdefault(task, 0)
        clean.setdefault(task, 0)
        if inst.on_typo:
            typo[task] += 1
        else:
            clean[task] += 1
        variants[inst.variant_tag] = variants.get(inst.variant_tag, 0) + 1

    order = [task.value for task in TaskKind if task.value in base_ids]
    return {
        'base': {task: len(base_ids[task]) for task in order},
        'typo': {task: typo[task] for task in order},
        'clean': {task: clean[task] for task in order},
        'variants': variants,
    }


def expected_typo_count(base_size: int, stage: Stage, axis: Optional[Axis]) -> int:
    """Замкнутая форма: base x |значений оси| или base для Fixing"""
    if stage is Stage.FIXING:
        return base_size
    return base_size * len(axis_values(axis))


@dataclass
class CountRow:
    task: str
    kind: str
    expected: int
    recomputed: int
    declared: int

    @property
    def ok(self) -> bool:
        return self.expected == self.recomputed == self.declared


@dataclass
class CountReport:
    """Результат сверки счетчиков манифеста"""
    rows: List[CountRow] = field(default_factory=list)
    problems: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems and all(row.ok for row in self.rows)

    @property
    def total_typo(self) -> int:
        return sum(row.recomputed for row in self.rows if row.kind == 'typo')

    @property
    def total_clean(self) -> int:
        return sum(row.recomputed for row in self.rows if row.kind == 'clean')

    def to_dict(self) -> Dict:
        return {
            'ok': self.ok,
            'rows': [
                {'task': r.task, 'kind': r.kind, 'expected': r.expected,
                 'recomputed': r.recomputed, 'declared': r.declared, 'ok': r.ok}
                for r in self.rows
            ],
            'problems': list(self.problems),
        }


def verify_counts(manifest: DatasetManifest) -> CountReport:
    """
    Пересчитывает счетчики и сверяет с полем counts и с замкнутой формой.
    Несовпадения попадают в отчет, исключений нет.
    """
    report = CountReport()
    recomputed = tally(manifest.instances)
    declared = manifest.counts or {}
    declared_base = declared.get('base', {})

    tasks = [task.value for task in TaskKind
             if task.value in recomputed['base'] or task.value in declared_base]
    clean_expected = manifest.stage is Stage.FIXING or manifest.wtypo

    for task in tasks:
        base_size = declared_base.get(task, recomputed['base'].get(task, 0))
        report.rows.append(CountRow(
            task=task,
            kind='typo',
            expected=expected_typo_count(base_size, manifest.stage, manifest.axis),
            recomputed=recomputed['typo'].get(task, 0),
            declared=declared.get('typo', {}).get(task, 0),
        ))
        report.rows.append(CountRow(
            task=task,
            kind='clean',
            expected=base_size if clean_expected else 0,
            recomputed=recomputed['clean'].get(task, 0),
            declared=declared.get('clean', {}).get(task, 0),
        ))

    if recomputed['variants'] != declared.get('variants', {}):
        report.problems.append("Счетчики по вариантам не совпадают с заголовком")

    seen_ids = set()
    for inst in manifest.instances:
        if inst.instance_id in seen_ids:
            report.problems.append(f"Повторяющийся instance_id {inst.instance_id}")
        seen_ids.add(inst.instance_id)
        if inst.on_typo and inst.typo_text.strip().casefold() == inst.base.ground_truth_text.strip().casefold():
            report.problems.append(f"{inst.instance_id}: типографика совпадает с правильным ответом")

    if manifest.stage is Stage.FIXING:
        twins: Dict[str, int] = {}
        for inst in manifest.clean_instances:
            twins[inst.base.id] = twins.get(inst.base.id, 0) + 1
        for inst in manifest.typo_instances:
            if twins.get(inst.base.id, 0) != 1:
                report.problems.append(f"{inst.instance_id}: нет ровно одного чистого двойника")

    return report


# Сериализация

def write_manifest(manifest: DatasetManifest, path) -> Path:
    """Пишет манифест JSONL: заголовок, затем элементы"""
    out_path = Path(path)
    write_jsonl(out_path, [manifest.header()] + [inst.to_dict() for inst in manifest.instances])
    return out_path


def read_manifest(path) -> DatasetManifest:
    """Читает манифест JSONL"""
    manifest_path = Path(path)
    if not manifest_path.exists():
        raise CorpusFormatError(f"Манифест не найден: {manifest_path}")

    header = None
    instances: List[TypoInstance] = []
    for line_num, row in iter_jsonl(manifest_path):
        kind = row.get('record')
        try:
            if kind == 'header':
                header = row
            elif kind == 'instance':
                instances.append(TypoInstance.from_dict(row))
            else:
                raise ValueError(f"неизвестный тип записи {kind!r}")
        except (ValueError, KeyError, TypeError) as e:
            raise CorpusFormatError(f"{manifest_path}:{line_num}: {e}") from e

    if header is None:
        raise CorpusFormatError(f"{manifest_path}: нет заголовка манифеста")
    if header.get('format') != MANIFEST_FORMAT:
        raise CorpusFormatError(f"{manifest_path}: неподдерживаемая версия формата {header.get('format')}")

    return DatasetManifest(
        stage=Stage(header['stage']),
        scale_tag=header['scale_tag'],
        seed=int(header['seed']),
        instances=instances,
        counts=header.get('counts', {}),
        font_hash=header.get('font_hash', ''),
        axis=Axis(header['axis']) if header.get('axis') else None,
        wtypo=bool(header.get('wtypo', False)),
        corpus_dir=header.get('corpus_dir', '.'),
    )


def manifest_digest(path) -> str:
    """SHA-256 файла манифеста"""
    return sha256_file(path)
