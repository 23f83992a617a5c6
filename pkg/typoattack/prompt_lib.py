"""
Модуль библиотеки промптов: дословные тексты инструкций и наборы текстовых
опций для CLIP, рендеринг против вопроса и вариантов ответа
"""
import logging
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import yaml

from typoattack.errors import LabelTypoCollision, NoChoices, UnknownTemplate
from typoattack.utils import get_project_root

logger = logging.getLogger(__name__)

PROMPTS_VERSION = "v1"
CATALOG_FILE = "catalog.yaml"

_PLACEHOLDER = re.compile(r'\{(QUESTION|CHOICES)\}')
_OPTION_PLACEHOLDER = re.compile(r'\{(label|typo)\}')

Choices = Sequence[Tuple[str, str]]


@dataclass(frozen=True)
class PromptTemplate:
    """Шаблон промпта: один или несколько ходов диалога"""
    id: str
    turns: Tuple[str, ...]
    multi_step: bool
    single_turn_body: Optional[str] = None

    @property
    def body(self) -> str:
        return "\n---TURN---\n".join(self.turns)


@dataclass(frozen=True)
class TextOptionSet:
    set_id: str
    templates: Tuple[str, ...]


@dataclass(frozen=True)
class PromptCatalog:
    """Содержимое prompts/<version>: шаблоны в порядке каталога и наборы опций"""
    version: str
    suffix: str
    templates: Dict[str, PromptTemplate]
    option_sets: Dict[str, TextOptionSet]

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self.templates[template_id]
        except KeyError:
            raise UnknownTemplate(
                f"Неизвестный шаблон {template_id!r}. Доступны: {', '.join(self.templates)}"
            ) from None


def _split_turns(text: str, separator: str) -> Tuple[str, ...]:
    turns = []
    current: List[str] = []
    for line in text.splitlines():
        if line.strip() == separator:
            turns.append("\n".join(current).strip('\n'))
            current = []
        else:
            current.append(line)
    turns.append("\n".join(current).strip('\n'))
    return tuple(turns)


def load_catalog(prompts_dir: Union[str, Path, None] = None) -> PromptCatalog:
    """
    Читает catalog.yaml и тела шаблонов

    Args:
        prompts_dir: папка версии промптов, по умолчанию prompts/v1 проекта
    """
    base = Path(prompts_dir) if prompts_dir else get_project_root() / "prompts" / PROMPTS_VERSION
    catalog_path = base / CATALOG_FILE
    if not catalog_path.exists():
        raise FileNotFoundError(f"Каталог промптов не найден: {catalog_path}")

    with open(catalog_path, 'r', encoding='utf-8') as f:
        data = yaml.safe_load(f) or {}

    separator = data.get('turn_separator', '---TURN---')
    templates: Dict[str, PromptTemplate] = {}
    for entry in data.get('templates', []):
        text = (base / entry['file']).read_text(encoding='utf-8')
        single = entry.get('single_turn_file')
        templates[entry['id']] = PromptTemplate(
            id=entry['id'],
            turns=_split_turns(text, separator),
            multi_step=bool(entry.get('multi_step', False)),
            single_turn_body=(base / single).read_text(encoding='utf-8').strip('\n') if single else None,
        )

    option_sets = {
        set_id: TextOptionSet(set_id, tuple(items))
        for set_id, items in (data.get('option_sets') or {}).items()
    }
    logger.debug("Каталог промптов %s: %d шаблонов", base, len(templates))
    return PromptCatalog(
        version=str(data.get('version', PROMPTS_VERSION)),
        suffix=data['suffix'],
        templates=templates,
        option_sets=option_sets,
    )


@lru_cache(maxsize=1)
def default_catalog() -> PromptCatalog:
    return load_catalog()


def list_templates(catalog: Optional[PromptCatalog] = None) -> List[str]:
    """Идентификаторы шаблонов в порядке каталога"""
    return list((catalog or default_catalog()).templates)


def format_choices(choices: Choices) -> str:
    """Варианты ответа строками 'A. text'"""
    return "\n".join(f"{letter}. {text}" for letter, text in choices)


def _fill(text: str, question: str, choices_block: str) -> str:
    values = {'QUESTION': question, 'CHOICES': choices_block}
    return _PLACEHOLDER.sub(lambda m: values[m.group(1)], text)


def render_turns(template_id: str, question: str, choices: Choices, single_turn: bool = False,
                 catalog: Optional[PromptCatalog] = None) -> List[str]:
    """
    Ходы диалога для шаблона. Суффикс с инструкцией ответа буквой
    добавляется ровно один раз, в конце последнего хода.
    """
    catalog = catalog or default_catalog()
    template = catalog.get(template_id)
    if not choices:
        raise NoChoices("Список вариантов ответа пуст")

    if single_turn and template.single_turn_body is not None:
        bodies = [template.single_turn_body]
    else:
        if single_turn:
            logger.debug("У шаблона %s нет однопроходной формы, оставляем ходы", template_id)
        bodies = list(template.turns)

    choices_block = format_choices(choices)
    turns = [_fill(body, question, choices_block) for body in bodies]
    turns[-1] = f"{turns[-1]}\n{catalog.suffix}"
    return turns


def render_prompt(template_id: str, question: str, choices: Choices, single_turn: bool = False,
                  catalog: Optional[PromptCatalog] = None) -> Union[str, List[str]]:
    """
    Рендерит шаблон. Для многошаговых шаблонов возвращает список ходов,
    для остальных одну строку.
    """
    turns = render_turns(template_id, question, choices, single_turn, catalog)
    return turns if len(turns) > 1 else turns[0]


def render_option_set(set_id: str, label: str, typo: str,
                      catalog: Optional[PromptCatalog] = None) -> List[str]:
    """Текстовые опции Set1/Set2 с подставленными label и typo"""
    catalog = catalog or default_catalog()
    option_set = catalog.option_sets.get(set_id)
    if option_set is None:
        raise UnknownTemplate(
            f"Неизвестный набор опций {set_id!r}. Доступны: {', '.join(catalog.option_sets)}"
        )
    if label.strip().casefold() == typo.strip().casefold():
        raise LabelTypoCollision(f"Метка и типографика совпадают: {label!r}")

    values = {'label': label, 'typo': typo}
    return [_OPTION_PLACEHOLDER.sub(lambda m: values[m.group(1)], t) for t in option_set.templates]
