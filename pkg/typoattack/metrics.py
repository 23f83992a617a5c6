"""
Модуль метрик: ACC / ACC- / GAP по задачам, моделям и промптам,
таблицы перебора факторов, точность текстовых опций CLIP (Set1/Set2)
и рендеринг отчетов в markdown и CSV
"""
import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import pandas as pd

from typoattack.dataset_builder import WTYPO_TAG, TaskKind
from typoattack.errors import AxisMismatch, CorpusFormatError, UsageError
from typoattack.eval_harness import EvalRecord
from typoattack.factors import Axis, axis_values, setting_label, variant_tag
from typoattack.prompt_lib import PromptCatalog, TextOptionSet, default_catalog, list_templates
from typoattack.utils import iter_jsonl

logger = logging.getLogger(__name__)

EMPTY_CELL = "—"
OVERALL = "Overall"
OVERALL_POOLED = "Overall (pooled)"


@dataclass(frozen=True)
class MetricsRow:
    """Строка (задача, модель, промпт); проценты хранятся без округления"""
    task: str
    model: str
    prompt: str
    n_clean: int
    n_typo: int
    correct_clean: int
    correct_typo: int

    @property
    def acc_clean(self) -> float:
        return 100.0 * self.correct_clean / self.n_clean

    @property
    def acc_typo(self) -> float:
        return 100.0 * self.correct_typo / self.n_typo

    @property
    def gap(self) -> float:
        return self.acc_clean - self.acc_typo


@dataclass(frozen=True)
class OverallRow:
    """Итог по (модели, промпту): невзвешенное среднее задач и пул по счетчикам"""
    model: str
    prompt: str
    acc_clean: float
    acc_typo: float
    pooled_acc_clean: float
    pooled_acc_typo: float
    n_tasks: int

    @property
    def gap(self) -> float:
        return self.acc_clean - self.acc_typo

    @property
    def pooled_gap(self) -> float:
        return self.pooled_acc_clean - self.pooled_acc_typo


@dataclass(frozen=True)
class NoRecordsForTask:
    task: str
    model: str
    prompt: str
    side: str

    def __str__(self) -> str:
        return f"{self.task} / {self.model} / {self.prompt}: нет записей ({self.side})"


@dataclass
class MetricsReport:
    rows: List[MetricsRow] = field(default_factory=list)
    overall: List[OverallRow] = field(default_factory=list)
    missing: List[NoRecordsForTask] = field(default_factory=list)

    @property
    def models(self) -> List[str]:
        return sorted({row.model for row in self.rows})

    @property
    def prompts(self) -> List[str]:
        return _sorted_prompts({row.prompt for row in self.rows})

    @property
    def tasks(self) -> List[str]:
        present = {row.task for row in self.rows}
        return [task.value for task in TaskKind if task.value in present]

    def row(self, task: str, model: str, prompt: str) -> Optional[MetricsRow]:
        for row in self.rows:
            if (row.task, row.model, row.prompt) == (task, model, prompt):
                return row
        return None

    def overall_row(self, model: str, prompt: str) -> Optional[OverallRow]:
        for row in self.overall:
            if (row.model, row.prompt) == (model, prompt):
                return row
        return None


def _sorted_prompts(prompts: Iterable[str]) -> List[str]:
    known = list_templates()
    return sorted(prompts, key=lambda p: (known.index(p) if p in known else len(known), p))


def _task_order(task: str) -> int:
    values = [t.value for t in TaskKind]
    return values.index(task) if task in values else len(values)


def _records_frame(records: Sequence[EvalRecord]) -> pd.DataFrame:
    frame = pd.DataFrame(
        [(r.task, r.model_name, r.prompt_id, r.variant_tag, bool(r.on_typo), bool(r.correct)) for r in records],
        columns=['task', 'model', 'prompt', 'variant_tag', 'on_typo', 'correct'],
    )
    return frame


def compute_metrics(records: Sequence[EvalRecord], tasks: Optional[Sequence[str]] = None) -> MetricsReport:
    """
    Считает ACC, ACC- и GAP по (задаче, модели, промпту).
    Строка без чистых или типографических записей попадает в missing.
    """
    report = MetricsReport()
    if not records:
        return report

    frame = _records_frame(records)
    tallies = (
        frame.groupby(['task', 'model', 'prompt', 'on_typo'])['correct']
        .agg(['size', 'sum'])
    )
    counts: Dict[Tuple[str, str, str, bool], Tuple[int, int]] = {
        (str(task), str(model), str(prompt), bool(on_typo)): (int(size), int(correct))
        for (task, model, prompt, on_typo), (size, correct) in tallies.iterrows()
    }

    wanted = list(tasks) if tasks is not None else sorted(set(frame['task']), key=_task_order)
    wanted = sorted(wanted, key=_task_order)
    prompt_order = _sorted_prompts(set(frame['prompt']))
    pairs = sorted(
        {(model, prompt) for model, prompt in zip(frame['model'], frame['prompt'])},
        key=lambda mp: (mp[0], prompt_order.index(mp[1])),
    )

    for model, prompt in pairs:
        task_rows = []
        for task in wanted:
            n_clean, k_clean = counts.get((task, model, prompt, False), (0, 0))
            n_typo, k_typo = counts.get((task, model, prompt, True), (0, 0))
            if n_clean == 0 or n_typo == 0:
                side = 'both' if n_clean == n_typo == 0 else ('clean' if n_clean == 0 else 'typo')
                report.missing.append(NoRecordsForTask(task, model, prompt, side))
                continue
            task_rows.append(MetricsRow(task, model, prompt, n_clean, n_typo, k_clean, k_typo))

        report.rows.extend(task_rows)
        if task_rows:
            report.overall.append(OverallRow(
                model=model,
                prompt=prompt,
                acc_clean=sum(r.acc_clean for r in task_rows) / len(task_rows),
                acc_typo=sum(r.acc_typo for r in task_rows) / len(task_rows),
                pooled_acc_clean=100.0 * sum(r.correct_clean for r in task_rows) / sum(r.n_clean for r in task_rows),
                pooled_acc_typo=100.0 * sum(r.correct_typo for r in task_rows) / sum(r.n_typo for r in task_rows),
                n_tasks=len(task_rows),
            ))

    for entry in report.missing:
        logger.warning("%s", entry)
    return report


# Таблицы факторов

@dataclass
class FactorTable:
    """Точность по (значению фактора, задаче, модели)"""
    axis: Axis
    settings: List[str]
    tasks: List[str]
    models: List[str]
    cells: Dict[Tuple[str, str, str], Tuple[int, int]] = field(default_factory=dict)

    def accuracy(self, setting: str, task: str, model: str) -> Optional[float]:
        correct, total = self.cells.get((setting, task, model), (0, 0))
        if total == 0:
            return None
        return 100.0 * correct / total


def _model_label(model: str, prompt: str, multi_prompt: bool) -> str:
    return f"{model} [{prompt}]" if multi_prompt else model


def compute_factor_table(records: Sequence[EvalRecord], axis: Axis) -> FactorTable:
    """
    Точность по значениям оси. Чистые WTYPO записи пропускаются,
    записи другой оси или FIXED дают AxisMismatch.
    """
    label_of = {variant_tag(axis, value): setting_label(axis, value) for value in axis_values(axis)}
    multi_prompt = len({r.prompt_id for r in records}) > 1

    rows = []
    for record in records:
        if record.variant_tag == WTYPO_TAG:
            continue
        if record.variant_tag not in label_of:
            raise AxisMismatch(f"{record.instance_id}: вариант {record.variant_tag} не относится к оси {axis.value}")
        rows.append((
            label_of[record.variant_tag],
            record.task,
            _model_label(record.model_name, record.prompt_id, multi_prompt),
            bool(record.correct),
        ))

    frame = pd.DataFrame(rows, columns=['setting', 'task', 'model', 'correct'])
    table = FactorTable(
        axis=axis,
        settings=list(label_of.values()),
        tasks=sorted(set(frame['task']), key=_task_order),
        models=sorted(set(frame['model'])),
    )
    if not frame.empty:
        for (setting, task, model), group in frame.groupby(['setting', 'task', 'model'])['correct']:
            table.cells[(setting, task, model)] = (int(group.sum()), int(group.size))
    return table


# Текстовые опции CLIP

DEFAULT_OPTION_MODEL = "clip"


@dataclass(frozen=True)
class OptionScores:
    """Оценки сходства изображения с текстовыми опциями одного элемента"""
    instance_id: str
    task: str
    model: str
    on_typo: bool
    scores: Dict[str, Tuple[float, ...]]

    @classmethod
    def from_dict(cls, data: Dict, option_sets: Dict[str, TextOptionSet]) -> "OptionScores":
        if 'instance_id' not in data or 'task' not in data:
            raise ValueError("нет полей instance_id или task")
        scores = {}
        for set_id, option_set in option_sets.items():
            if set_id not in data:
                continue
            values = tuple(float(v) for v in data[set_id])
            if len(values) != len(option_set.templates):
                raise ValueError(f"{set_id}: {len(values)} оценок, а опций {len(option_set.templates)}")
            scores[set_id] = values
        if not scores:
            raise ValueError(f"нет оценок ни для одного набора ({', '.join(option_sets)})")
        on_typo = data.get('on_typo', True)
        if not isinstance(on_typo, bool):
            raise ValueError(f"on_typo должен быть true/false, получено {on_typo!r}")
        return cls(
            instance_id=str(data['instance_id']),
            task=TaskKind.parse(data['task']).value,
            model=str(data.get('model') or DEFAULT_OPTION_MODEL),
            on_typo=on_typo,
            scores=scores,
        )


def label_option_indices(option_set: TextOptionSet) -> Tuple[int, ...]:
    """Опции, описывающие истинное содержимое изображения: в шаблоне есть {label}"""
    return tuple(i for i, template in enumerate(option_set.templates) if '{label}' in template)


def read_option_scores(path: Union[str, Path], catalog: Optional[PromptCatalog] = None) -> List[OptionScores]:
    """
    Читает JSONL внешнего CLIP-оценщика: строка на элемент, поля
    instance_id, task, необязательные model и on_typo и списки оценок
    по наборам ("Set1": [...], "Set2": [...]) в порядке опций.
    """
    option_sets = (catalog or default_catalog()).option_sets
    rows = []
    try:
        for line_num, data in iter_jsonl(path):
            try:
                rows.append(OptionScores.from_dict(data, option_sets))
            except (TypeError, ValueError) as e:
                raise CorpusFormatError(f"{path}:{line_num}: неверная строка оценок ({e})") from e
    except json.JSONDecodeError as e:
        raise CorpusFormatError(f"{path}: неверный JSON ({e})") from e
    return rows


@dataclass
class OptionAccuracyTable:
    """Доля элементов, где лучшая опция описывает истинную метку"""
    set_ids: List[str]
    keys: List[Tuple[str, str, bool]] = field(default_factory=list)
    cells: Dict[Tuple[str, str, bool, str], Tuple[int, int]] = field(default_factory=dict)

    def accuracy(self, model: str, task: str, on_typo: bool, set_id: str) -> Optional[float]:
        correct, total = self.cells.get((model, task, on_typo, set_id), (0, 0))
        if total == 0:
            return None
        return 100.0 * correct / total

    def count(self, model: str, task: str, on_typo: bool) -> int:
        return max(self.cells.get((model, task, on_typo, s), (0, 0))[1] for s in self.set_ids)


def compute_option_accuracy(rows: Sequence[OptionScores],
                            catalog: Optional[PromptCatalog] = None) -> OptionAccuracyTable:
    """
    Точность zero-shot выбора по наборам опций. При равных оценках
    побеждает первая опция.
    """
    if not rows:
        raise UsageError("Нет оценок текстовых опций")
    option_sets = (catalog or default_catalog()).option_sets
    correct_indices = {set_id: label_option_indices(s) for set_id, s in option_sets.items()}

    flat = []
    for row in rows:
        for set_id, values in row.scores.items():
            best = max(range(len(values)), key=lambda i: (values[i], -i))
            flat.append((row.model, row.task, row.on_typo, set_id, best in correct_indices[set_id]))
    frame = pd.DataFrame(flat, columns=['model', 'task', 'on_typo', 'set_id', 'correct'])

    present = set(frame['set_id'])
    table = OptionAccuracyTable(set_ids=[s for s in option_sets if s in present])
    for (model, task, on_typo, set_id), group in frame.groupby(['model', 'task', 'on_typo', 'set_id'])['correct']:
        table.cells[(str(model), str(task), bool(on_typo), str(set_id))] = (int(group.sum()), int(group.size))
    table.keys = sorted(
        {(model, task, on_typo) for model, task, on_typo, _ in table.cells},
        key=lambda k: (k[0], not k[2], _task_order(k[1])),
    )
    return table


# Рендеринг

def _fmt(value: Optional[float], digits: int = 1) -> str:
    return EMPTY_CELL if value is None else f"{value:.{digits}f}"


def _bold(text: str) -> str:
    return f"**{text}**"


def _markdown(header: List[str], rows: List[List[str]]) -> str:
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(" --- " for _ in header) + "|",
    ]
    lines.extend("| " + " | ".join(row) + " |" for row in rows)
    return "\n".join(lines) + "\n"


def _csv(header: List[str], rows: List[List[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _long_table(report: MetricsReport, markdown: bool) -> Tuple[List[str], List[List[str]]]:
    digits = 1 if markdown else 2
    gap = _bold("GAP") if markdown else "GAP"
    pooled_gap = _bold("GAP pooled") if markdown else "GAP pooled"
    header = ["Task", "Model", "Prompt", "N clean", "N typo", "ACC", "ACC-", gap,
              "ACC pooled", "ACC- pooled", pooled_gap]

    rows = []
    for model in report.models:
        for prompt in report.prompts:
            for task in report.tasks:
                row = report.row(task, model, prompt)
                if row is None:
                    continue
                short = TaskKind(task).short if markdown else task
                rows.append([short, model, prompt, str(row.n_clean), str(row.n_typo),
                             _fmt(row.acc_clean, digits), _fmt(row.acc_typo, digits), _fmt(row.gap, digits),
                             "", "", ""])
            overall = report.overall_row(model, prompt)
            if overall is None or overall.n_tasks < 2:
                continue
            gap_cell = _fmt(overall.gap, digits)
            pooled_cell = _fmt(overall.pooled_gap, digits)
            rows.append([OVERALL, model, prompt, "", "",
                         _fmt(overall.acc_clean, digits), _fmt(overall.acc_typo, digits),
                         _bold(gap_cell) if markdown else gap_cell,
                         _fmt(overall.pooled_acc_clean, digits), _fmt(overall.pooled_acc_typo, digits),
                         _bold(pooled_cell) if markdown else pooled_cell])
    return header, rows


def _wide_table(report: MetricsReport, markdown: bool, group_by: str) -> Tuple[List[str], List[List[str]]]:
    digits = 1 if markdown else 2
    if group_by == 'model':
        groups = [(m, p) for m in report.models for p in report.prompts]
        multi = len(report.prompts) > 1
        labels = [f"{m} [{p}]" if multi else m for m, p in groups]
    elif group_by == 'prompt':
        groups = [(m, p) for p in report.prompts for m in report.models]
        multi = len(report.models) > 1
        labels = [f"{p} [{m}]" if multi else p for m, p in groups]
    else:
        raise UsageError(f"Неизвестная группировка {group_by!r}, ожидается model или prompt")

    header = ["Tasks"]
    for label in labels:
        gap = f"{label} GAP"
        header += [f"{label} ACC", f"{label} ACC-", _bold(gap) if markdown else gap]

    rows = []
    for task in report.tasks:
        line = [TaskKind(task).short if markdown else task]
        for model, prompt in groups:
            row = report.row(task, model, prompt)
            if row is None:
                line += [EMPTY_CELL] * 3
            else:
                line += [_fmt(row.acc_clean, digits), _fmt(row.acc_typo, digits), _fmt(row.gap, digits)]
        rows.append(line)

    summaries = ((OVERALL, False), (OVERALL_POOLED, True)) if len(report.tasks) > 1 else ()
    for title, pooled in summaries:
        line = [title]
        for model, prompt in groups:
            overall = report.overall_row(model, prompt)
            if overall is None:
                line += [EMPTY_CELL] * 3
                continue
            if pooled:
                values = (overall.pooled_acc_clean, overall.pooled_acc_typo, overall.pooled_gap)
            else:
                values = (overall.acc_clean, overall.acc_typo, overall.gap)
            gap_cell = _fmt(values[2], digits)
            line += [_fmt(values[0], digits), _fmt(values[1], digits),
                     _bold(gap_cell) if markdown else gap_cell]
        rows.append(line)
    return header, rows


def render_report(report: MetricsReport, fmt: str = 'markdown', layout: str = 'long',
                  group_by: str = 'model') -> str:
    """
    Рендерит отчет

    Args:
        fmt: markdown или csv
        layout: long (строка на задачу/модель/промпт) или wide (задачи строками,
            группы колонок ACC/ACC-/GAP по моделям или промптам)
        group_by: model или prompt для wide
    """
    if not report.rows:
        raise UsageError("Отчет пуст: нет ни одной строки метрик")
    if fmt not in ('markdown', 'csv'):
        raise UsageError(f"Неизвестный формат {fmt!r}, ожидается markdown или csv")

    markdown = fmt == 'markdown'
    if layout == 'long':
        header, rows = _long_table(report, markdown)
    elif layout == 'wide':
        header, rows = _wide_table(report, markdown, group_by)
    else:
        raise UsageError(f"Неизвестная раскладка {layout!r}, ожидается long или wide")
    return _markdown(header, rows) if markdown else _csv(header, rows)


def render_factor_table(table: FactorTable, fmt: str = 'markdown') -> str:
    """Таблицы 'Factors | Settings | <model> ACC', по одной на задачу"""
    if fmt not in ('markdown', 'csv'):
        raise UsageError(f"Неизвестный формат {fmt!r}, ожидается markdown или csv")
    markdown = fmt == 'markdown'
    digits = 1 if markdown else 2

    if markdown:
        parts = []
        for task in table.tasks:
            header = ["Factors", "Settings"] + [f"{model} ACC" for model in table.models]
            rows = []
            for index, setting in enumerate(table.settings):
                rows.append([table.axis.display_name if index == 0 else "", setting] + [
                    _fmt(table.accuracy(setting, task, model), digits) for model in table.models
                ])
            parts.append(f"### {task}\n\n" + _markdown(header, rows))
        return "\n".join(parts)

    header = ["Task", "Factors", "Settings"] + [f"{model} ACC" for model in table.models]
    rows = []
    for task in table.tasks:
        for setting in table.settings:
            rows.append([task, table.axis.display_name, setting] + [
                _fmt(table.accuracy(setting, task, model), digits) for model in table.models
            ])
    return _csv(header, rows)


def render_option_table(table: OptionAccuracyTable, fmt: str = 'markdown') -> str:
    """Точность Set1/Set2 по (модели, задаче, типу изображений) и прирост последнего набора"""
    if fmt not in ('markdown', 'csv'):
        raise UsageError(f"Неизвестный формат {fmt!r}, ожидается markdown или csv")
    markdown = fmt == 'markdown'
    digits = 1 if markdown else 2

    header = ["Task", "Model", "Images", "N"] + [f"{set_id} ACC" for set_id in table.set_ids]
    with_gain = len(table.set_ids) > 1
    if with_gain:
        gain = f"{table.set_ids[-1]} - {table.set_ids[0]}"
        header.append(_bold(gain) if markdown else gain)

    rows = []
    for model, task, on_typo in table.keys:
        values = [table.accuracy(model, task, on_typo, set_id) for set_id in table.set_ids]
        line = [TaskKind(task).short if markdown else task, model, "typo" if on_typo else "clean",
                str(table.count(model, task, on_typo))]
        line += [_fmt(value, digits) for value in values]
        if with_gain:
            line.append(EMPTY_CELL if None in (values[0], values[-1]) else _fmt(values[-1] - values[0], digits))
        rows.append(line)
    return _markdown(header, rows) if markdown else _csv(header, rows)
