import csv
import io
import json
import random

import pytest

from typoattack.errors import AxisMismatch, CorpusFormatError, UsageError
from typoattack.factors import Axis, axis_values, variant_tag
from typoattack.metrics import (
    EMPTY_CELL, OptionScores, compute_factor_table, compute_metrics, compute_option_accuracy, label_option_indices,
    read_option_scores, render_factor_table, render_option_table, render_report,
)
from typoattack.prompt_lib import default_catalog

from conftest import make_record as rec, record_batch as batch


def obj_records():
    return batch("Object", 500, 489, False) + batch("Object", 500, 178, True)


def test_object_row_example():
    report = compute_metrics(obj_records())
    row = report.row("Object", "llava", "BASE")
    assert (row.n_clean, row.n_typo) == (500, 500)
    assert f"{row.acc_clean:.1f}" == "97.8"
    assert f"{row.acc_typo:.1f}" == "35.6"
    assert f"{row.gap:.1f}" == "62.2"
    assert report.missing == []


def test_all_correct_gives_zero_gap():
    report = compute_metrics(batch("Reasoning", 10, 10, False) + batch("Reasoning", 10, 10, True))
    row = report.rows[0]
    assert row.acc_clean == row.acc_typo == 100.0
    assert row.gap == 0.0


def test_matches_plain_counting_oracle():
    rng = random.Random(11)
    tasks = ["Object", "Attribute", "Enumeration"]
    models = ["m1", "m2"]
    records = [
        rec(rng.choice(tasks), rng.random() < 0.5, rng.random() < 0.6, model=rng.choice(models), index=i)
        for i in range(10_000)
    ]
    report = compute_metrics(records)

    for task in tasks:
        for model in models:
            group = [r for r in records if r.task == task and r.model_name == model]
            clean = [r for r in group if not r.on_typo]
            typo = [r for r in group if r.on_typo]
            row = report.row(task, model, "BASE")
            assert row.acc_clean == 100.0 * sum(r.correct for r in clean) / len(clean)
            assert row.acc_typo == 100.0 * sum(r.correct for r in typo) / len(typo)
            assert row.gap == row.acc_clean - row.acc_typo


def test_order_independent():
    records = obj_records() + batch("Attribute", 20, 15, False) + batch("Attribute", 20, 5, True)
    shuffled = list(records)
    random.Random(3).shuffle(shuffled)
    first = compute_metrics(records)
    second = compute_metrics(shuffled)
    assert first.rows == second.rows
    assert first.overall == second.overall
    assert render_report(first) == render_report(second)


def test_overall_mean_and_pooled():
    records = (batch("Object", 10, 10, False) + batch("Object", 10, 5, True)
               + batch("Attribute", 30, 30, False) + batch("Attribute", 30, 0, True))
    overall = compute_metrics(records).overall_row("llava", "BASE")
    assert overall.n_tasks == 2
    assert overall.acc_typo == pytest.approx(25.0)
    assert overall.pooled_acc_typo == pytest.approx(100.0 * 5 / 40)
    assert overall.gap == pytest.approx(75.0)


def test_missing_sides_are_reported():
    records = batch("Object", 4, 4, False) + batch("Object", 4, 1, True) + batch("Attribute", 3, 3, False)
    report = compute_metrics(records, tasks=["Object", "Attribute", "Reasoning"])
    assert [row.task for row in report.rows] == ["Object"]
    sides = {(m.task, m.side) for m in report.missing}
    assert sides == {("Attribute", "typo"), ("Reasoning", "both")}


def test_empty_records():
    report = compute_metrics([])
    assert report.rows == []
    with pytest.raises(UsageError):
        render_report(report)


def test_markdown_long_single_task():
    text = render_report(compute_metrics(obj_records()))
    lines = text.strip().splitlines()
    assert len(lines) == 3
    assert "**GAP**" in lines[0]
    assert lines[2].startswith("| Obj | llava | BASE | 500 | 500 | 97.8 | 35.6 | 62.2 |")


def test_markdown_overall_gap_is_bold():
    records = obj_records() + batch("Attribute", 10, 9, False) + batch("Attribute", 10, 2, True)
    lines = render_report(compute_metrics(records)).strip().splitlines()
    overall = lines[-1]
    assert overall.startswith("| Overall |")
    assert overall.count("**") == 4


def test_csv_has_two_decimals_and_no_bold():
    text = render_report(compute_metrics(obj_records()), fmt="csv")
    assert "**" not in text
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0][:8] == ["Task", "Model", "Prompt", "N clean", "N typo", "ACC", "ACC-", "GAP"]
    assert rows[1][:8] == ["Object", "llava", "BASE", "500", "500", "97.80", "35.60", "62.20"]


def test_rendering_is_deterministic():
    report = compute_metrics(obj_records())
    assert render_report(report, fmt="csv") == render_report(report, fmt="csv")


def test_wide_layout_by_model():
    records = (obj_records()
               + batch("Object", 10, 10, False, model="blip") + batch("Object", 10, 4, True, model="blip")
               + batch("Attribute", 10, 8, False) + batch("Attribute", 10, 3, True))
    text = render_report(compute_metrics(records), layout="wide")
    lines = text.strip().splitlines()
    assert lines[0].startswith("| Tasks | blip ACC | blip ACC- | **blip GAP** | llava ACC |")
    vis = next(line for line in lines if line.startswith("| Vis |"))
    assert vis.count(EMPTY_CELL) == 3
    assert lines[-2].startswith("| Overall |")
    assert lines[-1].startswith("| Overall (pooled) |")


def test_wide_layout_by_prompt():
    records = obj_records() + batch("Object", 6, 6, False, prompt="P1") + batch("Object", 6, 3, True, prompt="P1")
    rows = list(csv.reader(io.StringIO(render_report(compute_metrics(records), fmt="csv", layout="wide",
                                                     group_by="prompt"))))
    assert rows[0] == ["Tasks", "BASE ACC", "BASE ACC-", "BASE GAP", "P1 ACC", "P1 ACC-", "P1 GAP"]
    assert rows[1] == ["Object", "97.80", "35.60", "62.20", "100.00", "50.00", "50.00"]


@pytest.mark.parametrize("kwargs", [dict(fmt="html"), dict(layout="grid"), dict(layout="wide", group_by="task")])
def test_render_rejects_bad_arguments(kwargs):
    with pytest.raises(UsageError):
        render_report(compute_metrics(obj_records()), **kwargs)


# Таблицы факторов

def _sweep_records(axis, model="llava", correct_upto=None):
    records = []
    values = axis_values(axis)
    for position, value in enumerate(values):
        tag = variant_tag(axis, value)
        for i in range(10):
            correct = i < (correct_upto[position] if correct_upto else 10)
            records.append(rec("Object", True, correct, model=model, tag=tag, index=i))
    return records


def test_factor_table_font_size_is_monotone():
    records = _sweep_records(Axis.FONT_SIZE, correct_upto=[9, 7, 5, 3, 1])
    records += batch("Object", 10, 10, False)
    table = compute_factor_table(records, Axis.FONT_SIZE)
    accuracies = [table.accuracy(setting, "Object", "llava") for setting in table.settings]
    assert table.settings == ["3px", "6px", "9px", "12px", "15px"]
    assert accuracies == [90.0, 70.0, 50.0, 30.0, 10.0]
    assert accuracies == sorted(accuracies, reverse=True)


def test_factor_table_markdown_and_empty_cells():
    records = _sweep_records(Axis.OPACITY)
    records += [rec("Object", True, True, model="blip", tag="FO-100")]
    text = render_factor_table(compute_factor_table(records, Axis.OPACITY))
    assert text.startswith("### Object")
    lines = text.splitlines()
    assert "| Factors | Settings | blip ACC | llava ACC |" in lines
    assert "| Font Opacity | 20% | — | 100.0 |" in lines


def test_factor_table_csv():
    table = compute_factor_table(_sweep_records(Axis.COLOR), Axis.COLOR)
    rows = list(csv.reader(io.StringIO(render_factor_table(table, fmt="csv"))))
    assert rows[0] == ["Task", "Factors", "Settings", "llava ACC"]
    assert len(rows) == 1 + 23
    assert rows[1] == ["Object", "Font Color", "red", "100.00"]


def test_factor_table_rejects_other_axis():
    with pytest.raises(AxisMismatch):
        compute_factor_table(_sweep_records(Axis.OPACITY), Axis.FONT_SIZE)
    with pytest.raises(AxisMismatch):
        compute_factor_table([rec(tag="FIXED")], Axis.FONT_SIZE)


# Текстовые опции CLIP

OPTION_ROWS = [
    # Object, typo: Set1 верно 2 из 4 (третья строка решена ничьей), Set2 верно 3 из 4
    {"instance_id": "obj-1", "task": "Object", "Set1": [0.2, 0.8], "Set2": [0.9, 0.1, 0.3, 0.2]},
    {"instance_id": "obj-2", "task": "Object", "Set1": [0.7, 0.3], "Set2": [0.1, 0.2, 0.6, 0.5]},
    {"instance_id": "obj-3", "task": "Object", "Set1": [0.5, 0.5], "Set2": [0.1, 0.4, 0.2, 0.4]},
    {"instance_id": "obj-4", "task": "Obj", "Set1": [0.1, 0.9], "Set2": [0.95, 0.2, 0.1, 0.9]},
    {"instance_id": "vis-1", "task": "Attribute", "on_typo": False, "Set1": [0.6, 0.4],
     "Set2": [0.1, 0.2, 0.9, 0.3]},
]


def _write_scores(path, rows):
    path.write_text("".join(json.dumps(row) + "\n" for row in rows), encoding="utf-8")
    return path


def test_label_options():
    option_sets = default_catalog().option_sets
    assert label_option_indices(option_sets["Set1"]) == (0,)
    assert label_option_indices(option_sets["Set2"]) == (0, 2)


def test_option_accuracy_from_score_file(tmp_path):
    rows = read_option_scores(_write_scores(tmp_path / "scores.jsonl", OPTION_ROWS))
    assert [row.model for row in rows] == ["clip"] * 5
    table = compute_option_accuracy(rows)
    assert table.set_ids == ["Set1", "Set2"]
    assert table.keys == [("clip", "Object", True), ("clip", "Attribute", False)]
    assert table.accuracy("clip", "Object", True, "Set1") == 50.0
    assert table.accuracy("clip", "Object", True, "Set2") == 75.0
    assert table.accuracy("clip", "Attribute", False, "Set2") == 100.0
    assert table.accuracy("clip", "Attribute", True, "Set1") is None
    assert table.count("clip", "Object", True) == 4


def test_option_tie_goes_to_first_option():
    scores = OptionScores("obj-1", "Object", "clip", True, {"Set1": (0.5, 0.5), "Set2": (0.3, 0.3, 0.3, 0.3)})
    table = compute_option_accuracy([scores])
    assert table.accuracy("clip", "Object", True, "Set1") == 100.0
    assert table.accuracy("clip", "Object", True, "Set2") == 100.0

    scores = OptionScores("obj-2", "Object", "clip", True, {"Set1": (0.1, 0.5), "Set2": (0.1, 0.5, 0.2, 0.5)})
    table = compute_option_accuracy([scores])
    assert table.accuracy("clip", "Object", True, "Set1") == 0.0
    assert table.accuracy("clip", "Object", True, "Set2") == 0.0


def test_option_table_rendering(tmp_path):
    table = compute_option_accuracy(read_option_scores(_write_scores(tmp_path / "scores.jsonl", OPTION_ROWS)))

    markdown = render_option_table(table)
    assert "| Task | Model | Images | N | Set1 ACC | Set2 ACC | **Set2 - Set1** |" in markdown
    assert "| Obj | clip | typo | 4 | 50.0 | 75.0 | 25.0 |" in markdown
    assert "| Vis | clip | clean | 1 | 100.0 | 100.0 | 0.0 |" in markdown

    rows = list(csv.reader(io.StringIO(render_option_table(table, "csv"))))
    assert rows[0] == ["Task", "Model", "Images", "N", "Set1 ACC", "Set2 ACC", "Set2 - Set1"]
    assert rows[1] == ["Object", "clip", "typo", "4", "50.00", "75.00", "25.00"]

    with pytest.raises(UsageError):
        render_option_table(table, "html")


def test_single_set_has_no_gain_column():
    scores = OptionScores("obj-1", "Object", "siglip", True, {"Set1": (0.9, 0.1)})
    text = render_option_table(compute_option_accuracy([scores]), "csv")
    assert text.splitlines() == ["Task,Model,Images,N,Set1 ACC", "Object,siglip,typo,1,100.00"]


@pytest.mark.parametrize("row", [
    {"instance_id": "obj-1", "task": "Object", "Set1": [0.2, 0.3, 0.5]},
    {"instance_id": "obj-1", "task": "Object"},
    {"task": "Object", "Set1": [0.2, 0.8]},
    {"instance_id": "obj-1", "task": "Painting", "Set1": [0.2, 0.8]},
    {"instance_id": "obj-1", "task": "Object", "on_typo": "no", "Set1": [0.2, 0.8]},
    {"instance_id": "obj-1", "task": "Object", "Set1": ["high", "low"]},
])
def test_bad_score_rows(tmp_path, row):
    path = _write_scores(tmp_path / "scores.jsonl", OPTION_ROWS[:1] + [row])
    with pytest.raises(CorpusFormatError, match=":2:"):
        read_option_scores(path)


def test_option_scores_broken_json_and_empty(tmp_path):
    path = tmp_path / "scores.jsonl"
    path.write_text('{"instance_id": "obj-1",\n', encoding="utf-8")
    with pytest.raises(CorpusFormatError):
        read_option_scores(path)
    with pytest.raises(UsageError):
        compute_option_accuracy([])
