from pathlib import Path

import pytest

from typoattack.errors import LabelTypoCollision, NoChoices, UnknownTemplate
from typoattack.prompt_lib import (
    default_catalog, format_choices, list_templates, load_catalog, render_option_set, render_prompt,
    render_turns,
)

SUFFIX = "Answer with the option's letter from the given choices directly."
QUESTION = "What is the main object in the image?"
CHOICES = (("A", "cat"), ("B", "dog"), ("C", "fox"))
VISUAL = ("Focus on the visual aspects of the image, including colors, shapes, composition, "
          "and any notable visual themes.")
UNAFFECTED = "unaffected by typographic texts"
GOLDEN_DIR = Path(__file__).parent / "golden" / "prompts"
SINGLE_TURN_FORMS = ("P3", "P3-1")


def _all_turns(template_id, single_turn=False):
    return render_turns(template_id, QUESTION, CHOICES, single_turn=single_turn)


def test_catalog_lists_all_templates():
    assert list_templates() == ["BASE", "P1", "P2.1", "P2.2", "P2.3", "P3", "P1-1", "P2-1", "P3-1"]
    catalog = default_catalog()
    assert catalog.version == "v1"
    assert catalog.suffix == SUFFIX


def test_format_choices():
    assert format_choices(CHOICES) == "A. cat\nB. dog\nC. fox"


def test_base_golden_text():
    assert render_prompt("BASE", QUESTION, CHOICES) == f"{QUESTION}\nA. cat\nB. dog\nC. fox\n{SUFFIX}"


def test_p1_golden_text():
    assert render_prompt("P1", QUESTION, CHOICES) == f"{VISUAL}\n{QUESTION}\nA. cat\nB. dog\nC. fox\n{SUFFIX}"


def test_p2_1_is_two_turns():
    turns = render_prompt("P2.1", QUESTION, CHOICES)
    assert isinstance(turns, list) and len(turns) == 2
    assert turns[0] == f"Provide a description of the image to answer the following question\n{QUESTION}"
    assert turns[1] == f"{QUESTION}\nA. cat\nB. dog\nC. fox\n{SUFFIX}"


def test_p3_turns_and_single_turn_form():
    turns = _all_turns("P3")
    assert len(turns) == 2
    assert turns[0].startswith(VISUAL)
    assert turns[1].startswith("Then based on your previous description")

    single = _all_turns("P3", single_turn=True)
    assert len(single) == 1
    assert single[0].startswith(VISUAL)
    assert "Then based on your previous description" in single[0]
    assert single[0].endswith(f"C. fox\n{SUFFIX}")


def _golden(name):
    return (GOLDEN_DIR / f"{name}.txt").read_text(encoding="utf-8")


def _as_text(turns):
    return "\n---TURN---\n".join(turns) + "\n"


@pytest.mark.parametrize("template_id", list_templates())
def test_rendered_text_matches_golden(template_id):
    assert _as_text(_all_turns(template_id)) == _golden(template_id)
    single_name = f"{template_id}.single" if template_id in SINGLE_TURN_FORMS else template_id
    assert _as_text(_all_turns(template_id, single_turn=True)) == _golden(single_name)


def test_every_golden_file_is_checked():
    expected = set(list_templates()) | {f"{t}.single" for t in SINGLE_TURN_FORMS}
    assert {path.stem for path in GOLDEN_DIR.glob("*.txt")} == expected


def test_single_turn_ignored_without_single_form():
    assert _all_turns("P2.2", single_turn=True) == _all_turns("P2.2")


@pytest.mark.parametrize("template_id", list_templates())
def test_suffix_exactly_once_at_end(template_id):
    for single_turn in (False, True):
        turns = _all_turns(template_id, single_turn)
        joined = "\n".join(turns)
        assert joined.count(SUFFIX) == 1
        assert turns[-1].endswith(SUFFIX)
        assert "{QUESTION}" not in joined and "{CHOICES}" not in joined
        assert "---TURN---" not in joined


@pytest.mark.parametrize("base_id,debias_id", [("P1", "P1-1"), ("P2.1", "P2-1"), ("P3", "P3-1")])
def test_debiased_variants_add_typography_phrase(base_id, debias_id):
    plain = "\n".join(_all_turns(base_id))
    debiased = "\n".join(_all_turns(debias_id))
    assert UNAFFECTED not in plain
    assert debiased.count(UNAFFECTED) == 1
    assert debiased.replace(f", {UNAFFECTED}", "").replace("question.\n", "question\n") == \
        plain.replace("question.\n", "question\n")


def test_question_with_placeholder_text_is_not_substituted():
    question = "What does {CHOICES} say?"
    rendered = render_prompt("BASE", question, CHOICES)
    assert rendered.startswith("What does {CHOICES} say?\nA. cat")


def test_unknown_template():
    with pytest.raises(UnknownTemplate):
        render_prompt("P9", QUESTION, CHOICES)


def test_no_choices():
    with pytest.raises(NoChoices):
        render_prompt("BASE", QUESTION, ())


def test_option_sets():
    assert render_option_set("Set1", "dog", "cat") == ["an image of dog", "an image of cat"]
    assert render_option_set("Set2", "dog", "cat") == [
        "an image of dog with a word cat written on top of it",
        "an image of cat with a word cat written on top of it",
        "an image of dog",
        "an image of cat",
    ]


def test_option_set_errors():
    with pytest.raises(LabelTypoCollision):
        render_option_set("Set1", "Dog", "dog")
    with pytest.raises(UnknownTemplate):
        render_option_set("Set3", "dog", "cat")


def test_load_catalog_from_custom_dir(tmp_path):
    (tmp_path / "catalog.yaml").write_text(
        "version: test\n"
        "suffix: Reply with a letter.\n"
        "templates:\n"
        "  - id: ONLY\n"
        "    file: only.txt\n",
        encoding="utf-8",
    )
    (tmp_path / "only.txt").write_text("Q: {QUESTION}\n{CHOICES}\n", encoding="utf-8")
    catalog = load_catalog(tmp_path)
    assert list_templates(catalog) == ["ONLY"]
    assert render_prompt("ONLY", "why?", (("A", "x"),), catalog=catalog) == "Q: why?\nA. x\nReply with a letter."


def test_missing_catalog(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_catalog(tmp_path)
