"""Общие фикстуры тестов: синтетический корпус, манифесты, отрендеренные картинки."""
import pytest

from typoattack.cli import render_manifest
from typoattack.config import ENV_VARS
from typoattack.dataset_builder import BaseItem, TaskKind, build_fixed_manifest, load_corpus
from typoattack.eval_harness import EvalRecord
from typoattack.fixtures import build_fixture_corpus

FIXTURE_SEED = 42
MANIFEST_SEED = 7


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    """Путь к corpus.jsonl синтетического корпуса (4 элемента на задачу)"""
    out_dir = tmp_path_factory.mktemp("corpus")
    return build_fixture_corpus(out_dir, seed=FIXTURE_SEED, per_task=4)


@pytest.fixture(scope="session")
def fixture_items(fixture_corpus):
    return load_corpus(fixture_corpus)


@pytest.fixture(scope="session")
def fixed_manifest(fixture_items, fixture_corpus):
    return build_fixed_manifest(fixture_items, seed=MANIFEST_SEED, corpus_dir=str(fixture_corpus.parent))


@pytest.fixture(scope="session")
def rendered_fixed(fixed_manifest, tmp_path_factory):
    """(манифест, папка с PNG) для прогонов оценки"""
    image_dir = tmp_path_factory.mktemp("images")
    render_manifest(fixed_manifest, image_dir, "default", workers=2)
    return fixed_manifest, image_dir


@pytest.fixture
def clean_env(monkeypatch):
    """Убирает TYPO_* из окружения и восстанавливает после теста"""
    for name in ENV_VARS:
        monkeypatch.setenv(name, "")
        monkeypatch.delenv(name)
    return monkeypatch


def make_item(item_id="it-1", task=TaskKind.OBJECT, choices=(("A", "cat"), ("B", "dog")),
              answer="A", typo_pool=None, question="What is in the image?"):
    return BaseItem(
        id=item_id,
        task=task,
        image_path=f"images/{item_id}.png",
        question=question,
        choices=tuple(choices),
        ground_truth_letter=answer,
        typo_pool=tuple(typo_pool) if typo_pool is not None else None,
    )


def make_record(task="Object", on_typo=True, correct=True, model="llava", prompt="BASE", tag=None, index=0):
    tag = tag or ("FIXED" if on_typo else "WTYPO")
    return EvalRecord(
        instance_id=f"{task}-{index}__{tag}",
        prompt_id=prompt,
        model_name=model,
        on_typo=on_typo,
        raw_response="A" if correct else "B",
        parsed_letter="A" if correct else "B",
        correct=correct,
        latency_ms=1,
        cache_hit=False,
        task=task,
        variant_tag=tag,
        ground_truth_letter="A",
    )


def record_batch(task, n, k, on_typo, **kwargs):
    """n записей одной задачи и стороны, первые k правильные"""
    return [make_record(task, on_typo, i < k, index=i, **kwargs) for i in range(n)]
