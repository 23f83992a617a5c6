"""
Модуль командной строки: fixtures → generate → render → eval → report,
плюс mock-serve и выгрузка текстовых опций для CLIP
"""
import argparse
import logging
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional

from rich.console import Console
from rich.markdown import Markdown
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn
from rich.table import Table

from typoattack import __version__
from typoattack.config import RunConfig, build_run_config
from typoattack.dataset_builder import (
    CountReport, DatasetManifest, TaskKind, TypoInstance, build_exploring_manifest, build_fixed_manifest,
    load_corpus, load_vocabulary, manifest_digest, read_manifest, verify_counts, write_manifest,
)
from typoattack.errors import ConfigError, CorpusFormatError, TypoAttackError, UsageError
from typoattack.eval_harness import ChatClient, evaluate_manifest, read_records, summarize_run, write_records
from typoattack.factors import Axis, axis_of_tag
from typoattack.fixtures import SCALE_SIZES, build_fixture_items, scale_corpus
from typoattack.metrics import (
    compute_factor_table, compute_metrics, compute_option_accuracy, read_option_scores, render_factor_table,
    render_option_table, render_report,
)
from typoattack.mock_model import MockChatClient, MockModel, make_server
from typoattack.prompt_lib import render_option_set
from typoattack.resource_checker import check_render_resources, detect_hardware, print_resource_check
from typoattack.typo_render import encode_png, font_digest, load_raster, render_typo_image
from typoattack.utils import (
    atomic_write_bytes, ensure_dir, sha256_bytes, sha256_file, setup_logging, write_file, write_jsonl,
)

console = Console()
logger = logging.getLogger(__name__)

DEFAULT_OUT = Path("out")


def _progress() -> Progress:
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        console=console,
    )


# fixtures

def cmd_fixtures(config: RunConfig) -> int:
    """Пишет синтетический корпус"""
    items = build_fixture_items(config.out_dir, config.seed, config.per_task, config.font)
    if config.table1_scale:
        items = scale_corpus(items)
    corpus_path = Path(config.out_dir) / "corpus.jsonl"
    count = write_jsonl(corpus_path, (item.to_dict() for item in items))
    console.print(f"[green]✓ Корпус: {count} элементов → {corpus_path}[/green]")
    return 0


# generate

def print_count_report(report: CountReport) -> None:
    table = Table(title="Счетчики манифеста")
    table.add_column("Задача", style="cyan")
    table.add_column("Тип")
    table.add_column("Ожидается", justify="right")
    table.add_column("Пересчитано", justify="right")
    table.add_column("В заголовке", justify="right")
    table.add_column("", justify="center")
    for row in report.rows:
        table.add_row(row.task, row.kind, str(row.expected), str(row.recomputed), str(row.declared),
                      "[green]✓[/green]" if row.ok else "[red]✗[/red]")
    table.add_row("Всего", "typo", "", str(report.total_typo), "", "")
    table.add_row("Всего", "clean", "", str(report.total_clean), "", "")
    console.print(table)
    for problem in report.problems:
        console.print(f"[red]❌ {problem}[/red]")


def cmd_generate(config: RunConfig) -> int:
    """Строит манифест Exploring по оси или Fixing"""
    items = load_corpus(config.corpus)
    vocabulary = load_vocabulary(config.vocabulary) if config.vocabulary else None
    corpus_dir = str(Path(config.corpus).parent)
    scale_tag = config.scale_tag
    if config.scale:
        scale_tag = config.scale.upper()
        items = scale_corpus(items, SCALE_SIZES[scale_tag])
        console.print(f"[cyan]Корпус растянут до масштаба {scale_tag}: {len(items)} элементов[/cyan]")

    if config.axis.upper() == 'FIXED':
        manifest = build_fixed_manifest(items, config.seed, scale_tag, config.font, vocabulary, corpus_dir)
    else:
        manifest = build_exploring_manifest(items, Axis.parse(config.axis), config.seed, scale_tag,
                                            config.include_wtypo, config.font, vocabulary, corpus_dir)

    out_path = Path(config.manifest or DEFAULT_OUT / "manifest.jsonl")
    write_manifest(manifest, out_path)
    report = verify_counts(read_manifest(out_path))
    print_count_report(report)
    console.print(f"[green]✓ Манифест: {out_path}[/green] sha256={manifest_digest(out_path)}")

    if not report.ok:
        console.print("[red]❌ Счетчики не сходятся[/red]")
        return 1
    return 0


# render

def render_instance(manifest: DatasetManifest, instance: TypoInstance, image_dir: Path, font_asset: str) -> bool:
    """
    Рендерит одно изображение

    Returns:
        True если файл записан, False если на диске уже те же байты
    """
    base_path = manifest.resolve_base_image(instance.base)
    if not base_path.is_file():
        raise CorpusFormatError(f"{instance.instance_id}: нет исходного изображения {base_path}")
    data = encode_png(render_typo_image(load_raster(base_path), instance.typo_text, instance.factors, font_asset))
    out_path = image_dir / f"{instance.instance_id}.png"
    if out_path.exists() and sha256_file(out_path) == sha256_bytes(data):
        return False
    atomic_write_bytes(out_path, data)
    return True


def render_manifest(manifest: DatasetManifest, image_dir, font_asset: str, workers: int,
                    on_done: Optional[Callable[[], None]] = None) -> Dict[str, int]:
    """Рендерит все типографические элементы, возвращает {'written', 'skipped'}"""
    out_dir = ensure_dir(image_dir)
    stats = {'written': 0, 'skipped': 0}

    def work(instance: TypoInstance) -> bool:
        return render_instance(manifest, instance, out_dir, font_asset)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        for written in executor.map(work, manifest.typo_instances):
            stats['written' if written else 'skipped'] += 1
            if on_done is not None:
                on_done()
    return stats


def cmd_render(config: RunConfig) -> int:
    """Материализует PNG для всех типографических элементов"""
    manifest = read_manifest(config.manifest)
    if manifest.font_hash and font_digest(config.font) != manifest.font_hash:
        raise UsageError(
            f"Шрифт {config.font!r} не совпадает с шрифтом манифеста (sha256 {manifest.font_hash[:12]}…)"
        )

    typo = manifest.typo_instances
    can_proceed, errors, warnings = check_render_resources(detect_hardware(Path(config.image_dir)), len(typo))
    print_resource_check(can_proceed, errors, warnings)
    if not can_proceed:
        return 1

    with _progress() as progress:
        task = progress.add_task("Рендеринг", total=len(typo))
        stats = render_manifest(manifest, config.image_dir, config.font, config.workers,
                                on_done=lambda: progress.advance(task))

    console.print(f"[green]✓ Записано: {stats['written']}, без изменений: {stats['skipped']}[/green] "
                  f"→ {config.image_dir}")
    return 0


# eval

def cmd_eval(config: RunConfig) -> int:
    """Прогоняет манифест через модель и пишет записи JSONL"""
    manifest = read_manifest(config.manifest)
    if config.mock:
        client = MockChatClient(MockModel.from_manifest(manifest, config.image_dir))
    else:
        client = ChatClient(config.endpoint())

    cache_dir = None if config.no_cache else config.cache_dir
    with _progress() as progress:
        task = progress.add_task(f"Оценка {config.prompt_id}", total=len(manifest.instances))
        records = evaluate_manifest(
            manifest,
            config.prompt_id,
            client=client,
            max_in_flight=config.max_in_flight,
            cache_dir=cache_dir,
            image_dir=config.image_dir,
            single_turn=config.single_turn,
            on_record=lambda _: progress.advance(task),
        )

    records_path = Path(config.records or DEFAULT_OUT / f"records_{config.prompt_id}.jsonl")
    write_records(records, records_path)

    summary = summarize_run(records, client, config.prompt_id)
    summary.update({
        'manifest': str(config.manifest),
        'stage': manifest.stage.value,
        'scale_tag': manifest.scale_tag,
        'records_path': str(records_path),
        'mock': config.mock,
        'single_turn': config.single_turn,
    })
    console.print_json(data=summary)
    return 0


# report

def _emit(text: str, fmt: str, output: Optional[str]) -> None:
    if output:
        write_file(output, text)
        console.print(f"[green]✓ Отчет: {output}[/green]")
    elif fmt == 'markdown':
        console.print(Markdown(text))
    else:
        console.print(text, markup=False, highlight=False)


def _resolve_factor_axis(value: str, records) -> Axis:
    if value.lower() != 'auto':
        return Axis.parse(value)
    for record in records:
        axis = axis_of_tag(record.variant_tag)
        if axis is not None:
            return axis
    raise UsageError("Не удалось определить ось: в записях нет вариантов FS/FO/FC/FP")


def cmd_report(config: RunConfig) -> int:
    """Считает метрики по записям и рендерит отчет"""
    if config.option_scores:
        table = compute_option_accuracy(read_option_scores(config.option_scores))
        _emit(render_option_table(table, config.report_format), config.report_format, config.output)
        return 0

    records = read_records(config.records)
    if not records:
        raise UsageError(f"В {config.records} нет записей")

    if config.factor_axis:
        table = compute_factor_table(records, _resolve_factor_axis(config.factor_axis, records))
        _emit(render_factor_table(table, config.report_format), config.report_format, config.output)
        return 0

    tasks = [TaskKind.parse(t).value for t in config.tasks] if config.tasks else None
    report = compute_metrics(records, tasks)
    for entry in report.missing:
        console.print(f"[yellow]⚠ {entry}[/yellow]")
    if report.rows:
        _emit(render_report(report, config.report_format, config.layout, config.group_by),
              config.report_format, config.output)
    else:
        console.print("[red]❌ Нет ни одной полной строки (нужны и чистые, и типографические записи)[/red]")
    return 1 if report.missing else 0


# mock-serve

def cmd_mock_serve(config: RunConfig) -> int:
    """HTTP mock-эндпоинт для манифеста"""
    manifest = read_manifest(config.manifest)
    server = make_server(MockModel.from_manifest(manifest, config.image_dir), config.host, config.port)
    host, port = server.server_address[:2]
    console.print(f"[green]✓ Mock-эндпоинт: http://{host}:{port}/v1[/green] (Ctrl+C для остановки)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        console.print("\n[yellow]Mock-эндпоинт остановлен[/yellow]")
    finally:
        server.server_close()
    return 0


# options

def cmd_options(config: RunConfig) -> int:
    """
    Наборы текстовых опций Set1/Set2 на каждый элемент манифеста.
    Чистый двойник получает надпись своего типографического элемента.
    """
    manifest = read_manifest(config.manifest)
    typo_by_base = {}
    for inst in manifest.typo_instances:
        typo_by_base.setdefault(inst.base.id, inst.typo_text)

    rows: List[Dict] = []
    for inst in manifest.typo_instances + manifest.clean_instances:
        typo = inst.typo_text if inst.on_typo else typo_by_base.get(inst.base.id)
        if typo is None:
            continue
        label = inst.base.ground_truth_text
        rows.append({
            'instance_id': inst.instance_id,
            'task': inst.base.task.value,
            'on_typo': inst.on_typo,
            'label': label,
            'typo': typo,
            'Set1': render_option_set('Set1', label, typo),
            'Set2': render_option_set('Set2', label, typo),
        })
    out_path = Path(config.output or DEFAULT_OUT / "options.jsonl")
    count = write_jsonl(out_path, rows)
    console.print(f"[green]✓ Опции: {count} элементов → {out_path}[/green]")
    return 0


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    'fixtures': cmd_fixtures,
    'generate': cmd_generate,
    'render': cmd_render,
    'eval': cmd_eval,
    'report': cmd_report,
    'mock-serve': cmd_mock_serve,
    'options': cmd_options,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help="YAML файл параметров запуска")
    common.add_argument('--env-file', help="путь к .env (по умолчанию ./.env)")
    common.add_argument('--seed', type=int, help="сид (по умолчанию 42 или TYPO_SEED)")
    common.add_argument('-v', '--verbose', action='store_true', default=None, help="подробный лог")

    parser = argparse.ArgumentParser(
        prog='typo_bench',
        description="Бенчмарк типографических атак на vision-language модели",
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('fixtures', parents=[common], help="синтетический корпус")
    p.add_argument('--out-dir')
    p.add_argument('--per-task', type=int)
    p.add_argument('--table1-scale', action='store_true', default=None,
                   help="растянуть до 500/190/380/500 элементов")
    p.add_argument('--font')

    p = sub.add_parser('generate', parents=[common], help="манифест Exploring или Fixing")
    p.add_argument('--corpus')
    p.add_argument('--manifest', help="куда записать манифест")
    p.add_argument('--axis', help="FS, FO, FC, FP или FIXED")
    p.add_argument('--scale-tag')
    p.add_argument('--scale', type=str.upper, choices=list(SCALE_SIZES),
                   help="растянуть корпус до размеров TypoD-B (1570) или TypoD-L (4×5000), без Arithmetic")
    p.add_argument('--wtypo', dest='include_wtypo', action='store_true', default=None,
                   help="добавить чистые WTYPO элементы в перебор")
    p.add_argument('--vocabulary', help="словарь классов Object, по строке")
    p.add_argument('--font')

    p = sub.add_parser('render', parents=[common], help="рендеринг PNG")
    p.add_argument('--manifest')
    p.add_argument('--image-dir')
    p.add_argument('--font')
    p.add_argument('--workers', type=int)

    p = sub.add_parser('eval', parents=[common], help="прогон через модель")
    p.add_argument('--manifest')
    p.add_argument('--image-dir')
    p.add_argument('--prompt', dest='prompt_id')
    p.add_argument('--single-turn', action='store_true', default=None)
    p.add_argument('--mock', action='store_true', default=None, help="встроенная mock-модель")
    p.add_argument('--base-url')
    p.add_argument('--model', dest='model_name')
    p.add_argument('--timeout', type=float)
    p.add_argument('--max-retries', type=int)
    p.add_argument('--max-in-flight', type=int)
    p.add_argument('--cache-dir')
    p.add_argument('--no-cache', action='store_true', default=None)
    p.add_argument('--records', help="куда записать записи JSONL")

    p = sub.add_parser('report', parents=[common], help="ACC / ACC- / GAP отчет")
    p.add_argument('--records')
    p.add_argument('--output')
    p.add_argument('--format', dest='report_format', choices=['markdown', 'csv'])
    p.add_argument('--layout', choices=['long', 'wide'])
    p.add_argument('--group-by', choices=['model', 'prompt'])
    p.add_argument('--factor-axis', help="FS, FO, FC, FP или auto: таблица по значениям фактора")
    p.add_argument('--tasks', help="список задач через запятую")
    p.add_argument('--option-scores', help="JSONL оценок CLIP по опциям Set1/Set2 вместо записей")

    p = sub.add_parser('mock-serve', parents=[common], help="HTTP mock-эндпоинт")
    p.add_argument('--manifest')
    p.add_argument('--image-dir')
    p.add_argument('--host')
    p.add_argument('--port', type=int)

    p = sub.add_parser('options', parents=[common], help="текстовые опции Set1/Set2")
    p.add_argument('--manifest')
    p.add_argument('--output')

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Точка входа, возвращает код выхода"""
    args = build_parser().parse_args(argv)
    setup_logging(bool(args.verbose), console)

    try:
        config = build_run_config(args.command, vars(args), args.config, args.env_file)
        config.validate()
        return COMMANDS[args.command](config)
    except KeyboardInterrupt:
        console.print("\n[yellow]Прервано пользователем[/yellow]")
        return 1
    except (ConfigError, UsageError) as e:
        console.print(f"[red]❌ {e}[/red]")
        return 2
    except TypoAttackError as e:
        console.print(f"[red]❌ {type(e).__name__}: {e}[/red]")
        return 1
    except Exception as e:
        console.print(f"\n[red]❌ Ошибка: {e}[/red]")
        console.print(traceback.format_exc())
        return 1
