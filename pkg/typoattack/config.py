"""
Модуль конфигурации запуска.

Источники по возрастанию приоритета: встроенные значения по умолчанию,
.env и переменные окружения, YAML файл --config, флаги командной строки.
"""
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from dotenv import load_dotenv

from typoattack.errors import ConfigError
from typoattack.resource_checker import detect_hardware
from typoattack.validator import (
    validate_existing_path, validate_max_in_flight, validate_max_retries,
    validate_model_name, validate_prompt_id, validate_seed, validate_timeout, validate_url,
)

logger = logging.getLogger(__name__)

DEFAULT_SEED = 42

ENV_VARS = {
    'TYPO_BASE_URL': 'base_url',
    'TYPO_MODEL': 'model_name',
    'TYPO_API_TOKEN': 'api_token',
    'TYPO_FONT_PATH': 'font',
    'TYPO_SEED': 'seed',
    'TYPO_MAX_IN_FLIGHT': 'max_in_flight',
}

_INT_FIELDS = {'seed', 'max_in_flight', 'workers', 'max_retries', 'per_task', 'port'}
_FLOAT_FIELDS = {'timeout', 'retry_backoff'}
_BOOL_FIELDS = {'include_wtypo', 'single_turn', 'mock', 'no_cache', 'verbose', 'table1_scale'}

# Какие пути обязаны существовать для подкоманды
_REQUIRED_PATHS = {
    'generate': [('corpus', 'корпус')],
    'render': [('manifest', 'манифест')],
    'eval': [('manifest', 'манифест')],
    'report': [('records', 'записи оценки')],
    'mock-serve': [('manifest', 'манифест')],
    'options': [('manifest', 'манифест')],
}


@dataclass
class RunConfig:
    """Все параметры одного запуска CLI"""
    command: str = ""
    # пути
    corpus: Optional[str] = None
    manifest: Optional[str] = None
    image_dir: str = "out/images"
    cache_dir: Optional[str] = "out/cache"
    records: Optional[str] = None
    option_scores: Optional[str] = None
    output: Optional[str] = None
    vocabulary: Optional[str] = None
    out_dir: str = "fixtures"
    # генерация
    seed: int = DEFAULT_SEED
    axis: str = "FIXED"
    scale_tag: str = "B"
    scale: Optional[str] = None
    include_wtypo: bool = False
    font: str = "default"
    per_task: int = 4
    table1_scale: bool = False
    # оценка
    prompt_id: str = "BASE"
    single_turn: bool = False
    mock: bool = False
    no_cache: bool = False
    base_url: str = "http://localhost:8000/v1"
    model_name: str = "llava-v1.5-13b"
    api_token: Optional[str] = field(default=None, repr=False)
    timeout: float = 60.0
    max_retries: int = 2
    retry_backoff: float = 1.0
    max_in_flight: int = 4
    workers: int = 2
    # отчет
    report_format: str = "markdown"
    layout: str = "long"
    group_by: str = "model"
    factor_axis: Optional[str] = None
    tasks: Optional[List[str]] = None
    # mock-serve
    host: str = "127.0.0.1"
    port: int = 8000
    verbose: bool = False

    def validate(self) -> None:
        """Собирает все ошибки валидации и бросает одну ConfigError"""
        from typoattack.prompt_lib import list_templates

        errors = []
        checks = [
            validate_seed(self.seed),
            validate_max_in_flight(self.max_in_flight),
            validate_max_in_flight(self.workers),
            validate_max_retries(self.max_retries),
            validate_timeout(self.timeout),
        ]
        if self.command == 'eval':
            checks.append(validate_prompt_id(self.prompt_id, list_templates()))
            if not self.mock:
                checks.append(validate_url(self.base_url))
                checks.append(validate_model_name(self.model_name))
        if self.command == 'generate' and self.scale is not None:
            from typoattack.fixtures import SCALE_SIZES

            if self.scale.upper() not in SCALE_SIZES:
                errors.append(f"Масштаб {self.scale!r} неизвестен, доступны: {', '.join(SCALE_SIZES)}")
        required = _REQUIRED_PATHS.get(self.command, [])
        if self.command == 'report' and self.option_scores:
            required = [('option_scores', 'оценки текстовых опций')]
        for attr, label in required:
            checks.append(validate_existing_path(getattr(self, attr), label))

        for is_valid, message in checks:
            if not is_valid:
                errors.append(message)
        if errors:
            raise ConfigError("\n".join(errors))

    def to_public_dict(self) -> Dict[str, Any]:
        """Конфигурация для сводки, без токена"""
        data = asdict(self)
        data['api_token'] = '***' if self.api_token else None
        return data

    def endpoint(self):
        from typoattack.eval_harness import ModelEndpoint

        return ModelEndpoint(
            base_url=self.base_url,
            model_name=self.model_name,
            auth_token=self.api_token,
            timeout=self.timeout,
            max_retries=self.max_retries,
            retry_backoff=self.retry_backoff,
        )


def adapt_defaults_for_hardware(hardware: Dict) -> Dict[str, int]:
    """
    Параллельность по умолчанию от числа логических ядер

    Returns:
        {'workers': ..., 'max_in_flight': ...}
    """
    threads = hardware['cpu']['threads']
    return {
        'workers': max(1, min(8, threads - 1)),
        'max_in_flight': max(2, min(16, threads * 2)),
    }


def _coerce(key: str, value: Any) -> Any:
    if value is None:
        return None
    try:
        if key in _INT_FIELDS:
            return int(value)
        if key in _FLOAT_FIELDS:
            return float(value)
        if key in _BOOL_FIELDS:
            if isinstance(value, str):
                return value.strip().lower() in ('1', 'true', 'yes', 'on')
            return bool(value)
        if key == 'tasks' and isinstance(value, str):
            return [t.strip() for t in value.split(',') if t.strip()]
    except (TypeError, ValueError):
        raise ConfigError(f"Неверное значение {key}: {value!r}") from None
    return value


def env_overrides(env_file: Optional[str] = None) -> Dict[str, Any]:
    """Читает .env (без перезаписи окружения) и переменные TYPO_*"""
    load_dotenv(env_file or Path.cwd() / '.env', override=False)
    values = {}
    for env_name, key in ENV_VARS.items():
        raw = os.getenv(env_name)
        if raw:
            values[key] = _coerce(key, raw)
    return values


def load_yaml_config(path: str) -> Dict[str, Any]:
    """YAML файл запуска: плоский словарь с именами полей RunConfig"""
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"Файл конфигурации не найден: {config_path}")
    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{config_path}: неверный YAML ({e})") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{config_path}: ожидается словарь параметров")

    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{config_path}: неизвестные параметры {', '.join(unknown)}")
    return {key: _coerce(key, value) for key, value in data.items()}


def build_run_config(command: str, cli_values: Dict[str, Any], config_path: Optional[str] = None,
                     env_file: Optional[str] = None, hardware: Optional[Dict] = None) -> RunConfig:
    """
    Собирает RunConfig по слоям. Значения None во флагах означают
    'не задано' и не перекрывают нижние слои.
    """
    values: Dict[str, Any] = adapt_defaults_for_hardware(hardware or detect_hardware())
    values.update(env_overrides(env_file))
    if config_path:
        values.update(load_yaml_config(config_path))

    known = {f.name for f in fields(RunConfig)}
    for key, value in cli_values.items():
        if key in known and value is not None:
            values[key] = _coerce(key, value)

    values['command'] = command
    config = RunConfig(**values)
    logger.debug("Конфигурация: %s", config.to_public_dict())
    return config
