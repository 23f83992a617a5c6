"""
Модуль оценки: прогон манифеста через OpenAI-совместимый vision-chat эндпоинт
с ограничением параллельности, повторами, кэшем ответов и разбором буквы ответа
"""
import base64
import json
import logging
import re
import threading
import time
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import requests

from typoattack.dataset_builder import DatasetManifest, TypoInstance
from typoattack.errors import (
    ConfigError, CorpusFormatError, EndpointUnreachable, ImagesNotMaterialized, RequestFailed,
)
from typoattack.prompt_lib import PromptCatalog, default_catalog, render_turns
from typoattack.utils import atomic_write_bytes, iter_jsonl, json_line, sha256_bytes, write_jsonl
from typoattack.validator import validate_max_retries, validate_model_name, validate_timeout, validate_url

logger = logging.getLogger(__name__)

TEMPERATURE_DEFAULT_LABEL = "endpoint-default"

# Буква варианта: (b) | b. b) b: | отдельная заглавная B
_LETTER_PATTERN = re.compile(
    r"\(\s*([A-Za-z])\s*\)"
    r"|(?<![\w'])([A-Za-z])(?=[.):](?!\w))"
    r"|(?<![\w'])([A-Z])(?![\w'])"
)

# Буква после подсказки: "answer: b", "option b", "the answer is b", "it is b."
_CUE_PATTERN = re.compile(
    r"\b(?:answer|option|choice)\b(?:\s+is)?\s*[:\-]?\s*\(?([A-Za-z])(?![\w'])"
    r"|\bis\s+\(?([A-Za-z])\)?(?=\s*(?:[.!,;]|$))"
    r"|:\s*\(?([A-Za-z])\)?(?=\s*(?:[.!,;]|$))",
    re.IGNORECASE,
)


@dataclass
class ModelEndpoint:
    """Настройки эндпоинта модели. Токен не попадает в repr и логи."""
    base_url: str
    model_name: str
    auth_token: Optional[str] = field(default=None, repr=False)
    timeout: float = 60.0
    max_retries: int = 2
    temperature: Optional[float] = 0.0
    retry_backoff: float = 1.0

    def validate(self) -> None:
        errors = []
        for is_valid, message in (
            validate_url(self.base_url),
            validate_model_name(self.model_name),
            validate_timeout(self.timeout),
            validate_max_retries(self.max_retries),
        ):
            if not is_valid:
                errors.append(message)
        if errors:
            raise ConfigError("; ".join(errors))

    @property
    def chat_url(self) -> str:
        return f"{self.base_url.rstrip('/')}/chat/completions"


@dataclass
class EvalRecord:
    """Результат одного элемента манифеста"""
    instance_id: str
    prompt_id: str
    model_name: str
    on_typo: bool
    raw_response: str
    parsed_letter: Optional[str]
    correct: bool
    latency_ms: int
    cache_hit: bool
    task: str = ""
    variant_tag: str = ""
    ground_truth_letter: str = ""
    error: Optional[str] = None

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> "EvalRecord":
        record = cls(**{key: data[key] for key in cls.__dataclass_fields__ if key in data})
        if record.parsed_letter is None and record.correct:
            raise ValueError("correct=true при пустом parsed_letter")
        return record


# Разбор ответа

def parse_answer(raw: str, choices: Sequence[Tuple[str, str]]) -> Optional[str]:
    """
    Буква после подсказки ("answer", "option", "is", ":") в любом регистре;
    иначе первая отдельно стоящая буква варианта; иначе единственный вариант,
    чей текст встречается в ответе; иначе None.

    Строчная "a" без подсказки считается артиклем.
    """
    if not raw or not choices:
        return None
    letters = {letter.upper() for letter, _ in choices}

    stripped = raw.strip()
    if len(stripped) == 1 and stripped.upper() in letters:
        return stripped.upper()

    for pattern in (_CUE_PATTERN, _LETTER_PATTERN):
        for match in pattern.finditer(raw):
            letter = next(group for group in match.groups() if group).upper()
            if letter in letters:
                return letter

    text = raw.casefold()
    found = [letter.upper() for letter, choice in choices if choice.strip() and choice.strip().casefold() in text]
    if len(found) == 1:
        return found[0]
    return None


# Сообщения и транспорт

def image_data_url(image_bytes: bytes, mime: str = "image/png") -> str:
    encoded = base64.b64encode(image_bytes).decode('ascii')
    return f"data:{mime};base64,{encoded}"


def user_message(text: str, image_bytes: Optional[bytes] = None) -> Dict:
    """Сообщение пользователя; картинка идет только в первом ходе"""
    if image_bytes is None:
        return {'role': 'user', 'content': text}
    return {
        'role': 'user',
        'content': [
            {'type': 'text', 'text': text},
            {'type': 'image_url', 'image_url': {'url': image_data_url(image_bytes)}},
        ],
    }


class ChatClient:
    """
    Клиент OpenAI-совместимого /chat/completions поверх requests.Session.
    Потокобезопасен: счетчик запросов и флаг температуры под замком.
    """

    def __init__(self, endpoint: ModelEndpoint, session: Optional[requests.Session] = None):
        endpoint.validate()
        self.endpoint = endpoint
        self.session = session or requests.Session()
        self._lock = threading.Lock()
        self._send_temperature = endpoint.temperature is not None
        self.request_count = 0

    @property
    def model_name(self) -> str:
        return self.endpoint.model_name

    @property
    def temperature_setting(self) -> str:
        if self._send_temperature:
            return str(self.endpoint.temperature)
        return TEMPERATURE_DEFAULT_LABEL

    def _headers(self) -> Dict[str, str]:
        headers = {'Content-Type': 'application/json'}
        if self.endpoint.auth_token:
            headers['Authorization'] = f"Bearer {self.endpoint.auth_token}"
        return headers

    def _payload(self, messages: List[Dict]) -> Dict:
        payload = {'model': self.endpoint.model_name, 'messages': messages}
        if self._send_temperature:
            payload['temperature'] = self.endpoint.temperature
        return payload

    def _rejects_temperature(self, response) -> bool:
        return (
            self._send_temperature
            and response.status_code in (400, 422)
            and 'temperature' in (response.text or '').lower()
        )

    def complete(self, messages: List[Dict]) -> str:
        """
        Один логический вызов модели с повторами

        Raises:
            EndpointUnreachable: соединение не установлено после всех попыток
            RequestFailed: 5xx, таймаут или неверный ответ после всех попыток
        """
        attempts = 1 + self.endpoint.max_retries
        last_error = "нет попыток"
        for attempt in range(attempts):
            if attempt and self.endpoint.retry_backoff > 0:
                time.sleep(self.endpoint.retry_backoff * (2 ** (attempt - 1)))

            with self._lock:
                self.request_count += 1
            try:
                response = self.session.post(
                    self.endpoint.chat_url,
                    json=self._payload(messages),
                    headers=self._headers(),
                    timeout=self.endpoint.timeout,
                )
            except requests.ConnectionError as e:
                last_error = f"соединение: {e}"
                logger.debug("Попытка %d/%d: %s", attempt + 1, attempts, last_error)
                if attempt == attempts - 1:
                    raise EndpointUnreachable(
                        f"Эндпоинт {self.endpoint.base_url} недоступен: {e}"
                    ) from e
                continue
            except requests.Timeout as e:
                last_error = f"таймаут {self.endpoint.timeout}s"
                logger.debug("Попытка %d/%d: %s", attempt + 1, attempts, e)
                continue

            if self._rejects_temperature(response):
                with self._lock:
                    self._send_temperature = False
                logger.warning("Эндпоинт отклонил temperature, дальше используем его настройки по умолчанию")
                last_error = f"HTTP {response.status_code}: temperature отклонен"
                continue

            if response.status_code >= 500 or response.status_code == 429:
                last_error = f"HTTP {response.status_code}"
                logger.debug("Попытка %d/%d: %s", attempt + 1, attempts, last_error)
                continue
            if response.status_code >= 400:
                raise RequestFailed(f"HTTP {response.status_code}: {(response.text or '')[:200]}")

            try:
                return response.json()['choices'][0]['message']['content'] or ""
            except (ValueError, KeyError, IndexError, TypeError) as e:
                last_error = f"неверный ответ эндпоинта ({e})"
                logger.debug("Попытка %d/%d: %s", attempt + 1, attempts, last_error)
                continue

        raise RequestFailed(f"{last_error} после {attempts} попыток")


# Кэш

def cache_key(image_bytes: bytes, turns: Sequence[str], model_name: str) -> str:
    """Ключ кэша: байты изображения, полный отрендеренный промпт, модель"""
    prompt = "\n---TURN---\n".join(turns)
    return sha256_bytes(image_bytes + b"\0" + prompt.encode('utf-8') + b"\0" + model_name.encode('utf-8'))


class ResponseCache:
    """Один JSON файл на ключ, запись через временный файл и rename"""

    def __init__(self, cache_dir: Union[str, Path]):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.cache_dir / f"{key}.json"

    def get(self, key: str) -> Optional[Dict]:
        path = self._path(key)
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding='utf-8'))
        except (OSError, ValueError) as e:
            logger.warning("Поврежденная запись кэша %s: %s", path.name, e)
            return None

    def put(self, key: str, value: Dict) -> None:
        atomic_write_bytes(self._path(key), json_line(value).encode('utf-8'))


# Прогон манифеста

def instance_image_path(manifest: DatasetManifest, instance: TypoInstance,
                        image_dir: Union[str, Path, None]) -> Optional[Path]:
    """Типографические картинки лежат в image_dir, чистые берутся из корпуса"""
    if instance.on_typo:
        return Path(image_dir) / f"{instance.instance_id}.png" if image_dir else None
    return manifest.resolve_base_image(instance.base)


def _check_images(manifest: DatasetManifest, image_dir) -> List[Path]:
    paths = []
    missing = []
    for inst in manifest.instances:
        path = instance_image_path(manifest, inst, image_dir)
        if path is None or not path.is_file():
            missing.append(inst.instance_id)
        paths.append(path)
    if missing:
        preview = ", ".join(missing[:5])
        more = f" и еще {len(missing) - 5}" if len(missing) > 5 else ""
        raise ImagesNotMaterialized(
            f"Нет изображений для {len(missing)} элементов: {preview}{more}. Сначала выполните render"
        )
    return paths


def _evaluate_one(instance: TypoInstance, image_path: Path, prompt_id: str, client,
                  cache: Optional[ResponseCache], single_turn: bool,
                  catalog: PromptCatalog) -> EvalRecord:
    base = instance.base
    turns = render_turns(prompt_id, base.question, base.choices, single_turn, catalog)
    image_bytes = image_path.read_bytes()
    key = cache_key(image_bytes, turns, client.model_name)

    def make_record(raw: str, latency_ms: int, cache_hit: bool, error: Optional[str] = None) -> EvalRecord:
        letter = parse_answer(raw, base.choices) if error is None else None
        return EvalRecord(
            instance_id=instance.instance_id,
            prompt_id=prompt_id,
            model_name=client.model_name,
            on_typo=instance.on_typo,
            raw_response=raw,
            parsed_letter=letter,
            correct=letter is not None and letter == base.ground_truth_letter,
            latency_ms=latency_ms,
            cache_hit=cache_hit,
            task=base.task.value,
            variant_tag=instance.variant_tag,
            ground_truth_letter=base.ground_truth_letter,
            error=error,
        )

    if cache is not None:
        cached = cache.get(key)
        if cached is not None:
            return make_record(cached.get('raw_response', ''), 0, True)

    started = time.perf_counter()
    messages = [user_message(turns[0], image_bytes)]
    replies: List[str] = []
    try:
        for index, turn in enumerate(turns):
            if index:
                messages.append({'role': 'assistant', 'content': replies[-1]})
                messages.append(user_message(turn))
            replies.append(client.complete(messages))
    except RequestFailed as e:
        latency = int((time.perf_counter() - started) * 1000)
        logger.warning("%s: %s", instance.instance_id, e)
        return make_record("", latency, False, error=str(e))

    latency = int((time.perf_counter() - started) * 1000)
    if cache is not None:
        cache.put(key, {'raw_response': replies[-1], 'turn_replies': replies, 'model_name': client.model_name})
    return make_record(replies[-1], latency, False)


def evaluate_manifest(manifest: DatasetManifest, prompt_id: str,
                      endpoint: Optional[ModelEndpoint] = None, client=None,
                      max_in_flight: int = 4, cache_dir: Union[str, Path, None] = None,
                      image_dir: Union[str, Path, None] = None, single_turn: bool = False,
                      catalog: Optional[PromptCatalog] = None,
                      on_record: Optional[Callable[[EvalRecord], None]] = None) -> List[EvalRecord]:
    """
    Прогоняет манифест через модель

    Returns:
        Список EvalRecord в порядке манифеста
    """
    if not manifest.instances:
        return []
    if max_in_flight < 1:
        raise ConfigError("max_in_flight должен быть не меньше 1")
    catalog = catalog or default_catalog()
    catalog.get(prompt_id)

    paths = _check_images(manifest, image_dir)
    if client is None:
        if endpoint is None:
            raise ConfigError("Нужен endpoint или client")
        client = ChatClient(endpoint)
    cache = ResponseCache(cache_dir) if cache_dir else None

    results: List[Optional[EvalRecord]] = [None] * len(manifest.instances)
    logger.info("Оценка %d элементов, шаблон %s, модель %s, параллельно %d",
                len(results), prompt_id, client.model_name, max_in_flight)

    with ThreadPoolExecutor(max_workers=max_in_flight) as executor:
        futures = {
            executor.submit(_evaluate_one, inst, path, prompt_id, client, cache, single_turn, catalog): index
            for index, (inst, path) in enumerate(zip(manifest.instances, paths))
        }
        pending = set(futures)
        while pending:
            done, pending = wait(pending, return_when=FIRST_EXCEPTION)
            for future in done:
                error = future.exception()
                if error is not None:
                    for other in pending:
                        other.cancel()
                    raise error
                record = future.result()
                results[futures[future]] = record
                if on_record is not None:
                    on_record(record)

    return [record for record in results if record is not None]


def summarize_run(records: Sequence[EvalRecord], client, prompt_id: str) -> Dict:
    """JSON сводка запуска для консоли"""
    return {
        'prompt_id': prompt_id,
        'model_name': client.model_name,
        'records': len(records),
        'typo_records': sum(1 for r in records if r.on_typo),
        'clean_records': sum(1 for r in records if not r.on_typo),
        'cache_hits': sum(1 for r in records if r.cache_hit),
        'unparsed': sum(1 for r in records if r.parsed_letter is None),
        'soft_failures': sum(1 for r in records if r.error),
        'requests': client.request_count,
        'temperature': client.temperature_setting,
    }


def write_records(records: Sequence[EvalRecord], path: Union[str, Path]) -> int:
    """Пишет записи JSONL, одна запись на строку"""
    return write_jsonl(path, (record.to_dict() for record in records))


def read_records(path: Union[str, Path]) -> List[EvalRecord]:
    """Читает записи JSONL"""
    records = []
    try:
        for line_num, row in iter_jsonl(path):
            try:
                records.append(EvalRecord.from_dict(row))
            except (TypeError, ValueError) as e:
                raise CorpusFormatError(f"{path}:{line_num}: неверная запись ({e})") from e
    except json.JSONDecodeError as e:
        raise CorpusFormatError(f"{path}: неверный JSON ({e})") from e
    return records
