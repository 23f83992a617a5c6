"""
Модуль детерминированной mock-модели для офлайн прогонов.

На типографической картинке модель выбирает вариант, текст которого совпадает
с типографикой (без учета регистра), если такой есть, иначе правильный ответ.
На чистой картинке всегда правильный ответ. Картинки узнаются по SHA-256 байтов.
"""
import base64
import json
import logging
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Dict, List, Optional, Union

from typoattack.dataset_builder import DatasetManifest, TypoInstance
from typoattack.eval_harness import instance_image_path
from typoattack.errors import ImagesNotMaterialized
from typoattack.prompt_lib import PromptCatalog, default_catalog, format_choices
from typoattack.utils import sha256_bytes

logger = logging.getLogger(__name__)

MOCK_MODEL_NAME = "typo-mock"
DESCRIPTION_REPLY = "The image shows a simple synthetic scene with a few plain shapes on a flat background."
UNKNOWN_IMAGE_REPLY = "I cannot tell."


def expected_letter(instance: TypoInstance) -> str:
    """Ответ mock-модели для элемента манифеста"""
    base = instance.base
    if instance.on_typo:
        typo = instance.typo_text.strip().casefold()
        for letter, text in base.choices:
            if text.strip().casefold() == typo:
                return letter
    return base.ground_truth_letter


def _message_text(message: Dict) -> str:
    content = message.get('content')
    if isinstance(content, str):
        return content
    parts = []
    for part in content or []:
        if isinstance(part, dict) and part.get('type') == 'text':
            parts.append(part.get('text', ''))
    return "\n".join(parts)


def _message_image(message: Dict) -> Optional[bytes]:
    content = message.get('content')
    if not isinstance(content, list):
        return None
    for part in content:
        if isinstance(part, dict) and part.get('type') == 'image_url':
            url = (part.get('image_url') or {}).get('url', '')
            if url.startswith('data:') and ',' in url:
                return base64.b64decode(url.split(',', 1)[1])
    return None


class MockModel:
    """Индекс картинок манифеста и правило ответа"""

    def __init__(self, index: Dict[str, List[TypoInstance]], suffix: str, model_name: str = MOCK_MODEL_NAME):
        self.index = index
        self.suffix = suffix
        self.model_name = model_name

    @classmethod
    def from_manifest(cls, manifest: DatasetManifest, image_dir: Union[str, Path, None],
                      catalog: Optional[PromptCatalog] = None,
                      model_name: str = MOCK_MODEL_NAME) -> "MockModel":
        index: Dict[str, List[TypoInstance]] = {}
        for inst in manifest.instances:
            path = instance_image_path(manifest, inst, image_dir)
            if path is None or not path.is_file():
                raise ImagesNotMaterialized(f"Mock: нет изображения для {inst.instance_id}")
            index.setdefault(sha256_bytes(path.read_bytes()), []).append(inst)
        logger.info("Mock-модель: %d изображений, %d элементов", len(index), len(manifest.instances))
        return cls(index, (catalog or default_catalog()).suffix, model_name)

    def respond(self, messages: List[Dict]) -> str:
        """Ответ на диалог в формате chat completions"""
        image = None
        for message in messages:
            if message.get('role') == 'user':
                image = _message_image(message)
                if image is not None:
                    break
        user_texts = [_message_text(m) for m in messages if m.get('role') == 'user']
        last_text = user_texts[-1] if user_texts else ""

        if self.suffix not in last_text:
            return DESCRIPTION_REPLY
        if image is None:
            return UNKNOWN_IMAGE_REPLY

        candidates = self.index.get(sha256_bytes(image), [])
        matching = [
            inst for inst in candidates
            if inst.base.question in last_text and format_choices(inst.base.choices) in last_text
        ]
        if not matching:
            return UNKNOWN_IMAGE_REPLY
        return expected_letter(matching[0])


class MockChatClient:
    """Внутрипроцессный клиент с интерфейсом ChatClient"""

    def __init__(self, model: MockModel):
        self.model = model
        self._lock = threading.Lock()
        self.request_count = 0

    @property
    def model_name(self) -> str:
        return self.model.model_name

    @property
    def temperature_setting(self) -> str:
        return "0.0"

    def complete(self, messages: List[Dict]) -> str:
        with self._lock:
            self.request_count += 1
        return self.model.respond(messages)


def _completion_body(model: MockModel, content: str) -> Dict:
    return {
        'id': f"mock-{int(time.time() * 1000)}",
        'object': 'chat.completion',
        'created': int(time.time()),
        'model': model.model_name,
        'choices': [{
            'index': 0,
            'message': {'role': 'assistant', 'content': content},
            'finish_reason': 'stop',
        }],
    }


def make_handler(model: MockModel):
    """Класс обработчика HTTP для конкретной mock-модели"""

    class MockHandler(BaseHTTPRequestHandler):
        def _send_json(self, status: int, body: Dict) -> None:
            payload = json.dumps(body).encode('utf-8')
            self.send_response(status)
            self.send_header('Content-Type', 'application/json')
            self.send_header('Content-Length', str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def do_GET(self):
            if self.path.rstrip('/') in ('/v1/models', '/models'):
                self._send_json(200, {
                    'object': 'list',
                    'data': [{'id': model.model_name, 'object': 'model', 'owned_by': 'typoattack'}],
                })
            else:
                self._send_json(404, {'error': {'message': f"unknown path {self.path}"}})

        def do_POST(self):
            if self.path.rstrip('/') not in ('/v1/chat/completions', '/chat/completions'):
                self._send_json(404, {'error': {'message': f"unknown path {self.path}"}})
                return
            try:
                length = int(self.headers.get('Content-Length', 0))
                request = json.loads(self.rfile.read(length) or b'{}')
                messages = request['messages']
            except (ValueError, KeyError) as e:
                self._send_json(400, {'error': {'message': f"bad request: {e}"}})
                return
            self._send_json(200, _completion_body(model, model.respond(messages)))

        def log_message(self, format, *args):
            logger.debug("mock %s - %s", self.address_string(), format % args)

    return MockHandler


def make_server(model: MockModel, host: str = "127.0.0.1", port: int = 8000) -> ThreadingHTTPServer:
    """HTTP сервер с /v1/chat/completions и /v1/models (port=0 выбирает свободный)"""
    return ThreadingHTTPServer((host, port), make_handler(model))


@dataclass
class MockServerHandle:
    server: ThreadingHTTPServer
    thread: threading.Thread

    @property
    def base_url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}/v1"

    def stop(self) -> None:
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)


def start_background_server(model: MockModel, host: str = "127.0.0.1", port: int = 0) -> MockServerHandle:
    """Запускает сервер в фоновом потоке (для тестов и скриптов)"""
    server = make_server(model, host, port)
    thread = threading.Thread(target=server.serve_forever, name="typo-mock-server", daemon=True)
    thread.start()
    return MockServerHandle(server, thread)
