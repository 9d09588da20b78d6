"""
Teacher Client
Connects the annotation pipeline to a teacher: a hosted chat-completion
endpoint or the deterministic mock. Responses are cached on disk by prompt
hash; transient failures are retried with exponential backoff.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Tuple

import requests
from dotenv import load_dotenv
from tqdm import tqdm

from modules.artifacts import atomic_write_text
from modules.schema import AdeError, AllRetriesExhausted, ConfigError, Sentence, TeacherResponse
from modules.teacher import NoiseConfig, PromptMode, build_prompt, mock_teacher, parse_response

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"
DEFAULT_MODEL = "gpt-3.5-turbo"


class TransientTeacherError(AdeError):
    """Rate limits, server errors, timeouts: worth retrying"""


class PermanentTeacherError(AdeError):
    """Bad request, auth failure, unreadable reply: retrying will not help"""


class TeacherClient(Protocol):
    model_name: str

    def complete(self, prompt: str) -> str:
        ...


# -----------------------
# Hosted teacher
# -----------------------
class HttpTeacherClient:
    """
    Chat-completion client speaking the common JSON-over-HTTP shape.

    Args:
        endpoint: Full URL of the chat-completions route
        api_key: Bearer token
        model: Model name sent with each request
        timeout: Per-request timeout in seconds
    """

    def __init__(self, endpoint: str, api_key: str, model: str = DEFAULT_MODEL,
                 timeout: float = 60.0, temperature: float = 0.0):
        self.endpoint = endpoint
        self.model_name = model
        self.timeout = timeout
        self.temperature = temperature
        self._session = requests.Session()
        self._session.headers.update({
            "Authorization": f"Bearer {api_key}",
            "Content-Type": "application/json",
        })

    def complete(self, prompt: str) -> str:
        payload = {
            "model": self.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        try:
            response = self._session.post(self.endpoint, data=json.dumps(payload), timeout=self.timeout)
        except (requests.ConnectionError, requests.Timeout) as e:
            raise TransientTeacherError(str(e)) from e

        if response.status_code == 429 or response.status_code >= 500:
            raise TransientTeacherError(f"HTTP {response.status_code}")
        if response.status_code >= 400:
            raise PermanentTeacherError(f"HTTP {response.status_code}: {response.text[:200]}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise PermanentTeacherError(f"unreadable teacher reply: {e}") from e


# -----------------------
# Mock teacher
# -----------------------
class MockTeacherClient:
    """
    Answers prompts from gold annotations through mock_teacher().

    Args:
        gold_index: sentence text -> (Sentence, gold annotations)
        noise: Noise model applied to the gold answers
    """

    def __init__(self, gold_index: Dict[str, Tuple[Sentence, list]], noise: NoiseConfig,
                 model_name: str = "mock-teacher"):
        self.gold_index = gold_index
        self.noise = noise
        self.model_name = f"{model_name}:{noise.drop_rate},{noise.spurious_rate},{noise.jitter_rate},{noise.seed}"
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.calls += 1
        _, _, message = prompt.rpartition("Message: ")
        if message not in self.gold_index:
            return "None"
        sentence, gold = self.gold_index[message]
        return mock_teacher(sentence, gold, self.noise).raw


def build_gold_index(sentences: Sequence[Sentence], gold_by_key: dict) -> Dict[str, Tuple[Sentence, list]]:
    index = {}
    for sentence in sentences:
        index.setdefault(sentence.text, (sentence, gold_by_key.get(sentence.key, [])))
    return index


# -----------------------
# Response cache
# -----------------------
def cache_key(prompt: str, mode: PromptMode, model_name: str) -> str:
    material = f"{prompt}\x00{PromptMode(mode).value}\x00{model_name}"
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


class ResponseCache:
    """Content-addressed response files; one writer at a time, lock-free reads"""

    def __init__(self, directory: str):
        self.directory = directory
        os.makedirs(directory, exist_ok=True)
        self._write_lock = threading.Lock()

    def _path(self, key: str) -> str:
        return os.path.join(self.directory, f"{key}.json")

    def get(self, key: str) -> Optional[str]:
        path = self._path(key)
        if not os.path.exists(path):
            return None
        try:
            with open(path, "r", encoding="utf-8") as f:
                return json.load(f)["raw"]
        except (ValueError, KeyError, OSError):
            logger.warning("Ignoring unreadable cache entry %s", path)
            return None

    def put(self, key: str, raw: str) -> None:
        with self._write_lock:
            atomic_write_text(self._path(key), json.dumps({"raw": raw}, ensure_ascii=False))


# -----------------------
# Annotation run
# -----------------------
@dataclass
class AnnotationRun:
    responses: List[TeacherResponse] = field(default_factory=list)
    failures: List[AllRetriesExhausted] = field(default_factory=list)
    calls: int = 0
    cache_hits: int = 0


def annotate(sents: Sequence[Sentence], client: TeacherClient, mode: PromptMode,
             max_parallel: int = 4, max_retries: int = 3, cache: Optional[ResponseCache] = None,
             backoff_base: float = 0.5, sleep: Callable[[float], None] = time.sleep,
             progress: bool = False) -> AnnotationRun:
    """
    Ask the teacher about every sentence.

    Args:
        sents: Sentences to annotate
        client: Hosted or mock teacher
        mode: Prompt mode
        max_parallel: Maximum requests in flight
        max_retries: Retries after the first attempt for transient failures
        cache: Optional on-disk response cache
        backoff_base: First backoff delay in seconds, doubled per retry

    Returns:
        AnnotationRun with one response per successful sentence (input order)
        and one failure record per sentence that could not be annotated
    """
    run = AnnotationRun()
    counter_lock = threading.Lock()

    def _one(sentence: Sentence):
        prompt = build_prompt(sentence.text, mode)
        key = cache_key(prompt, mode, client.model_name)
        if cache is not None:
            raw = cache.get(key)
            if raw is not None:
                with counter_lock:
                    run.cache_hits += 1
                return TeacherResponse(sentence.key, raw, parse_response(raw)), None

        last_error = ""
        for attempt in range(max_retries + 1):
            with counter_lock:
                run.calls += 1
            try:
                raw = client.complete(prompt)
            except TransientTeacherError as e:
                last_error = str(e)
                logger.debug("Sentence %s: attempt %d failed: %s", sentence.key, attempt + 1, e)
                if attempt < max_retries:
                    sleep(backoff_base * (2 ** attempt))
                continue
            except PermanentTeacherError as e:
                last_error = str(e)
                break
            if cache is not None:
                cache.put(key, raw)
            return TeacherResponse(sentence.key, raw, parse_response(raw)), None

        logger.error("Sentence %s: teacher failed: %s", sentence.key, last_error)
        return None, AllRetriesExhausted(sentence.key, last_error)

    with ThreadPoolExecutor(max_workers=max(1, max_parallel)) as pool:
        results = pool.map(_one, sents)
        for response, failure in tqdm(results, total=len(sents), desc="annotate", disable=not progress):
            if response is not None:
                run.responses.append(response)
            else:
                run.failures.append(failure)
    return run


def get_teacher_client(kind: str, endpoint: Optional[str] = None, model: Optional[str] = None,
                       gold_index: Optional[dict] = None, noise: Optional[NoiseConfig] = None) -> TeacherClient:
    """
    Build the configured teacher client.

    Raises:
        ConfigError: real teacher requested without TEACHER_API_KEY, or mock
            teacher requested without gold annotations
    """
    if kind == "real":
        api_key = os.getenv("TEACHER_API_KEY")
        if not api_key:
            raise ConfigError("TEACHER_API_KEY not set in environment or .env file")
        return HttpTeacherClient(
            endpoint=os.getenv("TEACHER_ENDPOINT") or endpoint or DEFAULT_ENDPOINT,
            api_key=api_key,
            model=os.getenv("TEACHER_MODEL") or model or DEFAULT_MODEL,
        )
    if kind == "mock":
        if gold_index is None:
            raise ConfigError("mock teacher needs gold annotations (paths.gold)")
        return MockTeacherClient(gold_index, noise or NoiseConfig())
    raise ConfigError(f"unknown teacher kind {kind!r}")
