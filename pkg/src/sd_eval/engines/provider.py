"""OpenAI-compatible chat-completions client with structured outputs.

Every exchange can be recorded to, and replayed from, a transcript
directory so runs are reproducible offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
import warnings
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import httpx

from ..errors import (
    ConfigurationError,
    InvalidNameError,
    ParseError,
    ProviderError,
    SchemaError,
    TranscriptMissingError,
    TransportError,
)
from ..graph import CausalMap, UndeclaredVariableWarning, normalize_name

log = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "SD_EVAL_API_KEY"
REASONING_EFFORTS = ("low", "medium", "high")

CAUSAL_MAP_SCHEMA: dict[str, Any] = {
    "type": "object",
    "properties": {
        "variables": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"name": {"type": "string"}},
                "required": ["name"],
                "additionalProperties": False,
            },
        },
        "relationships": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "from": {"type": "string", "description": "The cause variable."},
                    "to": {"type": "string", "description": "The effect variable."},
                    "polarity": {
                        "type": "string",
                        "enum": ["+", "-"],
                        "description": "+ if the effect moves with the cause, - if against it.",
                    },
                    "reasoning": {"type": "string"},
                },
                "required": ["from", "to", "polarity", "reasoning"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["variables", "relationships"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4o"
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout: float = 60.0
    max_retries: int = 3
    reasoning_effort: str | None = None
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    backoff_jitter: float = 0.1
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ConfigurationError("provider timeout must be positive")
        if self.max_retries < 0:
            raise ConfigurationError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ConfigurationError("max_in_flight must be >= 1")
        if self.reasoning_effort is not None and self.reasoning_effort not in REASONING_EFFORTS:
            raise ConfigurationError(f"reasoning_effort must be one of {REASONING_EFFORTS}")

    @property
    def label(self) -> str:
        return f"{self.model} {self.reasoning_effort}" if self.reasoning_effort else self.model

    def backoff_delay(self, attempt: int, rng: random.Random | None = None) -> float:
        jitter = (rng or random).uniform(0, self.backoff_jitter)
        return self.backoff_base * self.backoff_factor**attempt * (1 + jitter)

    def snapshot(self) -> dict[str, Any]:
        return {
            "base_url": self.base_url,
            "model": self.model,
            "api_key_env": self.api_key_env,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
            "reasoning_effort": self.reasoning_effort,
        }


_slots_lock = threading.Lock()
_slots: dict[str, threading.BoundedSemaphore] = {}


def _in_flight_slot(config: ProviderConfig) -> threading.BoundedSemaphore:
    with _slots_lock:
        if config.base_url not in _slots:
            _slots[config.base_url] = threading.BoundedSemaphore(config.max_in_flight)
        return _slots[config.base_url]


def build_payload(
    config: ProviderConfig, messages: Sequence[Mapping[str, str]], schema: Mapping[str, Any]
) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "model": config.model,
        "messages": [dict(m) for m in messages],
        "response_format": {
            "type": "json_schema",
            "json_schema": {"name": "causal_map", "strict": True, "schema": dict(schema)},
        },
    }
    if config.reasoning_effort:
        payload["reasoning_effort"] = config.reasoning_effort
    return payload


def request_hash(payload: Mapping[str, Any]) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class TranscriptStore:
    """One JSON file per exchange, named by the request hash."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)

    def path(self, digest: str) -> Path:
        return self.directory / f"{digest}.json"

    def load(self, digest: str) -> dict[str, Any]:
        path = self.path(digest)
        if not path.exists():
            raise TranscriptMissingError(digest, str(self.directory))
        return json.loads(path.read_text("utf-8"))

    def save(
        self, digest: str, payload: Mapping[str, Any], response_body: Mapping[str, Any]
    ) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        doc = {
            "request_hash": digest,
            "messages": payload["messages"],
            "response_body": response_body,
            "model": payload["model"],
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        path = self.path(digest)
        path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", "utf-8")
        return path


@dataclass(frozen=True)
class Completion:
    content: str
    usage: dict[str, int] | None
    body: dict[str, Any]


def _extract(body: Mapping[str, Any]) -> Completion:
    try:
        message = body["choices"][0]["message"]
    except (KeyError, IndexError, TypeError):
        raise ParseError("provider response has no choices[0].message") from None
    content = message.get("content")
    if not isinstance(content, str):
        refusal = message.get("refusal")
        raise ParseError(f"provider returned no content (refusal: {refusal!r})")
    usage = body.get("usage")
    if isinstance(usage, Mapping):
        usage = {k: v for k, v in usage.items() if isinstance(v, int)}
    else:
        usage = None
    return Completion(content, usage, dict(body))


class ProviderClient:
    """Issues exactly one chat-completion exchange per :meth:`complete` call."""

    def __init__(
        self,
        config: ProviderConfig,
        *,
        transport: httpx.BaseTransport | None = None,
        replay_dir: str | Path | None = None,
        record_dir: str | Path | None = None,
        sleep: Callable[[float], None] = time.sleep,
        env: Mapping[str, str] | None = None,
    ) -> None:
        self.config = config
        self.transport = transport
        self.replay = TranscriptStore(replay_dir) if replay_dir else None
        self.record = TranscriptStore(record_dir) if record_dir else None
        self.sleep = sleep
        self.env = os.environ if env is None else env

    def api_key(self) -> str:
        key = self.env.get(self.config.api_key_env)
        if not key:
            raise ConfigurationError(
                f"environment variable {self.config.api_key_env} is not set; "
                "it must hold the provider API key"
            )
        return key

    def complete(
        self, messages: Sequence[Mapping[str, str]], schema: Mapping[str, Any] = CAUSAL_MAP_SCHEMA
    ) -> Completion:
        payload = build_payload(self.config, messages, schema)
        digest = request_hash(payload)
        if self.replay is not None:
            return _extract(self.replay.load(digest)["response_body"])

        key = self.api_key()
        with _in_flight_slot(self.config):
            body = self._post_with_retries(payload, key)
        completion = _extract(body)
        if self.record is not None:
            self.record.save(digest, payload, body)
        return completion

    def _post_with_retries(self, payload: dict[str, Any], key: str) -> dict[str, Any]:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        headers = {"Authorization": f"Bearer {key}"}
        attempts = self.config.max_retries + 1
        last = ""
        with httpx.Client(transport=self.transport, timeout=self.config.timeout) as http:
            for attempt in range(attempts):
                try:
                    response = http.post(url, json=payload, headers=headers)
                except httpx.TimeoutException:
                    last = f"timed out after {self.config.timeout}s"
                except httpx.TransportError as exc:
                    last = f"{type(exc).__name__}: {exc}"
                else:
                    status = response.status_code
                    if status < 400:
                        try:
                            return response.json()
                        except ValueError:
                            raise ParseError("provider response body is not JSON") from None
                    if status != 429 and status < 500:
                        raise ProviderError(status, response.text)
                    last = f"HTTP {status}"
                if attempt + 1 < attempts:
                    delay = self.config.backoff_delay(attempt)
                    log.warning("provider attempt %d failed (%s); retrying in %.2fs", attempt + 1, last, delay)
                    self.sleep(delay)
        raise TransportError(f"provider request failed after {attempts} attempt(s): {last}")


def llm_generate(
    provider: ProviderConfig,
    messages: Sequence[Mapping[str, str]],
    schema: Mapping[str, Any] = CAUSAL_MAP_SCHEMA,
    **client_options: Any,
) -> str:
    """Send one structured-output request and return the reply content verbatim."""
    return ProviderClient(provider, **client_options).complete(messages, schema).content


def parse_structured_map(raw: str) -> CausalMap:
    """Parse a wire-form map, repairing undeclared variables and merging duplicates."""
    try:
        doc = json.loads(raw)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"model output is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("model output must be a JSON object")
    variables = doc.get("variables", [])
    relationships = doc.get("relationships")
    if not isinstance(relationships, list) or not isinstance(variables, list):
        raise SchemaError("'variables' and 'relationships' must be arrays")

    names = []
    for entry in variables:
        if not isinstance(entry, dict) or not isinstance(entry.get("name"), str):
            raise SchemaError(f"variable entry must be an object with a string name: {entry!r}")
        names.append(entry["name"])
    declared = set()
    for name in names:
        try:
            declared.add(normalize_name(name))
        except InvalidNameError as exc:
            raise SchemaError(str(exc)) from None

    triples = []
    for entry in relationships:
        if not isinstance(entry, dict):
            raise SchemaError(f"relationship entry must be an object: {entry!r}")
        source, target = entry.get("from"), entry.get("to")
        polarity = entry.get("polarity")
        if not isinstance(source, str) or not isinstance(target, str):
            raise SchemaError(f"relationship needs string 'from' and 'to': {entry!r}")
        if polarity not in ("+", "-"):
            raise SchemaError(f"polarity must be '+' or '-', got {polarity!r}")
        reasoning = entry.get("reasoning")
        try:
            endpoints = (normalize_name(source), normalize_name(target))
        except InvalidNameError as exc:
            raise SchemaError(str(exc)) from None
        for raw_name, name in zip((source, target), endpoints):
            if name not in declared:
                warnings.warn(
                    f"relationship references undeclared variable {raw_name!r}; adding it",
                    UndeclaredVariableWarning,
                    stacklevel=2,
                )
                declared.add(name)
        triples.append((source, target, polarity, reasoning if isinstance(reasoning, str) else None))
    return CausalMap.build(triples, names)
