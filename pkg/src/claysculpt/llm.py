"""
Minimal chat-completion client with strict-JSON replies and bounded retry.

The endpoint is any OpenAI-compatible ``/chat/completions`` URL. Tests and
offline runs inject an ``httpx`` transport instead of touching the network.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Callable, Optional

import httpx

from .errors import BackendTransportError, InvalidArgument

logger = logging.getLogger(__name__)

DEFAULT_RETRIES = 3
CORRECTION = "Your reply was not valid. Reply again with ONLY the JSON object described above."


@dataclass
class LLMConfig:
    endpoint: str = "http://localhost:8000/v1/chat/completions"
    model: str = "gemini-1.5-pro"
    api_key_env: str = "CLAYSCULPT_LLM_API_KEY"
    temperature: float = 0.0
    retries: int = DEFAULT_RETRIES
    timeout: float = 60.0

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "LLMConfig":
        data = dict(data or {})
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidArgument(f"unknown llm config keys: {sorted(unknown)}")
        return cls(**data)


class ChatClient:
    def __init__(self, config: LLMConfig, transport: Optional[httpx.BaseTransport] = None):
        self.config = config
        headers = {}
        key = os.environ.get(config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._http = httpx.Client(transport=transport, timeout=config.timeout, headers=headers)

    def complete(self, messages: list) -> str:
        body = {
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
        }
        try:
            resp = self._http.post(self.config.endpoint, json=body)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise BackendTransportError(
                f"chat request to {self.config.endpoint} (model {self.config.model}) failed: {exc!r}"
            ) from exc
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            # a reply we cannot unwrap is treated like a malformed answer
            return resp.text


def extract_json(text: str) -> Any:
    """Parse a JSON object from a reply, tolerating a fenced code block."""
    text = text.strip()
    m = re.search(r"```(?:json)?\s*([\s\S]*?)```", text)
    if m:
        text = m.group(1).strip()
    return json.loads(text)


@dataclass
class JsonReply:
    value: Any = None
    ok: bool = False
    raw: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def retries(self) -> int:
        return max(0, len(self.raw) - 1)


def ask_json(client: ChatClient, messages: list, parse: Callable[[Any], Any], retries: int) -> JsonReply:
    """Query until ``parse`` accepts the decoded reply or retries run out.

    ``parse`` raises ``ValueError``/``KeyError``/``TypeError`` to reject a
    reply. Transport errors are not retried and propagate.
    """
    messages = list(messages)
    out = JsonReply()
    for attempt in range(retries + 1):
        raw = client.complete(messages)
        out.raw.append(raw)
        try:
            out.value = parse(extract_json(raw))
            out.ok = True
            return out
        except (ValueError, KeyError, TypeError, IndexError) as exc:
            out.errors.append(str(exc))
            logger.warning("rejected LLM reply (attempt %d/%d): %s", attempt + 1, retries + 1, exc)
            messages.append({"role": "assistant", "content": raw[:4000]})
            messages.append({"role": "user", "content": f"{CORRECTION} Problem: {exc}"})
    logger.warning("giving up after %d attempts", retries + 1)
    return out


def load_prompt(name: str) -> str:
    return resources.files("claysculpt.prompts").joinpath(name).read_text(encoding="utf-8")


def fill(template: str, **slots) -> str:
    for key, value in slots.items():
        template = template.replace("{" + key + "}", str(value))
    return template
