"""Model backends: a scripted mock for reproducible runs and a thin HTTP client."""

from __future__ import annotations

import json
import logging
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from ..errors import ConfigInvalid, MockResponseMissing
from .prompts import PromptRequest, TemplateKind, fingerprint, value_key

logger = logging.getLogger(__name__)


class TransportError(Exception):
    """A retryable failure talking to a backend."""


@dataclass(frozen=True)
class ModelResponse:
    raw_text: str
    input_tokens: int
    output_tokens: int
    latency: float
    backend_id: str
    fingerprint: str = ""
    truncated: bool = False

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")


def estimate_tokens(text: str) -> int:
    return len(text.split())


class MockBackend:
    """Answers from a directory of ``<fingerprint>.json`` files.

    Each file holds ``{"response": str, "input_tokens": int, "output_tokens": int}``
    plus optional ``"key"`` (a readable description) and ``"finish_reason"``.
    Unscripted token counts are estimated from whitespace-separated words.
    An unmatched fingerprint raises :class:`MockResponseMissing`.
    """

    backend_id = "mock"

    def __init__(self, directory):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise ConfigInvalid(f"mock directory not found: {directory}")
        self._scripts = {}
        for path in sorted(self.directory.glob("*.json")):
            try:
                self._scripts[path.stem] = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigInvalid(f"bad mock script {path.name}: {exc}") from exc

    def __len__(self) -> int:
        return len(self._scripts)

    def complete(self, request: PromptRequest) -> ModelResponse:
        fp = request.fingerprint
        script = self._scripts.get(fp)
        if script is None:
            raise MockResponseMissing(fp, f"{request.template.value} {request.bug} {request.function_id} {request.value_key}"
                                      + (f" retry {request.attempt}" if request.attempt else ""))
        text = script["response"]
        out_tokens = script.get("output_tokens", estimate_tokens(text))
        truncated = script.get("finish_reason") == "length" or out_tokens > request.decoding.max_output_tokens
        return ModelResponse(
            raw_text=text,
            input_tokens=script.get("input_tokens", estimate_tokens(request.rendered_text)),
            output_tokens=out_tokens,
            latency=0.0,
            backend_id=self.backend_id,
            fingerprint=fp,
            truncated=truncated,
        )


class MockScript:
    """Writes scripted answers into a mock directory."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.count = 0

    def _write(self, fp: str, key: str, response: str, input_tokens, output_tokens, finish_reason=None) -> str:
        body = {"key": key, "response": response}
        if input_tokens is not None:
            body["input_tokens"] = input_tokens
        if output_tokens is not None:
            body["output_tokens"] = output_tokens
        if finish_reason is not None:
            body["finish_reason"] = finish_reason
        (self.directory / f"{fp}.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
        self.count += 1
        return fp

    def analysis(self, bug: str, function_id: str, variable: str, file: str, line: int, response: str,
                 input_tokens=None, output_tokens=None, attempt: int = 0, finish_reason=None) -> str:
        key = value_key(variable, file, line)
        fp = fingerprint(TemplateKind.FUNCTION_ANALYSIS, bug, function_id, key, attempt)
        return self._write(fp, f"analysis {bug} {function_id} {key}" + (f" retry {attempt}" if attempt else ""),
                           response, input_tokens, output_tokens, finish_reason)

    def feasibility(self, bug: str, source_function_id: str, chain_key: str, response: str,
                    input_tokens=None, output_tokens=None) -> str:
        fp = fingerprint(TemplateKind.FEASIBILITY_VALIDATION, bug, source_function_id, chain_key)
        return self._write(fp, f"feasibility {bug} {chain_key}", response, input_tokens, output_tokens)


def _dig(data, path):
    for step in path:
        data = data[step]
    return data


# Provider adapters are data: request shape plus where to find the answer in the reply.
PROVIDERS = {
    "openai": {
        "headers": {"Authorization": "Bearer {key}"},
        "body": lambda model, prompt, dec: {
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": dec.temperature,
            "max_tokens": dec.max_output_tokens,
        },
        "text": ("choices", 0, "message", "content"),
        "input_tokens": ("usage", "prompt_tokens"),
        "output_tokens": ("usage", "completion_tokens"),
        "finish": ("choices", 0, "finish_reason"),
        "truncated": "length",
    },
    "anthropic": {
        "headers": {"x-api-key": "{key}", "anthropic-version": "2023-06-01"},
        "body": lambda model, prompt, dec: {
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": dec.temperature,
            "max_tokens": dec.max_output_tokens,
        },
        "text": ("content", 0, "text"),
        "input_tokens": ("usage", "input_tokens"),
        "output_tokens": ("usage", "output_tokens"),
        "finish": ("stop_reason",),
        "truncated": "max_tokens",
    },
}


class HttpBackend:
    """Chat-completion style HTTP backend; the API key is read from an environment variable."""

    def __init__(self, endpoint: str, model: str, provider: str = "openai",
                 api_key_env: str = "FLOWAUDIT_API_KEY", timeout: float = 120.0):
        if provider not in PROVIDERS:
            raise ConfigInvalid(f"unknown provider {provider!r}; choose from {sorted(PROVIDERS)}")
        self.endpoint = endpoint
        self.model = model
        self.provider = PROVIDERS[provider]
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.backend_id = f"{provider}:{model}"

    def complete(self, request: PromptRequest) -> ModelResponse:
        key = os.environ.get(self.api_key_env, "")
        headers = {"Content-Type": "application/json"}
        headers.update({k: v.format(key=key) for k, v in self.provider["headers"].items()})
        body = json.dumps(self.provider["body"](self.model, request.rendered_text, request.decoding)).encode()
        req = urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")
        start = time.monotonic()
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode())
        except urllib.error.HTTPError as exc:
            if exc.code == 429 or exc.code >= 500:
                raise TransportError(f"HTTP {exc.code}") from exc
            raise ConfigInvalid(f"backend rejected the request: HTTP {exc.code}") from exc
        except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
            raise TransportError(str(exc)) from exc
        latency = time.monotonic() - start
        try:
            text = _dig(payload, self.provider["text"])
            finish = _dig(payload, self.provider["finish"])
            in_tok = int(_dig(payload, self.provider["input_tokens"]))
            out_tok = int(_dig(payload, self.provider["output_tokens"]))
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response shape: {exc}") from exc
        return ModelResponse(
            raw_text=text or "",
            input_tokens=in_tok,
            output_tokens=out_tok,
            latency=latency,
            backend_id=self.backend_id,
            fingerprint=request.fingerprint,
            truncated=finish == self.provider["truncated"],
        )


def backend_from_options(mock_dir: Optional[str] = None, endpoint: Optional[str] = None,
                         model: Optional[str] = None, provider: str = "openai",
                         api_key_env: str = "FLOWAUDIT_API_KEY"):
    if mock_dir:
        return MockBackend(mock_dir)
    if endpoint and model:
        return HttpBackend(endpoint, model, provider, api_key_env)
    raise ConfigInvalid("configure either a mock directory or an endpoint and model")
