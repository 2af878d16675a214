"""HTTP transport for a generic chat-completion endpoint.

Configured entirely through environment variables (or constructor arguments);
no vendor-specific assumptions beyond the common chat-completions JSON shape.
"""

from __future__ import annotations

import os
import time
from typing import Any, Mapping

import requests

from ..errors import EngineError, ValidationError
from .types import EngineRequest, EngineResponse, estimate_tokens

ENV_BASE_URL = "FEATGEO_ENGINE_BASE_URL"
ENV_MODEL = "FEATGEO_ENGINE_MODEL"
ENV_API_KEY = "FEATGEO_ENGINE_API_KEY"
ENV_CACHE_DIR = "FEATGEO_CACHE_DIR"

_TEMPERATURES = {"deterministic": 0.0, "balanced": 0.4, "creative": 0.8}


class ChatCompletionBackend:
    """POSTs each request to ``<base_url>/chat/completions``."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str = "",
        session: requests.Session | None = None,
        timeout: float = 120.0,
    ):
        if not base_url or not model:
            raise ValidationError("live engine backend requires a base URL and model id")
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.session = session or requests.Session()
        self.timeout = timeout

    @classmethod
    def from_env(cls) -> "ChatCompletionBackend":
        base_url = os.environ.get(ENV_BASE_URL, "")
        model = os.environ.get(ENV_MODEL, "")
        if not base_url or not model:
            raise ValidationError(
                f"live backend needs {ENV_BASE_URL} and {ENV_MODEL} set in the environment"
            )
        return cls(base_url, model, api_key=os.environ.get(ENV_API_KEY, ""))

    def complete(self, request: EngineRequest) -> EngineResponse:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": _TEMPERATURES.get(request.temperature_tag, 0.4),
        }
        started = time.perf_counter()
        try:
            resp = self.session.post(
                f"{self.base_url}/chat/completions", json=body, headers=headers, timeout=self.timeout
            )
            resp.raise_for_status()
            data: Mapping[str, Any] = resp.json()
        except requests.RequestException as exc:
            raise EngineError(f"engine HTTP request failed: {exc}") from exc
        elapsed = time.perf_counter() - started
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise EngineError(f"unexpected engine response shape: {data!r}") from exc
        usage = data.get("usage") or {}
        if "prompt_tokens" in usage and "completion_tokens" in usage:
            return EngineResponse(
                text=text,
                prompt_tokens=int(usage["prompt_tokens"]),
                completion_tokens=int(usage["completion_tokens"]),
                usage_estimated=False,
                elapsed_seconds=elapsed,
            )
        return EngineResponse(
            text=text,
            prompt_tokens=estimate_tokens(request.prompt),
            completion_tokens=estimate_tokens(text),
            usage_estimated=True,
            elapsed_seconds=elapsed,
        )
