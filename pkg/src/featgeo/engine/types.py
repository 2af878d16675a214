"""Shared request/response and document types for generative-engine access."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from ..errors import ValidationError


class Role(str, Enum):
    """The six engine roles the pipeline relies on."""

    QUERY_GEN = "QueryGen"
    THEME_EXTRACT = "ThemeExtract"
    FEATURE_EXTRACT = "FeatureExtract"
    PAGE_GEN = "PageGen"
    ANSWER_GEN = "AnswerGen"
    JUDGE = "Judge"


class Stage(str, Enum):
    """Cost-accounting stages of one optimization run."""

    FEATURE_EXTRACTION = "Feature Extraction"
    INITIAL_POPULATION = "Initial Population"
    GA_OPTIMIZATION = "GA Optimization"


# Sampling posture per role; the live transport maps tags to temperatures.
TEMPERATURE_TAGS: dict[Role, str] = {
    Role.QUERY_GEN: "creative",
    Role.THEME_EXTRACT: "balanced",
    Role.FEATURE_EXTRACT: "deterministic",
    Role.PAGE_GEN: "creative",
    Role.ANSWER_GEN: "balanced",
    Role.JUDGE: "deterministic",
}


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def digest_to_int(text: str) -> int:
    """Stable 64-bit integer digest (for seeding random streams)."""
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def estimate_tokens(text: str) -> int:
    """ceil(chars / 4); used when a backend reports no usage metadata."""
    return (len(text) + 3) // 4


@dataclass(frozen=True)
class EngineRequest:
    """One prompt-level request to a generative engine.

    ``payload`` carries the structured inputs the prompt was rendered from so
    that simulated backends can act on them directly; it never participates in
    the cache key, which is a digest of (role, salt, prompt).
    """

    role: Role
    prompt: str
    temperature_tag: str
    cache_key: str
    payload: Mapping[str, Any] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.prompt:
            raise ValidationError("engine request prompt must be non-empty")


def build_request(
    role: Role, prompt: str, salt: str = "", payload: Mapping[str, Any] | None = None
) -> EngineRequest:
    cache_key = text_digest(f"{role.value}\x1f{salt}\x1f{prompt}")
    return EngineRequest(role, prompt, TEMPERATURE_TAGS[role], cache_key, payload)


@dataclass(frozen=True)
class EngineResponse:
    """Engine reply text plus usage accounting."""

    text: str
    prompt_tokens: int
    completion_tokens: int
    usage_estimated: bool = False
    elapsed_seconds: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "text": self.text,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "usage_estimated": self.usage_estimated,
            "elapsed_seconds": self.elapsed_seconds,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EngineResponse":
        return cls(
            text=data["text"],
            prompt_tokens=int(data["prompt_tokens"]),
            completion_tokens=int(data["completion_tokens"]),
            usage_estimated=bool(data["usage_estimated"]),
            elapsed_seconds=float(data["elapsed_seconds"]),
        )


ORIGIN_RETRIEVED = "retrieved"
ORIGIN_ADVERTISER = "advertiser"
ORIGIN_GENERATED = "generated"
_ORIGINS = (ORIGIN_RETRIEVED, ORIGIN_ADVERTISER, ORIGIN_GENERATED)


@dataclass(frozen=True)
class SourceDocument:
    """One candidate source page, identified by its 1-based index."""

    id: int
    text: str
    origin: str = ORIGIN_RETRIEVED

    def __post_init__(self):
        if self.id < 1:
            raise ValidationError(f"document id must be >= 1, got {self.id}")
        if not self.text or not self.text.strip():
            raise ValidationError(f"document {self.id} has empty text")
        if self.origin not in _ORIGINS:
            raise ValidationError(f"unknown document origin {self.origin!r}")


@dataclass(frozen=True)
class TopicBrief:
    """A topic label plus the ad-strategy brief generated for it."""

    topic: str
    strategy_text: str

    def __post_init__(self):
        if not self.topic or not self.topic.strip():
            raise ValidationError("topic label must be non-empty")
        if not self.strategy_text or not self.strategy_text.strip():
            raise ValidationError("strategy text must be non-empty")
