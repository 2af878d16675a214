"""Role-typed gateway to a generative engine.

The client renders prompts from the versioned templates, routes them through a
pluggable backend, caches replies by request digest, validates and parses the
replies per role (with bounded retries), and books every interaction into the
cost ledger under the currently active pipeline stage.
"""

from __future__ import annotations

import logging
import threading
from typing import Protocol, Sequence

from ..errors import EngineError, ValidationError
from ..features import FeatureCatalog, FeatureVector, GuidelineBlock, vector_from_mapping
from ..quality import ALL_DIMENSIONS, QualityDimensions
from .cache import ResponseCache
from .ledger import CostLedger
from .templates import render_prompt
from .types import (
    EngineRequest,
    EngineResponse,
    Role,
    SourceDocument,
    Stage,
    TopicBrief,
    build_request,
)

logger = logging.getLogger(__name__)

DEFAULT_RETRY_LIMIT = 3
DEFAULT_MAX_ANSWER_DOCS = 6
DEFAULT_THEME_DOC_COUNT = 5
BRIEF_WORD_LIMIT = 200


class EngineBackend(Protocol):
    """Anything that can answer one prompt-level engine request."""

    def complete(self, request: EngineRequest) -> EngineResponse: ...


def format_feature_definitions(catalog: FeatureCatalog) -> str:
    """Human-readable property list embedded in the feature-extraction prompt."""
    lines = []
    for feat in catalog:
        if feat.kind == "boolean":
            detail = "1 if present, 0 if absent"
        elif feat.kind == "tiered":
            detail = "1 = low, 2 = medium, 3 = high"
        else:
            detail = f"density of {feat.density_label}, 0 = none, 3 = saturated"
        lines.append(f"- {feat.key} ({feat.layer}; range {feat.lo:g} to {feat.hi:g}): {detail}")
    return "\n".join(lines)


def format_source_documents(docs: Sequence[SourceDocument]) -> str:
    return "\n\n".join(f"[{d.id}] {d.text}" for d in docs)


def _parse_key_value_lines(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip().lstrip("-* ").strip()
        if not line or ":" not in line:
            continue
        key, _, value = line.partition(":")
        out[key.strip().lower()] = value.strip()
    return out


class EngineClient:
    """Gateway for the six LLM roles, with caching, retries, and cost accounting."""

    def __init__(
        self,
        backend: EngineBackend,
        catalog: FeatureCatalog,
        *,
        cache: ResponseCache | None = None,
        ledger: CostLedger | None = None,
        salt: str = "",
        retry_limit: int = DEFAULT_RETRY_LIMIT,
        max_answer_docs: int = DEFAULT_MAX_ANSWER_DOCS,
        theme_doc_count: int = DEFAULT_THEME_DOC_COUNT,
    ):
        self.backend = backend
        self.catalog = catalog
        self.cache = cache
        self.ledger = ledger if ledger is not None else CostLedger()
        self.salt = salt
        self.retry_limit = retry_limit
        self.max_answer_docs = max_answer_docs
        self.theme_doc_count = theme_doc_count
        self._stage = Stage.FEATURE_EXTRACTION
        self._stage_lock = threading.Lock()

    def set_stage(self, stage: Stage) -> None:
        with self._stage_lock:
            self._stage = stage

    @property
    def stage(self) -> Stage:
        with self._stage_lock:
            return self._stage

    # -- transport ---------------------------------------------------------

    def _complete(self, role: Role, prompt: str, payload: dict | None, salt: str) -> str:
        request = build_request(role, prompt, salt=f"{self.salt}\x1f{salt}", payload=payload)
        if self.cache is not None:
            hit = self.cache.get(request.cache_key)
            if hit is not None:
                self.ledger.record_call(self.stage, role, hit, cached=True)
                return hit.text
        try:
            response = self.backend.complete(request)
        except EngineError:
            raise
        except Exception as exc:
            raise EngineError(f"{role.value} backend call failed: {exc}") from exc
        self.ledger.record_call(self.stage, role, response)
        if self.cache is not None:
            self.cache.put(request.cache_key, role, response)
        return response.text

    # -- roles -------------------------------------------------------------

    def generate_queries(self, topic: TopicBrief, m: int) -> list[str]:
        """Produce exactly m distinct non-empty query strings for a topic."""
        if m < 1:
            raise ValidationError(f"query count must be >= 1, got {m}")
        prompt = render_prompt(
            Role.QUERY_GEN, topic=topic.topic, strategy_text=topic.strategy_text, m=str(m)
        )
        collected: list[str] = []
        seen: set[str] = set()
        for attempt in range(self.retry_limit):
            salt = f"attempt{attempt}" if attempt else ""
            reply = self._complete(
                Role.QUERY_GEN, prompt, {"topic": topic, "m": m, "attempt": attempt}, salt
            )
            for line in reply.splitlines():
                query = line.strip().lstrip("-*0123456789. ").strip()
                if query and query not in seen:
                    seen.add(query)
                    collected.append(query)
            if len(collected) >= m:
                return collected[:m]
            logger.warning(
                "query generation attempt %d yielded %d/%d distinct queries; retrying",
                attempt + 1, len(collected), m,
            )
        raise EngineError(
            f"could not obtain {m} distinct queries after {self.retry_limit} attempts "
            f"(got {len(collected)})"
        )

    def extract_theme(self, docs: Sequence[SourceDocument], topic: str) -> TopicBrief:
        """Derive an ad-strategy brief from the competitor document set."""
        if len(docs) != self.theme_doc_count:
            raise ValidationError(
                f"theme extraction expects exactly {self.theme_doc_count} documents, got {len(docs)}"
            )
        prompt = render_prompt(Role.THEME_EXTRACT, docs_text=format_source_documents(docs))
        reply = self._complete(Role.THEME_EXTRACT, prompt, {"docs": list(docs), "topic": topic}, "")
        strategy = reply.strip()
        if not strategy:
            raise EngineError("theme extraction returned an empty brief", raw_reply=reply)
        if len(strategy.split()) > BRIEF_WORD_LIMIT:
            logger.warning("ad strategy brief exceeds %d words (soft limit)", BRIEF_WORD_LIMIT)
        return TopicBrief(topic=topic, strategy_text=strategy)

    def extract_features(self, page: SourceDocument, catalog: FeatureCatalog | None = None) -> FeatureVector:
        """Rate a page along the 13 catalog features; replies are clamped into range."""
        catalog = catalog or self.catalog
        prompt = render_prompt(
            Role.FEATURE_EXTRACT,
            feature_definitions=format_feature_definitions(catalog),
            page_text=page.text,
        )
        last_reply = ""
        for attempt in range(self.retry_limit):
            salt = f"attempt{attempt}" if attempt else ""
            last_reply = self._complete(Role.FEATURE_EXTRACT, prompt, {"doc": page}, salt)
            fields = _parse_key_value_lines(last_reply)
            try:
                record = {key: float(fields[key]) for key in catalog.keys() if key in fields}
                return vector_from_mapping(record, catalog, lenient=True)
            except (ValidationError, ValueError) as exc:
                logger.warning("feature extraction reply unparseable (attempt %d): %s", attempt + 1, exc)
        raise EngineError(
            f"feature extraction failed after {self.retry_limit} attempts", raw_reply=last_reply
        )

    def generate_page(self, brief: TopicBrief, guidelines: GuidelineBlock) -> str:
        """Realize a feature configuration (as rendered guidelines) into page text."""
        if not guidelines.lines:
            raise ValidationError("guidelines must contain at least one line")
        prompt = render_prompt(
            Role.PAGE_GEN, ad_theme=brief.strategy_text, guidelines=guidelines.as_text()
        )
        last_reply = ""
        for attempt in range(self.retry_limit):
            salt = f"attempt{attempt}" if attempt else ""
            last_reply = self._complete(
                Role.PAGE_GEN, prompt, {"brief": brief, "guidelines": guidelines}, salt
            )
            if last_reply.strip():
                return last_reply
        raise EngineError(
            f"page generation returned empty text after {self.retry_limit} attempts",
            raw_reply=last_reply,
        )

    def answer_query(self, query: str, docs: Sequence[SourceDocument], salt: str = "") -> str:
        """Synthesize a cited answer for a query over the given sources."""
        if not query.strip():
            raise ValidationError("query must be non-empty")
        if not 1 <= len(docs) <= self.max_answer_docs:
            raise ValidationError(
                f"answer generation expects 1..{self.max_answer_docs} documents, got {len(docs)}"
            )
        ids = [d.id for d in docs]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"document ids must be unique, got {ids}")
        prompt = render_prompt(
            Role.ANSWER_GEN, query=query, source_text=format_source_documents(docs)
        )
        return self._complete(
            Role.ANSWER_GEN, prompt, {"query": query, "docs": list(docs), "salt": salt}, salt
        )

    def judge_quality(self, answer_or_page: str, query: str, salt: str = "") -> QualityDimensions:
        """Score a text on the seven quality dimensions (integers 1..5)."""
        if not answer_or_page.strip() or not query.strip():
            raise ValidationError("judge inputs must be non-empty")
        prompt = render_prompt(Role.JUDGE, query=query, answer_text=answer_or_page)
        last_reply = ""
        for attempt in range(self.retry_limit):
            attempt_salt = f"{salt}|attempt{attempt}" if attempt else salt
            last_reply = self._complete(
                Role.JUDGE, prompt, {"text": answer_or_page, "query": query}, attempt_salt
            )
            fields = _parse_key_value_lines(last_reply)
            try:
                raw = {name: float(fields[name]) for name in ALL_DIMENSIONS if name in fields}
                return QualityDimensions.from_raw(raw)
            except (ValidationError, ValueError) as exc:
                logger.warning("judge reply unparseable (attempt %d): %s", attempt + 1, exc)
        raise EngineError(
            f"quality judging failed after {self.retry_limit} attempts", raw_reply=last_reply
        )

    def ledger_report(self) -> str:
        return self.ledger.report()
