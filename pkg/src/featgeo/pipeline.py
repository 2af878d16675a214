"""End-to-end orchestration: topic probing, candidate evaluation, optimization runs.

A run probes the topic (queries, citation frequencies, exemplar extraction),
seeds the optimizer from the exemplar configurations, evaluates candidates by
realizing them into pages and injecting them next to the competitor documents,
and persists a fully replayable record of everything it did.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from .citations import citation_frequency, parse_citations, select_exemplars, visibility_scores
from .engine.cache import ResponseCache
from .engine.client import EngineClient
from .engine.ledger import CostLedger
from .engine.live import ChatCompletionBackend, ENV_CACHE_DIR
from .engine.types import (
    ORIGIN_ADVERTISER,
    ORIGIN_RETRIEVED,
    Role,
    SourceDocument,
    Stage,
    TopicBrief,
)
from .errors import EngineError, IntegrityError, ValidationError
from .features import (
    FeatureCatalog,
    FeatureVector,
    catalog_default,
    clamp,
    encode_vector,
    render_guidelines,
)
from .optimizer import (
    EvolveResult,
    GAConfig,
    GenerationRecord,
    HypervolumeTrace,
    Individual,
    OptimizerAbort,
    POLICIES,
    ParetoFront,
    evolve,
    select_final,
)
from .quality import QualityConfig, aggregate_quality, average_quality
from .sim import SimBackend, SimConfig, SimWorld

logger = logging.getLogger(__name__)

BACKEND_SIM = "sim"
BACKEND_LIVE = "live"
JUDGE_TARGET_ANSWER = "answer"
JUDGE_TARGET_PAGE = "page"
POSITION_LAST = "last"
POSITION_FIRST = "first"

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class RunConfig:
    """Declarative description of one optimization run."""

    topic: str
    competitor_docs: tuple[Path, ...]
    output_dir: Path
    ga: GAConfig = GAConfig()
    quality: QualityConfig = QualityConfig()
    sim: SimConfig | None = None
    query_count: int = 5
    exemplar_count: int = 5
    backend: str = BACKEND_SIM
    advertiser_position: str = POSITION_LAST
    judge_target: str = JUDGE_TARGET_ANSWER
    regenerate_page_per_repeat: bool = False
    eval_workers: int = 1
    cache_path: Path | None = None
    salt: str = ""

    def __post_init__(self):
        if not self.topic.strip():
            raise ValidationError("run config needs a topic label")
        if self.query_count < 1:
            raise ValidationError(f"query count must be >= 1, got {self.query_count}")
        if self.exemplar_count < 1:
            raise ValidationError(f"exemplar count must be >= 1, got {self.exemplar_count}")
        if self.backend not in (BACKEND_SIM, BACKEND_LIVE):
            raise ValidationError(f"backend must be 'sim' or 'live', got {self.backend!r}")
        if self.backend == BACKEND_SIM and self.sim is None:
            raise ValidationError("sim backend requires a sim section in the config")
        if self.advertiser_position not in (POSITION_FIRST, POSITION_LAST):
            raise ValidationError(f"advertiser position must be 'first' or 'last', got {self.advertiser_position!r}")
        if self.judge_target not in (JUDGE_TARGET_ANSWER, JUDGE_TARGET_PAGE):
            raise ValidationError(f"judge target must be 'answer' or 'page', got {self.judge_target!r}")
        if self.eval_workers < 1:
            raise ValidationError(f"eval workers must be >= 1, got {self.eval_workers}")
        if not self.competitor_docs:
            raise ValidationError("run config needs at least one competitor document")

    @classmethod
    def from_file(cls, path: str | Path, **overrides: Any) -> "RunConfig":
        """Load a JSON run config; relative document paths resolve against the file."""
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ValidationError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file {path} is not valid JSON: {exc}")
        base = path.parent
        docs = []
        for entry in raw.get("competitor_docs", []):
            doc_path = Path(entry)
            if not doc_path.is_absolute():
                doc_path = base / doc_path
            if not doc_path.exists():
                raise ValidationError(f"competitor document does not exist: {doc_path}")
            docs.append(doc_path)
        cfg = cls(
            topic=raw.get("topic", ""),
            competitor_docs=tuple(docs),
            output_dir=Path(raw.get("output_dir", "runs/run")),
            ga=GAConfig(**raw.get("ga", {})),
            quality=QualityConfig(**raw.get("quality", {})),
            sim=SimConfig.from_dict(raw["sim"]) if "sim" in raw else None,
            query_count=int(raw.get("query_count", 5)),
            exemplar_count=int(raw.get("exemplar_count", 5)),
            backend=raw.get("backend", BACKEND_SIM),
            advertiser_position=raw.get("advertiser_position", POSITION_LAST),
            judge_target=raw.get("judge_target", JUDGE_TARGET_ANSWER),
            regenerate_page_per_repeat=bool(raw.get("regenerate_page_per_repeat", False)),
            eval_workers=int(raw.get("eval_workers", 1)),
            cache_path=Path(raw["cache_path"]) if raw.get("cache_path") else None,
            salt=raw.get("salt", ""),
        )
        return cfg.with_overrides(**overrides) if overrides else cfg

    def with_overrides(
        self,
        seed: int | None = None,
        backend: str | None = None,
        output_dir: str | Path | None = None,
        **extra: Any,
    ) -> "RunConfig":
        """Apply CLI-style overrides; a seed override drives both GA and sim seeds."""
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, ga=dataclasses.replace(cfg.ga, seed=seed))
            if cfg.sim is not None:
                cfg = dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, seed=seed))
        if backend is not None:
            cfg = dataclasses.replace(cfg, backend=backend)
        if output_dir is not None:
            cfg = dataclasses.replace(cfg, output_dir=Path(output_dir))
        if extra:
            cfg = dataclasses.replace(cfg, **extra)
        return cfg


@dataclass(frozen=True)
class ProbeResult:
    """Everything the topic probe learned before optimization starts."""

    queries: tuple[str, ...]
    frequencies: dict[int, int]
    num_queries: int
    exemplar_ids: tuple[int, ...]
    exemplar_vectors: tuple[FeatureVector, ...]
    brief: TopicBrief


@dataclass(frozen=True)
class EvalMetric:
    """Aggregated metrics of one evaluator call (one candidate, one repeat).

    Raw judge dimensions are kept (one 7-tuple per judge call, canonical
    dimension order) so the quality blend weight can be re-applied post hoc.
    """

    generation: int
    slot: int
    repeat: int
    visibility: float
    quality: float
    word: float
    pos: float
    per_query_vis: tuple[float, ...]
    judge_scores: tuple[tuple[int, ...], ...] = ()
    failed: bool = False


@dataclass(frozen=True)
class AblationResult:
    """Visibility contribution of one feature under minimum-clamping."""

    feature_key: str
    baseline_vis: float
    ablated_vis: float
    delta: float
    baseline_quality: float
    ablated_quality: float

    def __post_init__(self):
        if abs(self.delta - (self.baseline_vis - self.ablated_vis)) > 1e-9:
            raise ValidationError("ablation delta must equal baseline minus ablated visibility")


@dataclass
class RunRecord:
    """Full provenance of one optimization run."""

    config_snapshot: dict[str, Any]
    probe: ProbeResult | None
    log: tuple[GenerationRecord, ...]
    front: ParetoFront | None
    trace: HypervolumeTrace | None
    finals: dict[str, Individual]
    eval_metrics: tuple[EvalMetric, ...]
    ledger: CostLedger
    status: str = "complete"
    error: str | None = None
    run_dir: Path | None = None


def load_documents(paths: Sequence[Path]) -> list[SourceDocument]:
    docs = []
    for i, path in enumerate(paths, start=1):
        text = Path(path).read_text(encoding="utf-8").strip()
        if not text:
            raise ValidationError(f"competitor document {path} is empty")
        docs.append(SourceDocument(id=i, text=text, origin=ORIGIN_RETRIEVED))
    return docs


def build_client(cfg: RunConfig, catalog: FeatureCatalog) -> EngineClient:
    if cfg.backend == BACKEND_SIM:
        backend = SimBackend(SimWorld(cfg.sim, catalog))
    else:
        backend = ChatCompletionBackend.from_env()
    cache_path = cfg.cache_path
    if cache_path is None and os.environ.get(ENV_CACHE_DIR):
        cache_path = Path(os.environ[ENV_CACHE_DIR]) / "responses.jsonl"
    cache = ResponseCache(cache_path) if cache_path else None
    return EngineClient(
        backend,
        catalog,
        cache=cache,
        ledger=CostLedger(),
        salt=cfg.salt,
        theme_doc_count=len(cfg.competitor_docs),
        max_answer_docs=len(cfg.competitor_docs) + 1,
    )


def probe_topic(
    cfg: RunConfig, client: EngineClient, docs: Sequence[SourceDocument] | None = None
) -> ProbeResult:
    """Probe the topic: queries, per-source citation frequencies, exemplar vectors.

    All costs book to the feature-extraction stage.
    """
    if docs is None:
        docs = load_documents(cfg.competitor_docs)
    client.set_stage(Stage.FEATURE_EXTRACTION)
    brief = client.extract_theme(docs, cfg.topic)
    queries = client.generate_queries(brief, cfg.query_count)
    parses = []
    for query in queries:
        answer = client.answer_query(query, docs, salt="probe")
        parses.append(parse_citations(answer, len(docs)))
    table = citation_frequency(parses)
    exemplar_ids = select_exemplars(table, cfg.exemplar_count)
    if not exemplar_ids:
        logger.warning("no source was cited during probing; falling back to all documents")
        exemplar_ids = [d.id for d in docs[: cfg.exemplar_count]]
    vectors = tuple(client.extract_features(docs[i - 1]) for i in exemplar_ids)
    return ProbeResult(
        queries=tuple(queries),
        frequencies=dict(table.frequencies),
        num_queries=table.num_queries,
        exemplar_ids=tuple(exemplar_ids),
        exemplar_vectors=vectors,
        brief=brief,
    )


class CandidateEvaluator:
    """Realizes candidate vectors into pages and scores them over the probe queries.

    One page per (generation, slot) unless page regeneration per repeat is on;
    repeats re-answer with fresh salts. Engine failures mark the candidate
    failed and yield penalty objectives (0, 0) instead of aborting the run.
    """

    def __init__(
        self,
        cfg: RunConfig,
        client: EngineClient,
        probe: ProbeResult,
        competitor_docs: Sequence[SourceDocument],
        catalog: FeatureCatalog,
    ):
        self.cfg = cfg
        self.client = client
        self.probe = probe
        self.competitors = list(competitor_docs)
        self.catalog = catalog
        self.pages: dict[tuple[int, int], str] = {}
        self.metrics: list[EvalMetric] = []
        self.realizations = 0
        self.advertiser_id = len(self.competitors) + 1

    def __call__(self, x: FeatureVector, key: tuple[int, int, int]) -> tuple[float, float]:
        generation, slot, repeat = key
        try:
            metric = self._evaluate(x, generation, slot, repeat)
        except EngineError as exc:
            logger.warning(
                "candidate (gen %d, slot %d, rep %d) failed: %s; assigning penalty objectives",
                generation, slot, repeat, exc,
            )
            metric = EvalMetric(generation, slot, repeat, 0.0, 0.0, 0.0, 0.0, (), failed=True)
        self.metrics.append(metric)
        return metric.visibility, metric.quality

    def _page_for(self, x: FeatureVector, generation: int, slot: int) -> str:
        key = (generation, slot)
        if self.cfg.regenerate_page_per_repeat or key not in self.pages:
            guidelines = render_guidelines(clamp(x, self.catalog), self.catalog)
            self.pages[key] = self.client.generate_page(self.probe.brief, guidelines)
            self.realizations += 1
        return self.pages[key]

    def _candidate_docs(self, page: str) -> list[SourceDocument]:
        advertiser = SourceDocument(id=self.advertiser_id, text=page, origin=ORIGIN_ADVERTISER)
        if self.cfg.advertiser_position == POSITION_FIRST:
            return [advertiser] + self.competitors
        return self.competitors + [advertiser]

    def _score_query(self, query: str, docs: list[SourceDocument], salt: str):
        answer = self.client.answer_query(query, docs, salt=salt)
        parse = parse_citations(answer, len(docs))
        scores = visibility_scores(parse)
        word, pos, vis = scores.for_source(self.advertiser_id)
        if self.cfg.judge_target == JUDGE_TARGET_ANSWER:
            quality, raw_dims = self._judge(answer, query, salt)
        else:
            quality, raw_dims = None, ()
        return vis, word, pos, quality, raw_dims

    def _judge(self, text: str, query: str, salt: str) -> tuple[float, tuple[tuple[int, ...], ...]]:
        dims = [
            self.client.judge_quality(text, query, salt=f"{salt}|judge{r}")
            for r in range(self.cfg.quality.repeats)
        ]
        scores = [aggregate_quality(d, self.cfg.quality) for d in dims]
        raw = tuple(tuple(d.content_scores() + d.appeal_scores()) for d in dims)
        return average_quality(scores).value, raw

    def _evaluate(self, x: FeatureVector, generation: int, slot: int, repeat: int) -> EvalMetric:
        page = self._page_for(x, generation, slot)
        docs = self._candidate_docs(page)
        salt = f"rep{repeat}"
        queries = self.probe.queries
        if self.cfg.eval_workers > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.eval_workers) as pool:
                results = list(pool.map(lambda q: self._score_query(q, docs, salt), queries))
        else:
            results = [self._score_query(q, docs, salt) for q in queries]
        vis_values = tuple(r[0] for r in results)
        word_values = [r[1] for r in results]
        pos_values = [r[2] for r in results]
        if self.cfg.judge_target == JUDGE_TARGET_ANSWER:
            quality = sum(r[3] for r in results) / len(results)
            judge_scores = tuple(dims for r in results for dims in r[4])
        else:
            quality, judge_scores = self._judge(page, self.probe.brief.topic, salt)
        n = len(results)
        return EvalMetric(
            generation=generation,
            slot=slot,
            repeat=repeat,
            visibility=sum(vis_values) / n,
            quality=quality,
            word=sum(word_values) / n,
            pos=sum(pos_values) / n,
            per_query_vis=vis_values,
            judge_scores=judge_scores,
        )


def evaluate_candidate(
    x: FeatureVector, evaluator: CandidateEvaluator, key: tuple[int, int, int] = (0, 0, 0)
) -> tuple[float, float]:
    """Single-candidate evaluation entry point (mean visibility and quality over queries)."""
    return evaluator(x, key)


def _expected_realizations(cfg: RunConfig) -> int:
    per_candidate = cfg.ga.repeats_per_eval if cfg.regenerate_page_per_repeat else 1
    candidates = cfg.ga.population_size * (cfg.ga.generations + 1)
    return candidates * per_candidate


def _config_snapshot(cfg: RunConfig, docs: Sequence[SourceDocument]) -> dict[str, Any]:
    """Location-independent snapshot: doc contents enter by digest, not by path."""
    snapshot = {
        "topic": cfg.topic,
        "competitor_docs": [
            {"name": Path(p).name, "sha256": hashlib.sha256(d.text.encode("utf-8")).hexdigest()}
            for p, d in zip(cfg.competitor_docs, docs)
        ],
        "query_count": cfg.query_count,
        "exemplar_count": cfg.exemplar_count,
        "backend": cfg.backend,
        "advertiser_position": cfg.advertiser_position,
        "judge_target": cfg.judge_target,
        "regenerate_page_per_repeat": cfg.regenerate_page_per_repeat,
        "salt": cfg.salt,
        "ga": dataclasses.asdict(cfg.ga),
        "quality": dataclasses.asdict(cfg.quality),
    }
    if cfg.sim is not None:
        snapshot["sim"] = cfg.sim.to_dict()
    return snapshot


def run_optimization(
    cfg: RunConfig,
    frozen_features: Mapping[int, float] | None = None,
    run_dir: Path | None = None,
) -> RunRecord:
    """Execute the full loop: probe, seed, evolve, select, persist, verify."""
    from .records import write_run_record  # local import to avoid a cycle

    catalog = catalog_default()
    client = build_client(cfg, catalog)
    run_dir = Path(run_dir) if run_dir is not None else Path(cfg.output_dir)
    record = RunRecord(
        config_snapshot={},
        probe=None,
        log=(),
        front=None,
        trace=None,
        finals={},
        eval_metrics=(),
        ledger=client.ledger,
        run_dir=run_dir,
    )
    try:
        docs = load_documents(cfg.competitor_docs)
        record.config_snapshot = _config_snapshot(cfg, docs)
        if frozen_features:
            record.config_snapshot["frozen_features"] = {
                catalog.features[i].key: v for i, v in sorted(frozen_features.items())
            }
        probe = probe_topic(cfg, client, docs)
        record.probe = probe
        evaluator = CandidateEvaluator(cfg, client, probe, docs, catalog)

        def phase_hook(phase: str, generation: int) -> None:
            client.set_stage(
                Stage.INITIAL_POPULATION if phase == "init" else Stage.GA_OPTIMIZATION
            )

        seeds = list(probe.exemplar_vectors)
        if frozen_features:
            seeds = [
                FeatureVector(
                    tuple(
                        frozen_features.get(i, value) for i, value in enumerate(v.values)
                    )
                )
                for v in seeds
            ]
        result: EvolveResult = evolve(
            cfg.ga,
            evaluator,
            seeds,
            catalog,
            frozen_features=frozen_features,
            phase_hook=phase_hook,
        )
        record.log = result.log
        record.front = result.front
        record.trace = result.trace
        record.eval_metrics = tuple(evaluator.metrics)
        record.finals = {policy: select_final(result.front, policy) for policy in POLICIES}
        _verify_run(cfg, client, evaluator)
    except OptimizerAbort as exc:
        record.log = exc.partial_log
        record.trace = HypervolumeTrace(exc.partial_trace)
        record.status = "failed"
        record.error = str(exc)
        write_run_record(record, run_dir)
        raise
    except Exception as exc:
        record.status = "failed"
        record.error = str(exc)
        write_run_record(record, run_dir)
        raise
    write_run_record(record, run_dir)
    from .report import REPORT_DIR_NAME, build_report_data, export_report

    export_report(build_report_data(record), run_dir / REPORT_DIR_NAME)
    return record


def _verify_run(cfg: RunConfig, client: EngineClient, evaluator: CandidateEvaluator) -> None:
    client.ledger.verify()
    expected = _expected_realizations(cfg)
    booked = client.ledger.role_requests(Role.PAGE_GEN)
    if evaluator.realizations != expected or booked != expected:
        raise IntegrityError(
            f"page generation accounting mismatch: expected {expected} realizations, "
            f"evaluator saw {evaluator.realizations}, ledger booked {booked}"
        )


def run_ablation(
    cfg: RunConfig, feature_key: str, baseline: RunRecord | None = None
) -> AblationResult:
    """Re-run the optimization with one feature clamped to its minimum (Fig.-style sweep unit).

    The delta is the max-visibility solution's visibility drop; quality is
    recorded for the same solutions.
    """
    catalog = catalog_default()
    index = catalog.index_of(feature_key)
    lo = catalog.features[index].lo
    base_dir = Path(cfg.output_dir)
    if baseline is None:
        baseline = run_optimization(cfg, run_dir=base_dir / "baseline")
    ablated = run_optimization(
        cfg, frozen_features={index: lo}, run_dir=base_dir / f"ablate_{feature_key}"
    )
    base_best = baseline.finals["max_visibility"]
    abl_best = ablated.finals["max_visibility"]
    return AblationResult(
        feature_key=feature_key,
        baseline_vis=base_best.objectives[0],
        ablated_vis=abl_best.objectives[0],
        delta=base_best.objectives[0] - abl_best.objectives[0],
        baseline_quality=base_best.objectives[1],
        ablated_quality=abl_best.objectives[1],
    )


def run_ablation_sweep(cfg: RunConfig) -> list[AblationResult]:
    """Clamp each of the 13 features in turn against one shared baseline run."""
    catalog = catalog_default()
    baseline = run_optimization(cfg, run_dir=Path(cfg.output_dir) / "baseline")
    return [run_ablation(cfg, feat.key, baseline=baseline) for feat in catalog]
