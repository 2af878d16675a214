"""Run-record persistence: line-delimited record files plus a digest manifest.

Every file is written deterministically (fixed key order, repr floats, "\n"
newlines), so a re-run of the same config under the sim backend reproduces the
record byte for byte. The manifest is written last and carries the sha256 of
every record file.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable

from .features import FeatureCatalog, catalog_default
from .optimizer import Individual
from .pipeline import ProbeResult, RunRecord

SCHEMA_VERSION = 1

PROBE_FILE = "probe.json"
GENERATIONS_FILE = "generations.jsonl"
FRONT_FILE = "pareto_front.jsonl"
TRACE_FILE = "hv_trace.csv"
FINALS_FILE = "final_solutions.json"
METRICS_FILE = "eval_metrics.jsonl"
COST_FILE = "cost.json"

RECORD_FILES = (
    PROBE_FILE,
    GENERATIONS_FILE,
    FRONT_FILE,
    TRACE_FILE,
    FINALS_FILE,
    METRICS_FILE,
    COST_FILE,
)


def feature_record(values: Iterable[float], catalog: FeatureCatalog) -> dict[str, float]:
    return {feat.key: float(v) for feat, v in zip(catalog, values)}


def _dump(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _crowding_out(value: float) -> float | None:
    return None if value == float("inf") else value


def probe_to_dict(probe: ProbeResult, catalog: FeatureCatalog) -> dict[str, Any]:
    return {
        "brief": {"topic": probe.brief.topic, "strategy_text": probe.brief.strategy_text},
        "queries": list(probe.queries),
        "frequencies": {str(s): f for s, f in sorted(probe.frequencies.items())},
        "num_queries": probe.num_queries,
        "exemplar_ids": list(probe.exemplar_ids),
        "exemplar_vectors": [feature_record(v.values, catalog) for v in probe.exemplar_vectors],
    }


def _individual_to_dict(
    ind: Individual, catalog: FeatureCatalog, word: float | None = None, pos: float | None = None
) -> dict[str, Any]:
    out: dict[str, Any] = {
        "features": feature_record(ind.x.values, catalog),
        "visibility": ind.objectives[0],
        "quality": ind.objectives[1],
        "realized_at": list(ind.key) if ind.key is not None else None,
    }
    if word is not None:
        out["word"] = word
    if pos is not None:
        out["pos"] = pos
    return out


def aux_metrics(record: RunRecord) -> dict[tuple[int, int], tuple[float, float]]:
    """Mean word/pos per realized candidate, keyed by (generation, slot)."""
    sums: dict[tuple[int, int], list[float]] = {}
    for m in record.eval_metrics:
        if m.failed:
            continue
        entry = sums.setdefault((m.generation, m.slot), [0.0, 0.0, 0.0])
        entry[0] += m.word
        entry[1] += m.pos
        entry[2] += 1.0
    return {k: (v[0] / v[2], v[1] / v[2]) for k, v in sums.items() if v[2] > 0}


def write_run_record(record: RunRecord, run_dir: Path) -> Path:
    """Persist a (possibly partial) run record; returns the manifest path."""
    catalog = catalog_default()
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    if record.probe is not None:
        _write(run_dir / PROBE_FILE, _dump(probe_to_dict(record.probe, catalog)) + "\n")

    gen_lines = [
        _dump(
            {
                "generation": r.generation,
                "slot": r.slot,
                "features": feature_record(r.values, catalog),
                "visibility": r.visibility,
                "quality": r.quality,
                "rank": r.rank,
                "crowding": _crowding_out(r.crowding),
            }
        )
        for r in record.log
    ]
    _write(run_dir / GENERATIONS_FILE, "\n".join(gen_lines) + ("\n" if gen_lines else ""))

    front_lines = []
    if record.front is not None:
        front_lines = [_dump(_individual_to_dict(ind, catalog)) for ind in record.front]
    _write(run_dir / FRONT_FILE, "\n".join(front_lines) + ("\n" if front_lines else ""))

    trace_lines = ["generation,hypervolume"]
    if record.trace is not None:
        trace_lines += [f"{gen},{hv!r}" for gen, hv in record.trace.entries]
    _write(run_dir / TRACE_FILE, "\n".join(trace_lines) + "\n")

    aux = aux_metrics(record)
    finals = {
        policy: _individual_to_dict(
            ind,
            catalog,
            word=aux.get(ind.key, (None, None))[0] if ind.key else None,
            pos=aux.get(ind.key, (None, None))[1] if ind.key else None,
        )
        for policy, ind in record.finals.items()
    }
    _write(run_dir / FINALS_FILE, _dump(finals) + "\n")

    metric_lines = [
        _dump(
            {
                "generation": m.generation,
                "slot": m.slot,
                "repeat": m.repeat,
                "visibility": m.visibility,
                "quality": m.quality,
                "word": m.word,
                "pos": m.pos,
                "per_query_vis": list(m.per_query_vis),
                "judge_scores": [list(d) for d in m.judge_scores],
                "failed": m.failed,
            }
        )
        for m in record.eval_metrics
    ]
    _write(run_dir / METRICS_FILE, "\n".join(metric_lines) + ("\n" if metric_lines else ""))

    _write(run_dir / COST_FILE, _dump(record.ledger.to_dict()) + "\n")

    artifacts = {}
    for name in RECORD_FILES:
        path = run_dir / name
        if path.exists():
            artifacts[name] = hashlib.sha256(path.read_bytes()).hexdigest()
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "status": record.status,
        "error": record.error,
        "config": record.config_snapshot,
        "artifacts": artifacts,
    }
    manifest_path = run_dir / "manifest.json"
    _write(manifest_path, json.dumps(manifest, ensure_ascii=False, indent=2) + "\n")
    return manifest_path
