"""Per-stage cost accounting for engine calls.

The ledger tracks wall time, call counts, and token usage per (stage, role)
pair; stage aggregates and grand totals are maintained as running sums. The
report recomputes totals from the stage entries and refuses to print a ledger
whose stored totals disagree.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Any, Mapping

from ..errors import IntegrityError
from .types import EngineResponse, Role, Stage

STAGES = (Stage.FEATURE_EXTRACTION, Stage.INITIAL_POPULATION, Stage.GA_OPTIMIZATION)


@dataclass
class CallStats:
    """Accumulated usage for one accounting bucket.

    Wall time is held as integer microseconds so that concurrent increments
    sum to the same total regardless of arrival order.
    """

    wall_time_us: int = 0
    api_calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cache_hits: int = 0

    @property
    def wall_time(self) -> float:
        return self.wall_time_us / 1e6

    def add(self, other: "CallStats") -> None:
        self.wall_time_us += other.wall_time_us
        self.api_calls += other.api_calls
        self.prompt_tokens += other.prompt_tokens
        self.completion_tokens += other.completion_tokens
        self.cache_hits += other.cache_hits

    def to_dict(self) -> dict[str, Any]:
        return {
            "wall_time": self.wall_time,
            "api_calls": self.api_calls,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "cache_hits": self.cache_hits,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CallStats":
        return cls(
            wall_time_us=round(float(data["wall_time"]) * 1e6),
            api_calls=int(data["api_calls"]),
            prompt_tokens=int(data["prompt_tokens"]),
            completion_tokens=int(data["completion_tokens"]),
            cache_hits=int(data.get("cache_hits", 0)),
        )


class CostLedger:
    """Thread-safe accumulator of engine-call costs across pipeline stages."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict[tuple[Stage, Role], CallStats] = {}
        self._stage_totals: dict[Stage, CallStats] = {stage: CallStats() for stage in STAGES}
        self._totals = CallStats()

    def record_call(
        self, stage: Stage, role: Role, response: EngineResponse, cached: bool = False
    ) -> None:
        """Book one engine interaction. Cache hits count separately from live calls."""
        delta = CallStats(cache_hits=1) if cached else CallStats(
            wall_time_us=round(response.elapsed_seconds * 1e6),
            api_calls=1,
            prompt_tokens=response.prompt_tokens,
            completion_tokens=response.completion_tokens,
        )
        with self._lock:
            entry = self._entries.setdefault((stage, role), CallStats())
            entry.add(delta)
            self._stage_totals[stage].add(delta)
            self._totals.add(delta)

    def stage_stats(self, stage: Stage) -> CallStats:
        with self._lock:
            out = CallStats()
            out.add(self._stage_totals[stage])
            return out

    def totals(self) -> CallStats:
        with self._lock:
            out = CallStats()
            out.add(self._totals)
            return out

    def role_requests(self, role: Role, stage: Stage | None = None) -> int:
        """Live calls plus cache hits for a role, optionally within one stage."""
        with self._lock:
            return sum(
                e.api_calls + e.cache_hits
                for (s, r), e in self._entries.items()
                if r == role and (stage is None or s == stage)
            )

    def role_calls(self, role: Role, stage: Stage | None = None) -> int:
        with self._lock:
            return sum(
                e.api_calls
                for (s, r), e in self._entries.items()
                if r == role and (stage is None or s == stage)
            )

    def _recomputed_totals(self) -> CallStats:
        out = CallStats()
        for stage in STAGES:
            out.add(self._stage_totals[stage])
        return out

    def verify(self) -> None:
        """Raise IntegrityError when stored totals disagree with stage sums."""
        with self._lock:
            recomputed = self._recomputed_totals()
            stored = self._totals
            if (
                recomputed.api_calls != stored.api_calls
                or recomputed.prompt_tokens != stored.prompt_tokens
                or recomputed.completion_tokens != stored.completion_tokens
                or recomputed.cache_hits != stored.cache_hits
                or recomputed.wall_time_us != stored.wall_time_us
            ):
                raise IntegrityError(
                    f"ledger totals {stored.to_dict()} disagree with stage sums {recomputed.to_dict()}"
                )
            # Stage totals must equal their per-role entries as well.
            for stage in STAGES:
                per_role = CallStats()
                for (s, _), e in self._entries.items():
                    if s == stage:
                        per_role.add(e)
                st = self._stage_totals[stage]
                if (
                    per_role.api_calls != st.api_calls
                    or per_role.prompt_tokens != st.prompt_tokens
                    or per_role.completion_tokens != st.completion_tokens
                    or per_role.cache_hits != st.cache_hits
                ):
                    raise IntegrityError(f"stage {stage.value!r} totals disagree with role entries")

    def report(self) -> str:
        """Format the stage table (time, calls, prompt/completion tokens) plus totals."""
        self.verify()
        with self._lock:
            rows = [
                (stage.value, self._stage_totals[stage]) for stage in STAGES
            ]
            total = self._totals
        header = ("Pipeline Stage", "Time (s)", "API Calls", "Prompt Tok.", "Compl. Tok.")
        body = [
            (
                name,
                f"{stats.wall_time:,.1f}",
                f"{stats.api_calls:,}",
                f"{stats.prompt_tokens:,}",
                f"{stats.completion_tokens:,}",
            )
            for name, stats in rows
        ]
        body.append(
            (
                "Total",
                f"{total.wall_time:,.1f}",
                f"{total.api_calls:,}",
                f"{total.prompt_tokens:,}",
                f"{total.completion_tokens:,}",
            )
        )
        widths = [max(len(header[i]), *(len(r[i]) for r in body)) for i in range(len(header))]
        lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header)).rstrip()]
        lines.append("  ".join("-" * w for w in widths))
        for row in body[:-1]:
            lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(row)).rstrip())
        lines.append("  ".join("-" * w for w in widths))
        lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(body[-1])).rstrip())
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict[str, Any]:
        with self._lock:
            return {
                "entries": {
                    f"{stage.value}/{role.value}": stats.to_dict()
                    for (stage, role), stats in sorted(
                        self._entries.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)
                    )
                },
                "stages": {stage.value: self._stage_totals[stage].to_dict() for stage in STAGES},
                "totals": self._totals.to_dict(),
            }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CostLedger":
        ledger = cls()
        for key, stats in data.get("entries", {}).items():
            stage_name, role_name = key.split("/", 1)
            ledger._entries[(Stage(stage_name), Role(role_name))] = CallStats.from_dict(stats)
        for stage in STAGES:
            ledger._stage_totals[stage] = CallStats.from_dict(data["stages"][stage.value])
        ledger._totals = CallStats.from_dict(data["totals"])
        return ledger
