"""Append-only response cache keyed by request digest.

One JSON record per line: digest, role, and the full response payload. A hit
returns the stored payload byte-for-byte, so cached runs replay exactly.
The ``salt`` folded into request digests lets experiments force re-sampling
without discarding the store.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from .types import EngineResponse, Role


class ResponseCache:
    """In-memory map over a persistent JSONL record file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: dict[str, EngineResponse] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                self._records[record["digest"]] = EngineResponse.from_dict(record["response"])

    def get(self, digest: str) -> EngineResponse | None:
        with self._lock:
            return self._records.get(digest)

    def put(self, digest: str, role: Role, response: EngineResponse) -> None:
        with self._lock:
            if digest in self._records:
                return
            self._records[digest] = response
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {"digest": digest, "role": role.value, "response": response.to_dict()}
                    )
                    + "\n"
                )

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)
