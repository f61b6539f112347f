"""Append-only record store with an in-memory index.

One JSONL file holds estimate records and plans; uploaded images are kept
content-addressed next to it. Appends are serialized and each entry is a
single write, so a record is either fully present or absent.
"""

from __future__ import annotations

import hashlib
import json
import threading
from datetime import datetime, timezone
from pathlib import Path

from .errors import StorageError


class RecordStore:
    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.records_path = self.dir / "records.jsonl"
        self.blob_dir = self.dir / "blobs"
        self.blob_dir.mkdir(exist_ok=True)
        self._lock = threading.Lock()
        self._records: dict = {}
        self._plans: dict = {}
        self._replay()

    def _replay(self) -> None:
        if not self.records_path.exists():
            return
        for lineno, line in enumerate(self.records_path.read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StorageError(
                    f"{self.records_path}:{lineno}: corrupt store entry: {exc}") from exc
            self._index(entry)

    def _index(self, entry: dict) -> None:
        kind = entry.get("kind")
        rid = entry.get("record_id")
        if kind == "estimate":
            self._records[rid] = entry
        elif kind == "plan":
            self._plans.setdefault(rid, []).append(entry["plan"])

    def _append(self, entry: dict) -> None:
        data = json.dumps(entry, sort_keys=True) + "\n"
        with self._lock:
            if not self.dir.exists():
                raise StorageError(f"store directory {self.dir} disappeared")
            with open(self.records_path, "a", encoding="utf-8") as fh:
                fh.write(data)
            self._index(entry)

    @staticmethod
    def _now() -> str:
        return datetime.now(timezone.utc).isoformat()

    def put_image(self, png_bytes: bytes) -> str:
        digest = hashlib.sha256(png_bytes).hexdigest()
        path = self.blob_dir / f"{digest}.png"
        if not path.exists():
            path.write_bytes(png_bytes)
        return digest

    def put_estimate(self, response: dict, request: dict, image_digest: str) -> None:
        self._append({
            "kind": "estimate",
            "record_id": response["record_id"],
            "created_at": self._now(),
            "request": request,
            "image_digest": image_digest,
            "response": response,
        })

    def put_plan(self, record_id: str, plan: dict) -> None:
        if record_id not in self._records:
            raise StorageError(f"no record {record_id!r} to attach a plan to")
        self._append({
            "kind": "plan",
            "record_id": record_id,
            "created_at": self._now(),
            "plan": plan,
        })

    def has(self, record_id: str) -> bool:
        return record_id in self._records

    def get(self, record_id: str) -> dict:
        if record_id not in self._records:
            raise KeyError(record_id)
        if self._records and not self.records_path.exists():
            raise StorageError(f"store file {self.records_path} was deleted")
        entry = self._records[record_id]
        return {
            "record_id": record_id,
            "created_at": entry["created_at"],
            "request": entry["request"],
            "image_digest": entry["image_digest"],
            "response": entry["response"],
            "plans": list(self._plans.get(record_id, [])),
        }

    def record_ids(self):
        return sorted(self._records)
