"""Append-only envelope log with a snapshot index.

Byte-exact layout (interoperable across the CLI, service, and card tooling):

* ``envelopes.log`` — one envelope per line; each line is the canonical JSON
  of ``{"payload": <canonical record JSON as a string>, "signature": <hex>,
  "signer_cert_id": <id>}`` followed by a single ``\\n``. Appends are flushed
  and fsynced before they are acknowledged.
* ``envelopes.idx.json`` — snapshot index ``{"version": 1, "count": N,
  "bytes": B}`` written every ``SNAPSHOT_EVERY`` appends and on close; purely
  an integrity cross-check, the log alone is authoritative.

Recovery tolerates a torn final line (no trailing newline or unparsable
tail): the log is truncated back to the last complete line.
"""
from __future__ import annotations

import json
import logging
import os
import threading
from pathlib import Path
from typing import Optional

from ..errors import IntegrityError
from .records import SignedEnvelope

logger = logging.getLogger(__name__)

LOG_NAME = "envelopes.log"
INDEX_SUFFIX = ".idx.json"
SNAPSHOT_EVERY = 100


class LedgerLog:
    def __init__(self, path: Path, fsync: bool = True):
        self.path = Path(path)
        self.index_path = self.path.with_name(self.path.name + INDEX_SUFFIX)
        self.fsync = fsync
        self._lock = threading.RLock()
        self._envelopes: list[SignedEnvelope] = []
        self._by_id: dict[str, int] = {}
        self._appends_since_snapshot = 0
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._recover()
        self._fh = open(self.path, "ab")

    def _recover(self) -> None:
        if not self.path.exists():
            self.path.touch()
            return
        data = self.path.read_bytes()
        good_bytes = 0
        for raw in data.split(b"\n"):
            if not raw:
                continue
            line_end = good_bytes + len(raw) + 1
            if line_end > len(data) or data[line_end - 1 : line_end] != b"\n":
                logger.warning("ledger log %s: dropping torn final line", self.path)
                break
            try:
                envelope = SignedEnvelope.from_line(raw)
                record_id = envelope.record_id()
            except Exception:
                logger.warning("ledger log %s: dropping unparsable final line", self.path)
                break
            self._by_id[record_id] = len(self._envelopes)
            self._envelopes.append(envelope)
            good_bytes = line_end
        if good_bytes < len(data):
            with open(self.path, "r+b") as fh:
                fh.truncate(good_bytes)
        self._check_index(good_bytes)

    def _check_index(self, byte_size: int) -> None:
        if not self.index_path.exists():
            return
        try:
            idx = json.loads(self.index_path.read_text())
        except json.JSONDecodeError:
            logger.warning("ledger index %s unreadable; rebuilding", self.index_path)
            return
        if idx.get("count", -1) > len(self._envelopes):
            raise IntegrityError(
                f"ledger log {self.path} shorter than its snapshot index "
                f"({len(self._envelopes)} < {idx['count']}): possible tampering"
            )

    def append(self, envelope: SignedEnvelope) -> bool:
        """Durably append; returns False when the identical envelope exists."""
        with self._lock:
            record_id = envelope.record_id()
            existing_pos = self._by_id.get(record_id)
            if existing_pos is not None:
                existing = self._envelopes[existing_pos]
                if existing.payload == envelope.payload and existing.signature == envelope.signature:
                    return False
                raise IntegrityError(
                    f"record {record_id} already logged with different bytes"
                )
            line = envelope.to_line()
            self._fh.write(line)
            self._fh.flush()
            if self.fsync:
                os.fsync(self._fh.fileno())
            self._by_id[record_id] = len(self._envelopes)
            self._envelopes.append(envelope)
            self._appends_since_snapshot += 1
            if self._appends_since_snapshot >= SNAPSHOT_EVERY:
                self.write_snapshot()
            return True

    def write_snapshot(self) -> None:
        with self._lock:
            self._fh.flush()
            snapshot = {
                "version": 1,
                "count": len(self._envelopes),
                "bytes": self.path.stat().st_size,
            }
            tmp = self.index_path.with_suffix(".tmp")
            tmp.write_text(json.dumps(snapshot, sort_keys=True))
            tmp.replace(self.index_path)
            self._appends_since_snapshot = 0

    def envelopes(self) -> list[SignedEnvelope]:
        with self._lock:
            return list(self._envelopes)

    def since(self, cursor: int, limit: Optional[int] = None) -> tuple[list[SignedEnvelope], int]:
        """Envelopes after the append-order cursor, with the next cursor."""
        with self._lock:
            cursor = max(0, int(cursor))
            chunk = self._envelopes[cursor : None if limit is None else cursor + limit]
            return chunk, cursor + len(chunk)

    def __len__(self) -> int:
        with self._lock:
            return len(self._envelopes)

    def close(self) -> None:
        with self._lock:
            self.write_snapshot()
            self._fh.close()
