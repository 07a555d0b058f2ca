"""Replica stores persisted to a directory.

Layout::

    store_dir/
      meta.json           {"kind": "LOCAL", "replica_id": "...", "capacity_limit": null}
      envelopes.log       append-only envelope log (see ledger.log)
      envelopes.log.idx.json
      confirmed.json      record ids known present in CENTRAL

The same directory format backs the service data dir, so CLI tooling and the
service interoperate on bytes.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from ..errors import ConfigError
from ..ledger.log import LedgerLog
from .replica import ReplicaKind, ReplicaStore

META_NAME = "meta.json"
CONFIRMED_NAME = "confirmed.json"


def init_store_dir(
    path: Path,
    kind: ReplicaKind,
    replica_id: Optional[str] = None,
    capacity_limit: Optional[int] = None,
) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta_path = path / META_NAME
    if meta_path.exists():
        raise ConfigError(f"store already initialized at {path}")
    meta = {
        "kind": kind.value,
        "replica_id": replica_id or f"{kind.value.lower()}-{path.name}",
        "capacity_limit": capacity_limit,
    }
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    (path / CONFIRMED_NAME).write_text("[]\n")
    return path


class DiskStore:
    """A ReplicaStore kept durable under a directory."""

    def __init__(self, path: Path, verifier=None):
        self.path = Path(path)
        meta_path = self.path / META_NAME
        if not meta_path.exists():
            raise ConfigError(f"{self.path} is not a store directory (missing {META_NAME})")
        meta = json.loads(meta_path.read_text())
        self.log = LedgerLog(self.path / "envelopes.log")
        self.store = ReplicaStore(
            kind=ReplicaKind(meta["kind"]),
            replica_id=meta["replica_id"],
            capacity_limit=meta.get("capacity_limit"),
        )
        for envelope in self.log.envelopes():
            self.store.add(envelope)
        confirmed_path = self.path / CONFIRMED_NAME
        if confirmed_path.exists():
            self.store.confirm_central(json.loads(confirmed_path.read_text()))
        self.store.verifier = verifier
        self.store._on_append = self.log.append

    def save(self) -> None:
        (self.path / CONFIRMED_NAME).write_text(
            json.dumps(sorted(self.store.central_confirmed())) + "\n"
        )
        self.log.write_snapshot()

    def close(self) -> None:
        self.save()
        self.log.close()
