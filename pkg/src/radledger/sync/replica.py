"""Grow-only envelope stores: the replicas that converge.

A store only ever gains records. Re-adding identical bytes is a no-op; the
same record id with different bytes is quarantined as an integrity fault so
hospital operations keep running while the tampering is flagged. Cards have a
capacity limit and may evict their oldest records, but only once those
records are confirmed present in CENTRAL — the durable root that can rebuild
a lost card.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional

from ..errors import IntegrityError
from ..ledger.records import SignedEnvelope


class ReplicaKind(str, Enum):
    CARD = "CARD"
    LOCAL = "LOCAL"
    CENTRAL = "CENTRAL"


@dataclass(frozen=True)
class ConnectivityState:
    card_present: bool
    local_reachable: bool
    central_reachable: bool


@dataclass(frozen=True)
class SyncFault:
    record_id: str
    reason: str
    detail: str = ""

    def to_json_obj(self) -> dict:
        return {"record_id": self.record_id, "reason": self.reason, "detail": self.detail}


class AddResult(str, Enum):
    ADDED = "ADDED"
    DUPLICATE = "DUPLICATE"
    QUARANTINED = "QUARANTINED"
    REJECTED = "REJECTED"


# verify callbacks return anything truthy-on-accept with a .reason on reject
Verifier = Callable[[SignedEnvelope], object]


class ReplicaStore:
    """One replica's grow-only record set, single-writer serialized."""

    def __init__(
        self,
        kind: ReplicaKind,
        replica_id: str,
        capacity_limit: Optional[int] = None,
        verifier: Optional[Verifier] = None,
        on_append: Optional[Callable[[SignedEnvelope], None]] = None,
    ):
        self.kind = kind
        self.replica_id = replica_id
        self.capacity_limit = capacity_limit
        self.verifier = verifier
        self._on_append = on_append
        self._envelopes: dict[str, SignedEnvelope] = {}
        self._central_confirmed: set[str] = set()
        self._quarantine: list[SyncFault] = []
        self._lock = threading.RLock()

    # -- reads ---------------------------------------------------------------

    def size(self) -> int:
        with self._lock:
            return len(self._envelopes)

    def record_ids(self) -> set[str]:
        with self._lock:
            return set(self._envelopes)

    def envelopes(self) -> list[SignedEnvelope]:
        with self._lock:
            return list(self._envelopes.values())

    def get(self, record_id: str) -> Optional[SignedEnvelope]:
        with self._lock:
            return self._envelopes.get(record_id)

    def holds(self, record_id: str) -> bool:
        with self._lock:
            return record_id in self._envelopes

    def envelopes_for_patient(self, patient_id: str) -> list[SignedEnvelope]:
        with self._lock:
            return [e for e in self._envelopes.values() if e.record().patient_id == patient_id]

    def patient_ids(self) -> set[str]:
        with self._lock:
            return {e.record().patient_id for e in self._envelopes.values()}

    def knows_patient(self, patient_id: str) -> bool:
        return patient_id in self.patient_ids()

    def central_confirmed(self) -> set[str]:
        with self._lock:
            if self.kind is ReplicaKind.CENTRAL:
                return set(self._envelopes)
            return set(self._central_confirmed)

    def faults(self) -> list[SyncFault]:
        with self._lock:
            return list(self._quarantine)

    # -- writes --------------------------------------------------------------

    def add(self, envelope: SignedEnvelope) -> AddResult:
        with self._lock:
            record_id = envelope.record_id()
            existing = self._envelopes.get(record_id)
            if existing is not None:
                if existing.payload == envelope.payload and existing.signature == envelope.signature:
                    return AddResult.DUPLICATE
                self._quarantine.append(
                    SyncFault(record_id, "ID_COLLISION", "same record id, different bytes")
                )
                return AddResult.QUARANTINED
            if self.verifier is not None:
                result = self.verifier(envelope)
                if not result:
                    reason = getattr(result, "reason", None)
                    self._quarantine.append(
                        SyncFault(
                            record_id,
                            "VERIFY_FAILED",
                            getattr(reason, "value", str(reason)),
                        )
                    )
                    return AddResult.REJECTED
            self._envelopes[record_id] = envelope
            if self.kind is ReplicaKind.CENTRAL:
                self._central_confirmed.add(record_id)
            if self._on_append is not None:
                self._on_append(envelope)
            return AddResult.ADDED

    def add_strict(self, envelope: SignedEnvelope) -> AddResult:
        """Like add(), but an id collision raises instead of quarantining."""
        result = self.add(envelope)
        if result is AddResult.QUARANTINED:
            raise IntegrityError(
                f"record {envelope.record_id()} already stored with different bytes"
            )
        return result

    def confirm_central(self, record_ids: Iterable[str]) -> None:
        with self._lock:
            self._central_confirmed.update(r for r in record_ids if r in self._envelopes)

    def evict_over_capacity(self) -> list[str]:
        """Drop oldest centrally-confirmed records while over capacity.

        Unconfirmed records are never evicted, even if the card stays over
        its limit: a dose must never exist nowhere.
        """
        with self._lock:
            if self.capacity_limit is None or len(self._envelopes) <= self.capacity_limit:
                return []
            by_age = sorted(
                self._envelopes.values(),
                key=lambda e: (e.record().performed_at, e.record_id()),
            )
            evicted: list[str] = []
            confirmed = self.central_confirmed()
            for envelope in by_age:
                if len(self._envelopes) <= self.capacity_limit:
                    break
                rid = envelope.record_id()
                if rid in confirmed:
                    del self._envelopes[rid]
                    evicted.append(rid)
            return evicted
