"""Pairwise anti-entropy between replicas, and the read-source decision table.

Merging is set union over signed envelopes keyed by record id, so it is
idempotent, commutative, and associative; any connected sequence of pairwise
merges converges all replicas to the same set. Central-presence
acknowledgements ride along with merges so cards know what is safe to evict.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..errors import NoStoreReachableError
from ..ledger.records import SignedEnvelope
from .replica import AddResult, ConnectivityState, ReplicaKind, ReplicaStore, SyncFault


@dataclass
class SyncOutcome:
    transferred: dict[str, int] = field(default_factory=dict)  # "a->b" direction keys
    resulting_sizes: dict[str, int] = field(default_factory=dict)
    faults: list[SyncFault] = field(default_factory=list)
    evicted: dict[str, list[str]] = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "transferred": dict(self.transferred),
            "resulting_sizes": dict(self.resulting_sizes),
            "faults": [f.to_json_obj() for f in self.faults],
            "evicted": {k: list(v) for k, v in self.evicted.items()},
        }


def _copy_missing(src: ReplicaStore, dst: ReplicaStore) -> tuple[int, list[SyncFault]]:
    moved = 0
    faults: list[SyncFault] = []
    for envelope in src.envelopes():
        result = dst.add(envelope)
        if result is AddResult.ADDED:
            moved += 1
        elif result in (AddResult.QUARANTINED, AddResult.REJECTED):
            faults.append(dst.faults()[-1])
    return moved, faults


def merge(a: ReplicaStore, b: ReplicaStore) -> SyncOutcome:
    """Union both stores; faulty envelopes are quarantined, the rest proceed."""
    outcome = SyncOutcome()
    a_to_b, faults_b = _copy_missing(a, b)
    b_to_a, faults_a = _copy_missing(b, a)
    outcome.transferred[f"{a.replica_id}->{b.replica_id}"] = a_to_b
    outcome.transferred[f"{b.replica_id}->{a.replica_id}"] = b_to_a
    outcome.faults.extend(faults_b)
    outcome.faults.extend(faults_a)

    # Central-presence acks flow both ways; a CENTRAL participant confirms
    # everything it now holds.
    confirmed = a.central_confirmed() | b.central_confirmed()
    a.confirm_central(confirmed)
    b.confirm_central(confirmed)

    for store in (a, b):
        evicted = store.evict_over_capacity()
        if evicted:
            outcome.evicted[store.replica_id] = evicted
        outcome.resulting_sizes[store.replica_id] = store.size()
    return outcome


def resolve_read_source(
    conn: ConnectivityState, patient_known_locally: bool
) -> list[ReplicaKind]:
    """Where the clinician reads history from, in order of authority.

    Card present: the card leads (it works with every database down). No
    card: the local store serves patients it knows; a new patient's history
    is staged from central into local when central is reachable; with
    nothing reachable the list is empty and the clinician is told no history
    is available.
    """
    sources: list[ReplicaKind] = []
    if conn.card_present:
        sources.append(ReplicaKind.CARD)
    if conn.local_reachable:
        if patient_known_locally:
            sources.append(ReplicaKind.LOCAL)
        elif conn.central_reachable:
            sources.extend([ReplicaKind.CENTRAL, ReplicaKind.LOCAL])
    elif conn.central_reachable and not conn.card_present:
        sources.append(ReplicaKind.CENTRAL)
    return sources


def record_and_propagate(
    envelope: SignedEnvelope,
    conn: ConnectivityState,
    card_store: Optional[ReplicaStore],
    local: ReplicaStore,
    central: ReplicaStore,
) -> SyncOutcome:
    """Append a fresh envelope to every reachable store.

    Unreachable stores catch up at the next merge. If nothing is reachable
    the operation hard-fails: a dose must never go unrecorded.
    """
    targets: list[ReplicaStore] = []
    if conn.card_present and card_store is not None:
        targets.append(card_store)
    if conn.local_reachable:
        targets.append(local)
    if conn.central_reachable:
        targets.append(central)
    if not targets:
        raise NoStoreReachableError(
            f"no replica reachable to record {envelope.record_id()}"
        )

    outcome = SyncOutcome()
    for store in targets:
        result = store.add(envelope)
        if result is AddResult.ADDED:
            outcome.transferred[f"new->{store.replica_id}"] = 1
        elif result in (AddResult.QUARANTINED, AddResult.REJECTED):
            outcome.faults.append(store.faults()[-1])
        outcome.resulting_sizes[store.replica_id] = store.size()
    return outcome
