"""Deterministic replay of patient-visit scenarios over the three replicas.

A scenario file is a JSON event list (documented in the README): visits with
per-event connectivity, card issuance, and explicit sync events. Each step is
a deterministic state transition on the world — seeded ids and keys, no
wall-clock reads — so a replayed scenario produces a byte-stable transcript
suitable for golden tests and demos.

The visit flow mirrors clinical reality: when the card and a database are
both reachable they synchronize first, the clinician reads the resolved
history, and any performed investigation is recorded to every reachable
store.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from random import Random
from typing import Optional

from .dosimetry import DosimetryTables
from .dosimetry.engine import parse_utc
from .errors import ConfigError, DomainError
from .ledger.records import SignedEnvelope, create_record, parse_raw_input
from .pki.cards import CardKind, EmulatedCard, personalize_card
from .pki.certificates import CertificateAuthority, verify_envelope
from .sync.engine import merge, record_and_propagate, resolve_read_source
from .sync.replica import ConnectivityState, ReplicaKind, ReplicaStore

BUNDLED_SCENARIOS = ("no-card-online", "no-card-offline-local", "card-only")


def load_scenario(case: Optional[str] = None, path: Optional[Path] = None) -> dict:
    if path is not None:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    if case not in BUNDLED_SCENARIOS:
        raise ConfigError(
            f"unknown scenario case {case!r}; bundled: {', '.join(BUNDLED_SCENARIOS)}"
        )
    text = (
        resources.files("radledger")
        .joinpath("data", f"scenario_{case.replace('-', '_')}.json")
        .read_text(encoding="utf-8")
    )
    return json.loads(text)


@dataclass
class World:
    """All replicas plus trust material for one scenario run."""

    tables: DosimetryTables
    ca: CertificateAuthority
    operator: EmulatedCard
    local: ReplicaStore
    central: ReplicaStore
    cards: dict[str, EmulatedCard] = field(default_factory=dict)
    rng: Random = field(default_factory=lambda: Random(0))
    facility_id: str = "hosp-1"

    @classmethod
    def create(cls, seed: int = 0, tables: Optional[DosimetryTables] = None) -> "World":
        tables = tables or DosimetryTables.load()
        epoch = parse_utc("2020-01-01T00:00:00Z")
        ca = CertificateAuthority.create(
            "scenario-root", scheme="hmac-demo", now=epoch, seed=f"ca:{seed}".encode()
        )
        operator = personalize_card(
            CardKind.PROFESSIONAL,
            "dr-1",
            ca,
            pin="0000",
            now=epoch,
            validity_days=3650,
            seed=f"operator:{seed}".encode(),
        )
        operator.unlock("0000")
        world = cls(
            tables=tables,
            ca=ca,
            operator=operator,
            local=ReplicaStore(ReplicaKind.LOCAL, "local"),
            central=ReplicaStore(ReplicaKind.CENTRAL, "central"),
            rng=Random(seed),
        )
        verifier = world.verifier()
        world.local.verifier = verifier
        world.central.verifier = verifier
        return world

    def verifier(self):
        def verify(envelope: SignedEnvelope):
            return verify_envelope(
                envelope,
                self.ca.cert,
                self.ca.resolver(),
                envelope.record().performed_at,
                self.ca.crl(issued_at=self.ca.cert.not_before),
            )

        return verify

    def issue_card(self, patient_id: str) -> EmulatedCard:
        card = personalize_card(
            CardKind.CITIZEN,
            patient_id,
            self.ca,
            pin="0000",
            now=self.ca.cert.not_before,
            validity_days=3650,
            seed=f"card:{patient_id}:{self.rng.getrandbits(32)}".encode(),
        )
        card.store.verifier = self.verifier()
        self.cards[patient_id] = card
        return card

    def card_store(self, patient_id: str) -> Optional[ReplicaStore]:
        card = self.cards.get(patient_id)
        return card.store if card else None

    def store_by_name(self, name: str) -> ReplicaStore:
        if name == "local":
            return self.local
        if name == "central":
            return self.central
        if name.startswith("card:"):
            store = self.card_store(name.split(":", 1)[1])
            if store is None:
                raise DomainError(f"patient {name.split(':', 1)[1]!r} has no card")
            return store
        raise ConfigError(f"unknown store {name!r}")

    def store_ids(self) -> dict[str, list[str]]:
        stores = {"local": self.local, "central": self.central}
        for pid, card in self.cards.items():
            stores[f"card:{pid}"] = card.store
        return {name: sorted(s.record_ids()) for name, s in sorted(stores.items())}

    def all_envelopes(self) -> dict[str, SignedEnvelope]:
        everything: dict[str, SignedEnvelope] = {}
        for store in [self.local, self.central] + [c.store for c in self.cards.values()]:
            for env in store.envelopes():
                everything[env.record_id()] = env
        return everything


def scenario_step(world: World, event: dict) -> dict:
    """Apply one event to the world; returns the transcript entry."""
    kind = event.get("type")
    entry: dict = {"event": {k: v for k, v in event.items()}}

    if kind == "issue_card":
        card = world.issue_card(event["patient"])
        entry["card_cert_id"] = card.certificate.cert_id

    elif kind == "sync":
        a, b = (world.store_by_name(n) for n in event["pair"])
        outcome = merge(a, b)
        entry["sync"] = outcome.to_json_obj()

    elif kind == "visit":
        patient = event["patient"]
        conn = ConnectivityState(
            card_present=bool(event.get("card_present"))
            and world.card_store(patient) is not None,
            local_reachable=bool(event.get("local_reachable")),
            central_reachable=bool(event.get("central_reachable")),
        )
        card_store = world.card_store(patient) if conn.card_present else None
        known_locally = world.local.knows_patient(patient)

        sources = resolve_read_source(conn, known_locally)
        entry["read_sources"] = [s.value for s in sources]

        # New patient staged from central into local before reading.
        if sources[:2] == [ReplicaKind.CENTRAL, ReplicaKind.LOCAL]:
            for env in world.central.envelopes_for_patient(patient):
                world.local.add(env)

        # Anti-entropy over the reachable component when the card is in;
        # the second card<->local pass closes the triangle so central-only
        # records reach the card in the same visit.
        if card_store is not None:
            if conn.local_reachable and conn.central_reachable:
                merge(card_store, world.local)
                merge(world.local, world.central)
                merge(card_store, world.local)
            elif conn.local_reachable:
                merge(card_store, world.local)
            elif conn.central_reachable:
                merge(card_store, world.central)

        history: dict[str, SignedEnvelope] = {}
        store_map = {
            ReplicaKind.CARD: card_store,
            ReplicaKind.LOCAL: world.local,
            ReplicaKind.CENTRAL: world.central,
        }
        for source in sources:
            store = store_map[source]
            if store is not None:
                for env in store.envelopes_for_patient(patient):
                    history.setdefault(env.record_id(), env)
        entry["history_ids"] = sorted(history)

        investigation = event.get("investigation")
        if investigation:
            raw = parse_raw_input(investigation)
            envelope = create_record(
                patient_id=patient,
                exam_type=investigation.get("exam", getattr(raw, "anatomy", "unknown")),
                raw_input=raw,
                signer=world.operator,
                tables=world.tables,
                facility_id=world.facility_id,
                operator_id=world.operator.holder,
                performed_at=parse_utc(event["at"]),
                rng=world.rng,
            )
            outcome = record_and_propagate(
                envelope, conn, card_store, world.local, world.central
            )
            entry["recorded"] = envelope.record_id()
            entry["effective_msv"] = envelope.record().effective_dose.value
            entry["propagated_to"] = sorted(outcome.resulting_sizes)
        else:
            entry["recorded"] = None

    else:
        raise ConfigError(f"unknown scenario event type {kind!r}")

    entry["stores"] = world.store_ids()
    return entry


def replay(scenario: dict, tables: Optional[DosimetryTables] = None) -> dict:
    """Run a scenario start to finish; returns the transcript document."""
    world = World.create(seed=int(scenario.get("seed", 0)), tables=tables)
    for patient in scenario.get("cards", []):
        world.issue_card(patient)
    transcript = []
    for i, event in enumerate(scenario.get("events", []), start=1):
        entry = scenario_step(world, event)
        entry["step"] = i
        transcript.append(entry)
    return {
        "name": scenario.get("name", "unnamed"),
        "seed": int(scenario.get("seed", 0)),
        "steps": transcript,
        "final_stores": world.store_ids(),
    }
