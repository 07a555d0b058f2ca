"""Emulated radiation-safety smart cards.

A card is a keypair that never leaves the device, a holder certificate, a
small on-card record store, and a PIN. The emulator exposes the same command
surface a reader would drive (SELECT / UNLOCK / READ RECORDS / APPEND / SIGN)
and enforces the 3-strike PIN lock; the private key is reachable only through
``sign``. Card files persist the whole card, standing in for the plastic.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Optional

from ..canonical import canonical_json, parse_canonical
from ..dosimetry.engine import isoformat_utc
from ..errors import AuthorizationError, DomainError
from ..ledger.records import SignedEnvelope
from ..sync.replica import ReplicaKind, ReplicaStore
from .certificates import Certificate, CertificateAuthority, Role
from .signing import get_scheme

MAX_PIN_ATTEMPTS = 3

DEFAULT_CARD_CAPACITY = 200


class CardKind(str, Enum):
    CITIZEN = "CITIZEN"          # patient card (CRSC)
    PROFESSIONAL = "PROFESSIONAL"  # staff card (PRSC)

    @property
    def code(self) -> str:
        return {"CITIZEN": "CRSC", "PROFESSIONAL": "PRSC"}[self.value]

    @classmethod
    def parse(cls, text: str) -> "CardKind":
        norm = text.strip().upper()
        aliases = {"CRSC": cls.CITIZEN, "PRSC": cls.PROFESSIONAL}
        if norm in aliases:
            return aliases[norm]
        try:
            return cls(norm)
        except ValueError:
            raise DomainError(f"unknown card kind {text!r}") from None

    @property
    def role(self) -> Role:
        return Role.CITIZEN if self is CardKind.CITIZEN else Role.PROFESSIONAL


def _hash_pin(pin: str) -> str:
    return hashlib.sha256(("card-pin:" + pin).encode("utf-8")).hexdigest()


@dataclass
class PinState:
    pin_hash: str
    failed_attempts: int = 0
    locked: bool = False
    unlocked: bool = False


class EmulatedCard:
    """One card session; operations are strictly serialized by the caller."""

    def __init__(
        self,
        kind: CardKind,
        holder: str,
        certificate: Certificate,
        private_key: bytes,
        pin: str,
        capacity: Optional[int] = DEFAULT_CARD_CAPACITY,
        _pin_state: Optional[PinState] = None,
        _store: Optional[ReplicaStore] = None,
    ):
        self.kind = kind
        self.holder = holder
        self.certificate = certificate
        self.__private_key = private_key
        self.pin_state = _pin_state or PinState(pin_hash=_hash_pin(pin))
        self.store = _store or ReplicaStore(
            ReplicaKind.CARD, f"card-{certificate.cert_id[:8]}", capacity_limit=capacity
        )

    # -- command surface -------------------------------------------------

    def select(self) -> dict:
        """SELECT: card identity, no secrets."""
        return {
            "card_kind": self.kind.code,
            "holder": self.holder,
            "cert_id": self.certificate.cert_id,
            "records": self.store.size(),
            "locked": self.pin_state.locked,
        }

    def unlock(self, pin: str) -> bool:
        """UNLOCK: 3 failed attempts lock the card permanently."""
        if self.pin_state.locked:
            raise AuthorizationError("card is locked")
        if _hash_pin(pin) == self.pin_state.pin_hash:
            self.pin_state.failed_attempts = 0
            self.pin_state.unlocked = True
            return True
        self.pin_state.failed_attempts += 1
        if self.pin_state.failed_attempts >= MAX_PIN_ATTEMPTS:
            self.pin_state.locked = True
        return False

    def lock_session(self) -> None:
        self.pin_state.unlocked = False

    def read_records(self) -> list[SignedEnvelope]:
        """READ RECORDS: the on-card history, available without a PIN."""
        return self.store.envelopes()

    def append_record(self, envelope: SignedEnvelope):
        """APPEND: grow-only; collisions quarantine as on any replica."""
        return self.store.add(envelope)

    def sign(self, payload: bytes, now: Optional[datetime] = None) -> bytes:
        """SIGN: the only operation that touches the private key."""
        if self.pin_state.locked:
            raise AuthorizationError("card is locked")
        if not self.pin_state.unlocked:
            raise AuthorizationError("card PIN not presented")
        now = now or datetime.now(timezone.utc)
        if not self.certificate.in_validity_window(now):
            raise AuthorizationError(
                f"card certificate outside validity window at {isoformat_utc(now)}"
            )
        return get_scheme(self.certificate.scheme).sign(self.__private_key, payload)

    # -- persistence ------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "card_kind": self.kind.value,
            "holder": self.holder,
            "certificate": self.certificate.to_text(),
            "private_key": self.__private_key.hex(),
            "pin": {
                "pin_hash": self.pin_state.pin_hash,
                "failed_attempts": self.pin_state.failed_attempts,
                "locked": self.pin_state.locked,
            },
            "capacity": self.store.capacity_limit,
            "envelopes": [e.to_json_obj() for e in self.store.envelopes()],
            "central_confirmed": sorted(self.store.central_confirmed()),
        }

    def to_text(self) -> str:
        return canonical_json(self.to_json_obj()).decode("utf-8")

    @classmethod
    def from_json_obj(cls, obj: dict) -> "EmulatedCard":
        cert = Certificate.from_text(obj["certificate"])
        pin_state = PinState(
            pin_hash=obj["pin"]["pin_hash"],
            failed_attempts=obj["pin"]["failed_attempts"],
            locked=obj["pin"]["locked"],
        )
        store = ReplicaStore(
            ReplicaKind.CARD, f"card-{cert.cert_id[:8]}", capacity_limit=obj["capacity"]
        )
        for env_obj in obj["envelopes"]:
            store.add(SignedEnvelope.from_json_obj(env_obj))
        store.confirm_central(obj.get("central_confirmed", []))
        return cls(
            kind=CardKind(obj["card_kind"]),
            holder=obj["holder"],
            certificate=cert,
            private_key=bytes.fromhex(obj["private_key"]),
            pin="",  # replaced by _pin_state
            _pin_state=pin_state,
            _store=store,
        )

    @classmethod
    def from_text(cls, text: str) -> "EmulatedCard":
        return cls.from_json_obj(parse_canonical(text.encode("utf-8")))


def personalize_card(
    kind: CardKind,
    holder: str,
    ca: CertificateAuthority,
    pin: str,
    validity_days: int = 1825,
    capacity: Optional[int] = DEFAULT_CARD_CAPACITY,
    now: Optional[datetime] = None,
    seed: Optional[bytes] = None,
) -> EmulatedCard:
    """Personalization: generate keys on-card, issue the holder certificate."""
    scheme = get_scheme(ca.cert.scheme)
    keys = scheme.generate_keypair(seed)
    cert = ca.issue(
        subject=holder,
        role=kind.role,
        public_key=keys.public_key,
        validity_days=validity_days,
        now=now,
    )
    return EmulatedCard(
        kind=kind,
        holder=holder,
        certificate=cert,
        private_key=keys.private_key,
        pin=pin,
        capacity=capacity,
    )


def replace_card(
    holder: str,
    central: ReplicaStore,
    ca: CertificateAuthority,
    pin: str,
    capacity: Optional[int] = DEFAULT_CARD_CAPACITY,
    now: Optional[datetime] = None,
    seed: Optional[bytes] = None,
) -> EmulatedCard:
    """Rebuild a lost or destroyed citizen card from the central store.

    The old certificates are revoked; the new card holds the holder's most
    recent records up to capacity, all centrally confirmed by construction.
    A holder with neither central records nor a personalization history is
    unknown and cannot be replaced.
    """
    now = now or datetime.now(timezone.utc).replace(microsecond=0)
    if central.kind is not ReplicaKind.CENTRAL:
        raise DomainError("replacement requires the central store")
    history = central.envelopes_for_patient(holder)
    previous = ca.certs_for_subject(holder, Role.CITIZEN)
    if not history and not previous:
        raise DomainError(f"holder {holder!r} unknown centrally; cannot replace card")

    for cert in previous:
        ca.revoke(cert.cert_id, at=now)

    card = personalize_card(
        CardKind.CITIZEN, holder, ca, pin, capacity=capacity, now=now, seed=seed
    )
    most_recent_first = sorted(
        history, key=lambda e: (e.record().performed_at, e.record_id()), reverse=True
    )
    keep = most_recent_first if capacity is None else most_recent_first[:capacity]
    for envelope in keep:
        card.store.add(envelope)
    card.store.confirm_central(e.record_id() for e in keep)
    return card
