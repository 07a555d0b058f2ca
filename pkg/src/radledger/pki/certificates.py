"""Minimal certificate authority: issuance, revocation lists, chain checks.

Certificates and revocation lists serialize under the same canonical rules as
record envelopes (sorted-key UTF-8 JSON, one line), signed by their issuer.
Revocation checking is CRL-style — a signed list that travels offline — not an
online status protocol.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Mapping, Optional

from ..canonical import canonical_json, parse_canonical
from ..dosimetry.engine import isoformat_utc, parse_utc
from ..errors import IssuanceError, VerificationError
from .signing import get_scheme


class Role(str, Enum):
    CITIZEN = "CITIZEN"
    PROFESSIONAL = "PROFESSIONAL"
    FACILITY = "FACILITY"
    CA = "CA"


class RejectReason(str, Enum):
    OK = "OK"
    BAD_SIGNATURE = "BAD_SIGNATURE"
    UNKNOWN_SIGNER = "UNKNOWN_SIGNER"
    UNKNOWN_ISSUER = "UNKNOWN_ISSUER"
    EXPIRED = "EXPIRED"
    NOT_YET_VALID = "NOT_YET_VALID"
    REVOKED = "REVOKED"
    CHAIN_CYCLE = "CHAIN_CYCLE"
    UNTRUSTED_ROOT = "UNTRUSTED_ROOT"


@dataclass(frozen=True)
class VerificationResult:
    accepted: bool
    reason: RejectReason
    detail: str = ""

    def __bool__(self) -> bool:
        return self.accepted


@dataclass(frozen=True)
class Certificate:
    cert_id: str
    subject: str
    role: Role
    scheme: str
    public_key: bytes
    issuer_id: str  # equals cert_id for a self-signed root
    not_before: datetime
    not_after: datetime
    signature: bytes

    @staticmethod
    def derive_id(scheme: str, public_key: bytes, subject: str, role: Role,
                  not_before: datetime, not_after: datetime) -> str:
        # Content-derived id: distinct keys or windows give distinct ids,
        # with no central counter needed at offline issuance points.
        material = canonical_json(
            {
                "scheme": scheme,
                "public_key": public_key.hex(),
                "subject": subject,
                "role": role.value,
                "not_before": isoformat_utc(not_before),
                "not_after": isoformat_utc(not_after),
            }
        )
        return hashlib.sha256(material).hexdigest()[:32]

    def unsigned_body(self) -> bytes:
        return canonical_json(
            {
                "cert_id": self.cert_id,
                "subject": self.subject,
                "role": self.role.value,
                "scheme": self.scheme,
                "public_key": self.public_key.hex(),
                "issuer_id": self.issuer_id,
                "not_before": isoformat_utc(self.not_before),
                "not_after": isoformat_utc(self.not_after),
            }
        )

    def in_validity_window(self, at_time: datetime) -> bool:
        return self.not_before <= at_time <= self.not_after

    def is_self_signed(self) -> bool:
        return self.issuer_id == self.cert_id

    def to_text(self) -> str:
        obj = parse_canonical(self.unsigned_body())
        obj["signature"] = self.signature.hex()
        return canonical_json(obj).decode("utf-8")

    @classmethod
    def from_text(cls, text: str) -> "Certificate":
        obj = parse_canonical(text.encode("utf-8"))
        return cls(
            cert_id=obj["cert_id"],
            subject=obj["subject"],
            role=Role(obj["role"]),
            scheme=obj["scheme"],
            public_key=bytes.fromhex(obj["public_key"]),
            issuer_id=obj["issuer_id"],
            not_before=parse_utc(obj["not_before"]),
            not_after=parse_utc(obj["not_after"]),
            signature=bytes.fromhex(obj["signature"]),
        )


@dataclass(frozen=True)
class RevocationList:
    issuer_id: str
    revoked: tuple[tuple[str, datetime], ...]  # (cert_id, revoked_at)
    issued_at: datetime
    signature: bytes

    def unsigned_body(self) -> bytes:
        return canonical_json(
            {
                "issuer_id": self.issuer_id,
                "revoked": [
                    {"cert_id": cid, "revoked_at": isoformat_utc(at)}
                    for cid, at in sorted(self.revoked)
                ],
                "issued_at": isoformat_utc(self.issued_at),
            }
        )

    def revoked_at(self, cert_id: str) -> Optional[datetime]:
        for cid, at in self.revoked:
            if cid == cert_id:
                return at
        return None

    def is_revoked(self, cert_id: str, at_time: datetime) -> bool:
        revoked_at = self.revoked_at(cert_id)
        return revoked_at is not None and at_time >= revoked_at

    def verify(self, issuer: Certificate) -> bool:
        scheme = get_scheme(issuer.scheme)
        return scheme.verify(issuer.public_key, self.unsigned_body(), self.signature)

    def to_text(self) -> str:
        obj = parse_canonical(self.unsigned_body())
        obj["signature"] = self.signature.hex()
        return canonical_json(obj).decode("utf-8")

    @classmethod
    def from_text(cls, text: str) -> "RevocationList":
        obj = parse_canonical(text.encode("utf-8"))
        return cls(
            issuer_id=obj["issuer_id"],
            revoked=tuple(
                (e["cert_id"], parse_utc(e["revoked_at"])) for e in obj["revoked"]
            ),
            issued_at=parse_utc(obj["issued_at"]),
            signature=bytes.fromhex(obj["signature"]),
        )


def _utcnow() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


class CertificateAuthority:
    """Root of trust: issues, tracks, and revokes certificates."""

    def __init__(self, cert: Certificate, private_key: bytes):
        self.cert = cert
        self._private_key = private_key
        self.issued: dict[str, Certificate] = {cert.cert_id: cert}
        self._revoked: dict[str, datetime] = {}

    @classmethod
    def create(
        cls,
        name: str,
        scheme: str = "ed25519",
        validity_days: int = 3650,
        now: Optional[datetime] = None,
        seed: Optional[bytes] = None,
    ) -> "CertificateAuthority":
        now = now or _utcnow()
        keys = get_scheme(scheme).generate_keypair(seed)
        not_after = now + timedelta(days=validity_days)
        cert_id = Certificate.derive_id(scheme, keys.public_key, name, Role.CA, now, not_after)
        unsigned = Certificate(
            cert_id=cert_id,
            subject=name,
            role=Role.CA,
            scheme=scheme,
            public_key=keys.public_key,
            issuer_id=cert_id,
            not_before=now,
            not_after=not_after,
            signature=b"",
        )
        signature = get_scheme(scheme).sign(keys.private_key, unsigned.unsigned_body())
        return cls(replace(unsigned, signature=signature), keys.private_key)

    def issue(
        self,
        subject: str,
        role: Role,
        public_key: bytes,
        scheme: Optional[str] = None,
        validity_days: int = 1825,
        now: Optional[datetime] = None,
    ) -> Certificate:
        now = now or _utcnow()
        if not self.cert.in_validity_window(now):
            raise IssuanceError("issuing certificate is outside its validity window")
        if self._revoked.get(self.cert.cert_id):
            raise IssuanceError("issuing certificate is revoked")
        scheme = scheme or self.cert.scheme
        not_after = now + timedelta(days=validity_days)
        cert_id = Certificate.derive_id(scheme, public_key, subject, role, now, not_after)
        unsigned = Certificate(
            cert_id=cert_id,
            subject=subject,
            role=role,
            scheme=scheme,
            public_key=public_key,
            issuer_id=self.cert.cert_id,
            not_before=now,
            not_after=not_after,
            signature=b"",
        )
        signature = get_scheme(self.cert.scheme).sign(
            self._private_key, unsigned.unsigned_body()
        )
        cert = replace(unsigned, signature=signature)
        self.issued[cert.cert_id] = cert
        return cert

    def revoke(self, cert_id: str, at: Optional[datetime] = None) -> None:
        if cert_id not in self.issued:
            raise VerificationError(f"cannot revoke unknown certificate {cert_id}")
        self._revoked.setdefault(cert_id, at or _utcnow())

    def certs_for_subject(self, subject: str, role: Optional[Role] = None) -> list[Certificate]:
        return [
            c
            for c in self.issued.values()
            if c.subject == subject and (role is None or c.role is role)
        ]

    def crl(self, issued_at: Optional[datetime] = None) -> RevocationList:
        unsigned = RevocationList(
            issuer_id=self.cert.cert_id,
            revoked=tuple(sorted(self._revoked.items())),
            issued_at=issued_at or _utcnow(),
            signature=b"",
        )
        signature = get_scheme(self.cert.scheme).sign(
            self._private_key, unsigned.unsigned_body()
        )
        return replace(unsigned, signature=signature)

    def resolver(self) -> dict[str, Certificate]:
        return dict(self.issued)

    def to_json_obj(self) -> dict:
        return {
            "certificate": self.cert.to_text(),
            "private_key": self._private_key.hex(),
            "issued": [c.to_text() for c in self.issued.values()],
            "revoked": {cid: isoformat_utc(at) for cid, at in self._revoked.items()},
        }

    def save(self, path) -> None:
        from pathlib import Path

        Path(path).write_text(
            canonical_json(self.to_json_obj()).decode("utf-8") + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path) -> "CertificateAuthority":
        from pathlib import Path

        obj = parse_canonical(Path(path).read_text(encoding="utf-8").strip().encode("utf-8"))
        ca = cls(
            Certificate.from_text(obj["certificate"]),
            bytes.fromhex(obj["private_key"]),
        )
        for text in obj.get("issued", []):
            cert = Certificate.from_text(text)
            ca.issued[cert.cert_id] = cert
        ca._revoked = {cid: parse_utc(at) for cid, at in obj.get("revoked", {}).items()}
        return ca


def verify_chain(
    cert: Certificate,
    trust_root: Certificate,
    resolver: Mapping[str, Certificate],
    at_time: datetime,
    crl: Optional[RevocationList] = None,
) -> VerificationResult:
    """Walk issuer links to the trust root, checking windows, signatures,
    revocation, cycles, and unknown issuers at every hop."""
    current = cert
    seen: set[str] = set()
    while True:
        if current.cert_id in seen:
            return VerificationResult(False, RejectReason.CHAIN_CYCLE, current.cert_id)
        seen.add(current.cert_id)

        if at_time < current.not_before:
            return VerificationResult(False, RejectReason.NOT_YET_VALID, current.cert_id)
        if at_time > current.not_after:
            return VerificationResult(False, RejectReason.EXPIRED, current.cert_id)
        if crl is not None and crl.is_revoked(current.cert_id, at_time):
            return VerificationResult(False, RejectReason.REVOKED, current.cert_id)

        if current.is_self_signed():
            scheme = get_scheme(current.scheme)
            if not scheme.verify(
                current.public_key, current.unsigned_body(), current.signature
            ):
                return VerificationResult(False, RejectReason.BAD_SIGNATURE, current.cert_id)
            if current.cert_id != trust_root.cert_id:
                return VerificationResult(False, RejectReason.UNTRUSTED_ROOT, current.cert_id)
            return VerificationResult(True, RejectReason.OK)

        issuer = resolver.get(current.issuer_id)
        if issuer is None:
            return VerificationResult(False, RejectReason.UNKNOWN_ISSUER, current.issuer_id)
        if not get_scheme(issuer.scheme).verify(
            issuer.public_key, current.unsigned_body(), current.signature
        ):
            return VerificationResult(False, RejectReason.BAD_SIGNATURE, current.cert_id)
        current = issuer


def verify_envelope(
    envelope,
    trust_root: Certificate,
    resolver: Mapping[str, Certificate],
    at_time: datetime,
    crl: Optional[RevocationList] = None,
) -> VerificationResult:
    """Accept or reject a signed envelope; rejection is a value, not a fault.

    ``envelope`` needs ``payload``/``signature`` bytes and a
    ``signer_cert_id``. ``at_time`` should be the record's performed-at time
    so post-revocation signatures by an old card are rejected while its
    earlier records stay valid.
    """
    signer = resolver.get(envelope.signer_cert_id)
    if signer is None:
        return VerificationResult(False, RejectReason.UNKNOWN_SIGNER, envelope.signer_cert_id)
    if not get_scheme(signer.scheme).verify(
        signer.public_key, envelope.payload, envelope.signature
    ):
        return VerificationResult(False, RejectReason.BAD_SIGNATURE, envelope.signer_cert_id)
    return verify_chain(signer, trust_root, resolver, at_time, crl)
