"""Signing identities stored on disk: a certificate plus its private key.

Used for service-side signing (raw-input ingestion, outbound sync auth) and
by CLI users who hold a key file rather than an emulated card. The file is a
single-line canonical JSON object; treat it like any private key material.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..canonical import canonical_json, parse_canonical
from ..pki.certificates import Certificate
from ..pki.signing import get_scheme


@dataclass(frozen=True)
class KeyIdentity:
    certificate: Certificate
    private_key: bytes

    def sign(self, payload: bytes) -> bytes:
        return get_scheme(self.certificate.scheme).sign(self.private_key, payload)

    def to_text(self) -> str:
        return canonical_json(
            {
                "certificate": self.certificate.to_text(),
                "private_key": self.private_key.hex(),
            }
        ).decode("utf-8")

    def save(self, path: Path) -> None:
        Path(path).write_text(self.to_text() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "KeyIdentity":
        obj = parse_canonical(Path(path).read_text(encoding="utf-8").strip().encode("utf-8"))
        return cls(
            certificate=Certificate.from_text(obj["certificate"]),
            private_key=bytes.fromhex(obj["private_key"]),
        )
