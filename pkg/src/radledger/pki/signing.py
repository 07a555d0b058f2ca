"""Signature scheme abstraction with two bindings.

Production signing uses Ed25519 (deterministic per RFC 8032, which keeps
request replays byte-identical). The ``hmac-demo`` binding is a keyed-MAC
stand-in for reproducible fixtures and simulations: it is symmetric (the
"public" key equals the secret) and must never guard real data.
"""
from __future__ import annotations

import hashlib
import hmac
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from ..errors import ConfigError


@dataclass(frozen=True)
class KeyPair:
    private_key: bytes
    public_key: bytes


class SignatureScheme(ABC):
    name: str

    @abstractmethod
    def generate_keypair(self, seed: Optional[bytes] = None) -> KeyPair:
        """Fresh keypair; a 32-byte seed makes generation deterministic."""

    @abstractmethod
    def sign(self, private_key: bytes, payload: bytes) -> bytes: ...

    @abstractmethod
    def verify(self, public_key: bytes, payload: bytes, signature: bytes) -> bool: ...


class Ed25519Scheme(SignatureScheme):
    name = "ed25519"

    def generate_keypair(self, seed: Optional[bytes] = None) -> KeyPair:
        if seed is not None:
            if len(seed) != 32:
                seed = hashlib.sha256(seed).digest()
            key = Ed25519PrivateKey.from_private_bytes(seed)
        else:
            key = Ed25519PrivateKey.generate()
        return KeyPair(
            private_key=key.private_bytes_raw(),
            public_key=key.public_key().public_bytes_raw(),
        )

    def sign(self, private_key: bytes, payload: bytes) -> bytes:
        return Ed25519PrivateKey.from_private_bytes(private_key).sign(payload)

    def verify(self, public_key: bytes, payload: bytes, signature: bytes) -> bool:
        try:
            Ed25519PublicKey.from_public_bytes(public_key).verify(signature, payload)
            return True
        except (InvalidSignature, ValueError):
            return False


class HmacDemoScheme(SignatureScheme):
    """Deterministic test binding; symmetric, NOT for production."""

    name = "hmac-demo"

    def generate_keypair(self, seed: Optional[bytes] = None) -> KeyPair:
        key = hashlib.sha256(seed).digest() if seed is not None else os.urandom(32)
        return KeyPair(private_key=key, public_key=key)

    def sign(self, private_key: bytes, payload: bytes) -> bytes:
        return hmac.new(private_key, payload, hashlib.sha256).digest()

    def verify(self, public_key: bytes, payload: bytes, signature: bytes) -> bool:
        expected = hmac.new(public_key, payload, hashlib.sha256).digest()
        return hmac.compare_digest(expected, signature)


_SCHEMES: dict[str, SignatureScheme] = {
    s.name: s for s in (Ed25519Scheme(), HmacDemoScheme())
}


def get_scheme(name: str) -> SignatureScheme:
    try:
        return _SCHEMES[name]
    except KeyError:
        raise ConfigError(f"unknown signature scheme {name!r}") from None
