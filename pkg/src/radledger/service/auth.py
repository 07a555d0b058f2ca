"""Per-request certificate authentication.

Callers present their certificate and a detached signature over the request
(method, path+query, body digest, and their cert id). The service verifies
the signature and the certificate's chain to its trust root, including CRL
state — the same PKI material that signs records authenticates requests, so
there are no passwords anywhere.
"""
from __future__ import annotations

import base64
import hashlib
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Mapping, Optional

from ..errors import AuthorizationError
from ..pki.certificates import (
    Certificate,
    RevocationList,
    Role,
    verify_chain,
)
from ..pki.signing import get_scheme

CERT_HEADER = "x-client-cert"
SIGNATURE_HEADER = "x-client-signature"


def auth_message(method: str, path_qs: str, body: bytes, cert_id: str) -> bytes:
    body_digest = hashlib.sha256(body).hexdigest()
    return f"{method.upper()}\n{path_qs}\n{body_digest}\n{cert_id}".encode("utf-8")


def build_auth_headers(signer, method: str, path_qs: str, body: bytes = b"") -> dict:
    """Headers for an outgoing request; ``signer`` is card-shaped."""
    cert: Certificate = signer.certificate
    message = auth_message(method, path_qs, body, cert.cert_id)
    return {
        CERT_HEADER: base64.b64encode(cert.to_text().encode("utf-8")).decode("ascii"),
        SIGNATURE_HEADER: signer.sign(message).hex(),
    }


@dataclass(frozen=True)
class AuthenticatedClient:
    certificate: Certificate

    @property
    def role(self) -> Role:
        return self.certificate.role


def authenticate_request(
    headers: Mapping[str, str],
    method: str,
    path_qs: str,
    body: bytes,
    trust_root: Certificate,
    resolver: Mapping[str, Certificate],
    crl: Optional[RevocationList],
    now: Optional[datetime] = None,
) -> AuthenticatedClient:
    """Raise AuthorizationError unless the request proves a trusted identity."""
    cert_b64 = headers.get(CERT_HEADER)
    signature_hex = headers.get(SIGNATURE_HEADER)
    if not cert_b64 or not signature_hex:
        raise AuthorizationError("missing client certificate headers")
    try:
        cert = Certificate.from_text(base64.b64decode(cert_b64).decode("utf-8"))
        signature = bytes.fromhex(signature_hex)
    except Exception:
        raise AuthorizationError("malformed client certificate headers") from None

    now = now or datetime.now(timezone.utc)
    chain = verify_chain(cert, trust_root, {**resolver, cert.cert_id: cert}, now, crl)
    if not chain.accepted:
        raise AuthorizationError(f"client certificate rejected: {chain.reason.value}")

    message = auth_message(method, path_qs, body, cert.cert_id)
    if not get_scheme(cert.scheme).verify(cert.public_key, message, signature):
        raise AuthorizationError("request signature invalid")
    return AuthenticatedClient(cert)
