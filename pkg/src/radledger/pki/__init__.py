from .cards import CardKind, EmulatedCard, personalize_card, replace_card
from .certificates import (
    Certificate,
    CertificateAuthority,
    RejectReason,
    RevocationList,
    Role,
    VerificationResult,
    verify_chain,
    verify_envelope,
)
from .signing import Ed25519Scheme, HmacDemoScheme, KeyPair, SignatureScheme, get_scheme

__all__ = [
    "CardKind",
    "Certificate",
    "CertificateAuthority",
    "Ed25519Scheme",
    "EmulatedCard",
    "HmacDemoScheme",
    "KeyPair",
    "RejectReason",
    "RevocationList",
    "Role",
    "SignatureScheme",
    "VerificationResult",
    "get_scheme",
    "personalize_card",
    "replace_card",
    "verify_chain",
    "verify_envelope",
]
