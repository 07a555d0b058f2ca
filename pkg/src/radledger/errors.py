"""Exception hierarchy shared by every radledger package.

Each class carries the CLI exit code for its error family so command
wrappers can translate failures without a lookup table.
"""


class RadLedgerError(Exception):
    exit_code = 1


class ConfigError(RadLedgerError):
    """Missing or contradictory configuration."""

    exit_code = 2


class VerificationError(RadLedgerError):
    """A signature, chain, or revocation check failed."""

    exit_code = 3


class AuthorizationError(RadLedgerError):
    """Caller lacks the credential or card state the operation needs."""

    exit_code = 3


class IntegrityError(RadLedgerError):
    """Conflicting bytes for the same record id, or a non-verifying stored envelope."""

    exit_code = 4


class UnitError(RadLedgerError):
    """Arithmetic attempted between mismatched radiological units."""


class DomainError(RadLedgerError):
    """Input outside the operation's domain (negative dose, zero area, bad range)."""


class MissingFactorError(RadLedgerError):
    """Tissue or anatomy has no registered conversion factor; never defaulted silently."""


class MissingCatalogEntryError(RadLedgerError):
    """Exam type absent from the reference catalog."""


class IssuanceError(RadLedgerError):
    """Certificate issuance refused (issuer expired or revoked)."""


class NoStoreReachableError(RadLedgerError):
    """A dose was about to go unrecorded: no replica store reachable."""

    exit_code = 4


class WireFormatError(IntegrityError):
    """Sync batch bytes do not parse under the documented layout."""
