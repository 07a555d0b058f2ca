"""Immutable signed investigation records.

A record is one radiological act: who, what, when, where, the raw machine
output, and the effective dose the engine computed from it. Records never
change after signing; corrections are new records of kind CORRECTION
referencing the original. The canonical payload bytes are the unit of
signing, storage, and replication.
"""
from __future__ import annotations

import uuid
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from random import Random
from typing import Optional, Union

from ..canonical import canonical_json, format_decimal, parse_canonical, parse_decimal
from ..dosimetry.units import DoseUnit
from ..dosimetry import (
    ENGINE_VERSION,
    CtScanParameters,
    DoseQuantity,
    DosimetryTables,
    RadiographyParameters,
    compute_dlp,
    ct_reference_dose,
    effective_dose_from_dap,
    effective_dose_from_dlp,
    isoformat_utc,
    parse_utc,
)
from ..errors import AuthorizationError, DomainError, IntegrityError

RECOMPUTE_TOLERANCE = 1e-9


class Modality(str, Enum):
    RADIOGRAPHY = "RADIOGRAPHY"
    CT = "CT"


class RecordKind(str, Enum):
    INVESTIGATION = "INVESTIGATION"
    CORRECTION = "CORRECTION"


@dataclass(frozen=True)
class CatalogReference:
    """Stand-in raw input when the machine reported no dose: use the catalog."""

    exam: str


RawInput = Union[RadiographyParameters, CtScanParameters, CatalogReference]


def compute_effective_dose(raw_input: RawInput, tables: DosimetryTables) -> tuple[DoseQuantity, Modality]:
    """Dispatch a raw machine output to the engine; the one recompute path."""
    if isinstance(raw_input, RadiographyParameters):
        return effective_dose_from_dap(raw_input, tables), Modality.RADIOGRAPHY
    if isinstance(raw_input, CtScanParameters):
        dlp = compute_dlp(raw_input)
        return effective_dose_from_dlp(dlp, raw_input.anatomy, tables), Modality.CT
    if isinstance(raw_input, CatalogReference):
        return ct_reference_dose(raw_input.exam, tables), Modality.CT
    raise DomainError(f"unsupported raw input {type(raw_input).__name__}")


def _raw_input_to_obj(raw: RawInput) -> dict:
    if isinstance(raw, RadiographyParameters):
        return {
            "type": "radiography",
            "dap_mgy_cm2": format_decimal(raw.dap.value),
            "irradiated_area_cm2": format_decimal(raw.irradiated_area_cm2),
            "exposed_tissues": sorted(raw.exposed_tissues),
        }
    if isinstance(raw, CtScanParameters):
        return {
            "type": "ct",
            "ctdi_vol_mgy": format_decimal(raw.ctdi_vol.value),
            "scan_length_cm": format_decimal(raw.scan_length_cm),
            "anatomy": raw.anatomy,
        }
    if isinstance(raw, CatalogReference):
        return {"type": "catalog", "exam": raw.exam}
    raise DomainError(f"unsupported raw input {type(raw).__name__}")


def parse_raw_input(obj: dict) -> RawInput:
    """Raw machine input from a request/scenario JSON object.

    Accepts numeric or string magnitudes; the canonical payload form (string
    decimals) and the API form (JSON numbers) both land here.
    """
    kind = obj.get("type", "catalog")
    if kind == "catalog":
        return CatalogReference(exam=obj["exam"])
    if kind == "ct":
        return CtScanParameters(
            ctdi_vol=DoseQuantity.mgy(float(obj["ctdi_vol_mgy"])),
            scan_length_cm=float(obj["scan_length_cm"]),
            anatomy=obj["anatomy"],
        )
    if kind == "radiography":
        return RadiographyParameters(
            dap=DoseQuantity.mgy_cm2(float(obj["dap_mgy_cm2"])),
            irradiated_area_cm2=float(obj["irradiated_area_cm2"]),
            exposed_tissues=tuple(obj["exposed_tissues"]),
        )
    raise DomainError(f"unknown raw input type {kind!r}")


def _raw_input_from_obj(obj: dict) -> RawInput:
    kind = obj.get("type")
    if kind == "radiography":
        return RadiographyParameters(
            dap=DoseQuantity.mgy_cm2(parse_decimal(obj["dap_mgy_cm2"])),
            irradiated_area_cm2=parse_decimal(obj["irradiated_area_cm2"]),
            exposed_tissues=tuple(obj["exposed_tissues"]),
        )
    if kind == "ct":
        return CtScanParameters(
            ctdi_vol=DoseQuantity.mgy(parse_decimal(obj["ctdi_vol_mgy"])),
            scan_length_cm=parse_decimal(obj["scan_length_cm"]),
            anatomy=obj["anatomy"],
        )
    if kind == "catalog":
        return CatalogReference(exam=obj["exam"])
    raise IntegrityError(f"unknown raw input type {kind!r}")


@dataclass(frozen=True)
class InvestigationRecord:
    record_id: str
    patient_id: str
    performed_at: datetime
    facility_id: str
    operator_id: str
    exam_type: str
    modality: Modality
    raw_input: RawInput
    effective_dose: DoseQuantity
    engine_version: str = ENGINE_VERSION
    kind: RecordKind = RecordKind.INVESTIGATION
    corrects: Optional[str] = None

    def to_payload_obj(self) -> dict:
        obj = {
            "record_id": self.record_id,
            "patient_id": self.patient_id,
            "performed_at": isoformat_utc(self.performed_at),
            "facility_id": self.facility_id,
            "operator_id": self.operator_id,
            "exam_type": self.exam_type,
            "modality": self.modality.value,
            "raw_input": _raw_input_to_obj(self.raw_input),
            "effective_msv": format_decimal(self.effective_dose.expect(DoseUnit.MSV).value),
            "engine_version": self.engine_version,
            "kind": self.kind.value,
        }
        if self.corrects is not None:
            obj["corrects"] = self.corrects
        return obj

    def canonical_bytes(self) -> bytes:
        return canonical_json(self.to_payload_obj())

    @classmethod
    def from_payload_obj(cls, obj: dict) -> "InvestigationRecord":
        return cls(
            record_id=obj["record_id"],
            patient_id=obj["patient_id"],
            performed_at=parse_utc(obj["performed_at"]),
            facility_id=obj["facility_id"],
            operator_id=obj["operator_id"],
            exam_type=obj["exam_type"],
            modality=Modality(obj["modality"]),
            raw_input=_raw_input_from_obj(obj["raw_input"]),
            effective_dose=DoseQuantity.msv(parse_decimal(obj["effective_msv"])),
            engine_version=obj["engine_version"],
            kind=RecordKind(obj["kind"]),
            corrects=obj.get("corrects"),
        )


@dataclass(frozen=True)
class SignedEnvelope:
    """Canonical payload bytes plus the signature that makes them evidence."""

    payload: bytes
    signature: bytes
    signer_cert_id: str

    def record(self) -> InvestigationRecord:
        return InvestigationRecord.from_payload_obj(parse_canonical(self.payload))

    def record_id(self) -> str:
        return parse_canonical(self.payload)["record_id"]

    def to_json_obj(self) -> dict:
        return {
            "payload": self.payload.decode("utf-8"),
            "signature": self.signature.hex(),
            "signer_cert_id": self.signer_cert_id,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SignedEnvelope":
        return cls(
            payload=obj["payload"].encode("utf-8"),
            signature=bytes.fromhex(obj["signature"]),
            signer_cert_id=obj["signer_cert_id"],
        )

    def to_line(self) -> bytes:
        """One byte-exact log line (newline-terminated)."""
        return canonical_json(self.to_json_obj()) + b"\n"

    @classmethod
    def from_line(cls, line: bytes) -> "SignedEnvelope":
        return cls.from_json_obj(parse_canonical(line.rstrip(b"\n")))


def new_record_id(rng: Optional[Random] = None) -> str:
    """128-bit random id minted at the creating facility; no coordination."""
    if rng is None:
        return uuid.uuid4().hex
    return uuid.UUID(int=rng.getrandbits(128), version=4).hex


def create_record(
    *,
    patient_id: str,
    exam_type: str,
    raw_input: RawInput,
    signer,
    tables: DosimetryTables,
    facility_id: str,
    operator_id: str,
    performed_at: datetime,
    crl=None,
    kind: RecordKind = RecordKind.INVESTIGATION,
    corrects: Optional[str] = None,
    rng: Optional[Random] = None,
) -> SignedEnvelope:
    """Compute the dose, freeze the record, and sign it.

    ``signer`` is anything card-shaped: a ``certificate`` attribute and a
    ``sign(payload) -> bytes`` method. The signer certificate must be inside
    its validity window and unrevoked at ``performed_at``.
    """
    cert = signer.certificate
    if not cert.in_validity_window(performed_at):
        raise AuthorizationError(
            f"signer certificate {cert.cert_id} not valid at {isoformat_utc(performed_at)}"
        )
    if crl is not None and crl.is_revoked(cert.cert_id, performed_at):
        raise AuthorizationError(f"signer certificate {cert.cert_id} is revoked")

    effective, modality = compute_effective_dose(raw_input, tables)
    record = InvestigationRecord(
        record_id=new_record_id(rng),
        patient_id=patient_id,
        performed_at=performed_at,
        facility_id=facility_id,
        operator_id=operator_id,
        exam_type=exam_type,
        modality=modality,
        raw_input=raw_input,
        effective_dose=effective,
        kind=kind,
        corrects=corrects,
    )
    payload = record.canonical_bytes()
    return SignedEnvelope(
        payload=payload, signature=signer.sign(payload), signer_cert_id=cert.cert_id
    )


def verify_recompute(record: InvestigationRecord, tables: DosimetryTables) -> bool:
    """Recompute the dose from the raw input; must match the stored value."""
    if record.engine_version != ENGINE_VERSION:
        return True  # a different engine may legitimately disagree
    recomputed, _ = compute_effective_dose(record.raw_input, tables)
    return abs(recomputed.value - record.effective_dose.value) <= RECOMPUTE_TOLERANCE
