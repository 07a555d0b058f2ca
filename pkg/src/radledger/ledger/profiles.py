"""Per-patient derived views: history, cumulative dose, flags, what-ifs.

Profiles are pure derivations over a record set — deterministic, ordered by
(performed_at, record_id), order-independent of input arrival. The age-risk
multiplier scales only the displayed risk figure, never the stored doses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Callable, Iterable, Optional

from ..dosimetry import (
    DoseQuantity,
    DosimetryTables,
    LimitFlag,
    LimitPolicy,
    SubjectKind,
    age_risk_multiplier,
    check_limits,
    chest_equivalents,
    classify_threshold,
    isoformat_utc,
)
from ..dosimetry.engine import DAYS_PER_YEAR
from ..dosimetry.tables import ThresholdBand
from ..errors import IntegrityError, MissingCatalogEntryError
from .records import (
    CatalogReference,
    InvestigationRecord,
    RawInput,
    SignedEnvelope,
    compute_effective_dose,
)

PROFILE_WINDOWS = {
    "365d": timedelta(days=DAYS_PER_YEAR),
    "1825d": timedelta(days=5 * DAYS_PER_YEAR),
}


@dataclass(frozen=True)
class AgeRiskNote:
    """Display-only: the stored physical doses are never scaled."""

    age_years: int
    multiplier: float
    risk_weighted_msv: float

    def to_json_obj(self) -> dict:
        return {
            "age_years": self.age_years,
            "multiplier": self.multiplier,
            "risk_weighted_msv": self.risk_weighted_msv,
        }


def _band_obj(band: ThresholdBand) -> dict:
    # Band effects are acute-exposure descriptions; cumulative-dose callers
    # carry the caveat flag rather than reinterpreting them.
    return {"range": band.range_text, "effect": band.effect, "acute_scale_reference": True}


@dataclass
class PatientDoseProfile:
    patient_id: str
    as_of: datetime
    records: list[InvestigationRecord]
    cumulative_total_msv: float
    window_sums_msv: dict[str, float]
    threshold_band: ThresholdBand
    chest_equivalents_total: float
    limit_flags: list[LimitFlag]
    subject_kind: SubjectKind = SubjectKind.PATIENT
    age_risk: Optional[AgeRiskNote] = None

    def history(self) -> list[tuple[datetime, float]]:
        return [(r.performed_at, r.effective_dose.value) for r in self.records]

    def to_json_obj(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "as_of": isoformat_utc(self.as_of),
            "records": [
                {
                    "record_id": r.record_id,
                    "performed_at": isoformat_utc(r.performed_at),
                    "exam_type": r.exam_type,
                    "modality": r.modality.value,
                    "effective_msv": r.effective_dose.value,
                    "facility_id": r.facility_id,
                    "operator_id": r.operator_id,
                    "kind": r.kind.value,
                }
                for r in self.records
            ],
            "cumulative_total_msv": self.cumulative_total_msv,
            "window_sums_msv": dict(self.window_sums_msv),
            "threshold_band": _band_obj(self.threshold_band),
            "chest_equivalents_total": self.chest_equivalents_total,
            "age_risk": self.age_risk.to_json_obj() if self.age_risk else None,
            "limit_flags": [f.to_json_obj() for f in self.limit_flags],
        }


def build_profile(
    envelopes: Iterable[SignedEnvelope],
    patient_id: str,
    as_of: datetime,
    policy: LimitPolicy,
    tables: DosimetryTables,
    verify: Optional[Callable[[SignedEnvelope], object]] = None,
    subject_kind: SubjectKind = SubjectKind.PATIENT,
    age_years: Optional[int] = None,
) -> PatientDoseProfile:
    """Derive the patient's profile from every matching envelope.

    When a ``verify`` callback is given, any envelope that fails it is an
    integrity error naming the record — a store serving clinicians must not
    quietly skip evidence.
    """
    records: list[InvestigationRecord] = []
    for envelope in envelopes:
        if verify is not None:
            result = verify(envelope)
            if not result:
                reason = getattr(getattr(result, "reason", None), "value", "VERIFY_FAILED")
                raise IntegrityError(
                    f"envelope {envelope.record_id()} failed verification: {reason}"
                )
        record = envelope.record()
        if record.patient_id == patient_id and record.performed_at <= as_of:
            records.append(record)

    records.sort(key=lambda r: (r.performed_at, r.record_id))
    total = math.fsum(r.effective_dose.value for r in records)
    history = [(r.performed_at, r.effective_dose.value) for r in records]
    window_sums = {
        name: math.fsum(d for t, d in history if as_of - span < t <= as_of)
        for name, span in PROFILE_WINDOWS.items()
    }
    band = classify_threshold(DoseQuantity.msv(total), tables)
    flags = check_limits(history, subject_kind, policy, as_of)
    age_note = None
    if age_years is not None:
        multiplier = age_risk_multiplier(age_years, tables)
        age_note = AgeRiskNote(age_years, multiplier, total * multiplier)
    return PatientDoseProfile(
        patient_id=patient_id,
        as_of=as_of,
        records=records,
        cumulative_total_msv=total,
        window_sums_msv=window_sums,
        threshold_band=band,
        chest_equivalents_total=chest_equivalents(DoseQuantity.msv(total)),
        limit_flags=flags,
        subject_kind=subject_kind,
        age_risk=age_note,
    )


@dataclass(frozen=True)
class WhatIfProjection:
    patient_id: str
    proposed_exam: str
    proposed_effective_msv: float
    new_cumulative_msv: float
    new_band: ThresholdBand
    new_flags: list[LimitFlag]
    chest_equivalents_delta: float
    chest_equivalents_total: float

    def to_json_obj(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "proposed_exam": self.proposed_exam,
            "proposed_effective_msv": self.proposed_effective_msv,
            "projected": {
                "cumulative_total_msv": self.new_cumulative_msv,
                "threshold_band": _band_obj(self.new_band),
                "limit_flags": [f.to_json_obj() for f in self.new_flags],
                "chest_equivalents_delta": self.chest_equivalents_delta,
                "chest_equivalents_total": self.chest_equivalents_total,
            },
        }


def whatif(
    profile: PatientDoseProfile,
    proposed_exam: str,
    tables: DosimetryTables,
    policy: LimitPolicy,
    proposed_inputs: Optional[RawInput] = None,
    now: Optional[datetime] = None,
) -> WhatIfProjection:
    """Project the profile as if the proposed exam were performed now.

    Pure: nothing is recorded. The dose comes from the machine inputs when
    given, otherwise from the catalog; an exam that resolves to neither is a
    missing-catalog-entry error.
    """
    now = now or profile.as_of
    if proposed_inputs is None:
        if proposed_exam not in tables.catalog:
            raise MissingCatalogEntryError(
                f"exam {proposed_exam!r} has no catalog dose and no machine inputs"
            )
        proposed_inputs = CatalogReference(proposed_exam)
    dose, _ = compute_effective_dose(proposed_inputs, tables)

    new_total = profile.cumulative_total_msv + dose.value
    new_band = classify_threshold(DoseQuantity.msv(new_total), tables)
    new_flags = check_limits(
        profile.history() + [(now, dose.value)], profile.subject_kind, policy, now
    )
    return WhatIfProjection(
        patient_id=profile.patient_id,
        proposed_exam=proposed_exam,
        proposed_effective_msv=dose.value,
        new_cumulative_msv=new_total,
        new_band=new_band,
        new_flags=new_flags,
        chest_equivalents_delta=chest_equivalents(dose),
        chest_equivalents_total=chest_equivalents(DoseQuantity.msv(new_total)),
    )
