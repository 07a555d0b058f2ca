from .log import LedgerLog
from .profiles import (
    AgeRiskNote,
    PatientDoseProfile,
    WhatIfProjection,
    build_profile,
    whatif,
)
from .records import (
    CatalogReference,
    InvestigationRecord,
    Modality,
    RecordKind,
    SignedEnvelope,
    compute_effective_dose,
    create_record,
    new_record_id,
    verify_recompute,
)
from .reports import PeriodicReport, ReportRow, periodic_report

__all__ = [
    "AgeRiskNote",
    "CatalogReference",
    "InvestigationRecord",
    "LedgerLog",
    "Modality",
    "PatientDoseProfile",
    "PeriodicReport",
    "RecordKind",
    "ReportRow",
    "SignedEnvelope",
    "WhatIfProjection",
    "build_profile",
    "compute_effective_dose",
    "create_record",
    "new_record_id",
    "periodic_report",
    "verify_recompute",
    "whatif",
]
