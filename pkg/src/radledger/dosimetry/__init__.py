from .engine import (
    ENGINE_VERSION,
    PA_CHEST_MSV,
    CtScanParameters,
    LimitFlag,
    LimitKind,
    LimitPolicy,
    RadiographyParameters,
    SubjectKind,
    age_risk_multiplier,
    check_limits,
    chest_equivalents,
    classify_threshold,
    compute_dlp,
    ct_reference_dose,
    effective_dose_from_dap,
    effective_dose_from_dlp,
    isoformat_utc,
    parse_utc,
)
from .tables import DosimetryTables, ThresholdBand
from .units import DoseQuantity, DoseUnit

__all__ = [
    "ENGINE_VERSION",
    "PA_CHEST_MSV",
    "CtScanParameters",
    "DoseQuantity",
    "DoseUnit",
    "DosimetryTables",
    "LimitFlag",
    "LimitKind",
    "LimitPolicy",
    "RadiographyParameters",
    "SubjectKind",
    "ThresholdBand",
    "age_risk_multiplier",
    "check_limits",
    "chest_equivalents",
    "classify_threshold",
    "compute_dlp",
    "ct_reference_dose",
    "effective_dose_from_dap",
    "effective_dose_from_dlp",
    "isoformat_utc",
    "parse_utc",
]
