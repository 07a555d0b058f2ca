"""Radiological arithmetic: machine outputs to effective dose, plus limit checks.

All functions are pure over immutable inputs and safe to call concurrently.
Double precision throughout; no intermediate rounding; limit comparisons use
``>=`` so a dose exactly at a limit flags.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from enum import Enum
from typing import Iterable, Sequence

from ..errors import DomainError
from .tables import DosimetryTables, ThresholdBand
from .units import DoseQuantity, DoseUnit

ENGINE_VERSION = "1.0"

# Every catalog row implies the same per-PA-chest effective dose.
PA_CHEST_MSV = 0.02

DAYS_PER_YEAR = 365


@dataclass(frozen=True)
class CtScanParameters:
    """Raw CT console outputs for one scan."""

    ctdi_vol: DoseQuantity
    scan_length_cm: float  # slice thickness x number of slices
    anatomy: str

    def __post_init__(self) -> None:
        self.ctdi_vol.expect(DoseUnit.MGY)
        if not (float(self.scan_length_cm) > 0):
            raise DomainError(f"scan length must be positive, got {self.scan_length_cm}")
        object.__setattr__(self, "scan_length_cm", float(self.scan_length_cm))


@dataclass(frozen=True)
class RadiographyParameters:
    """Raw radiography outputs: a dose-area product over an irradiated field."""

    dap: DoseQuantity
    irradiated_area_cm2: float
    exposed_tissues: tuple[str, ...]

    def __post_init__(self) -> None:
        self.dap.expect(DoseUnit.MGY_CM2)
        if not (float(self.irradiated_area_cm2) > 0):
            raise DomainError(
                f"irradiated area must be positive, got {self.irradiated_area_cm2}"
            )
        tissues = tuple(self.exposed_tissues)
        if not tissues:
            raise DomainError("exposed_tissues must be non-empty")
        object.__setattr__(self, "irradiated_area_cm2", float(self.irradiated_area_cm2))
        object.__setattr__(self, "exposed_tissues", tissues)


def compute_dlp(params: CtScanParameters) -> DoseQuantity:
    """Dose-length product: per-slice dose times the scanned length."""
    return DoseQuantity.mgy_cm(params.ctdi_vol.value * params.scan_length_cm)


def effective_dose_from_dlp(
    dlp: DoseQuantity, anatomy: str, tables: DosimetryTables
) -> DoseQuantity:
    """Convert a DLP to effective dose with the anatomy's conversion factor."""
    dlp.expect(DoseUnit.MGY_CM)
    return DoseQuantity.msv(dlp.value * tables.k_factors.factor(anatomy))


def effective_dose_from_dap(
    params: RadiographyParameters, tables: DosimetryTables
) -> DoseQuantity:
    """Convert a dose-area product to effective dose.

    Skin dose is DAP over the irradiated area; photons carry a radiation
    weighting factor of 1, so the mGy entrance dose weights directly by the
    exposed tissues' factors into mSv.
    """
    skin_dose_mgy = params.dap.value / params.irradiated_area_cm2
    weight = tables.tissues.weight_sum(params.exposed_tissues)
    return DoseQuantity.msv(skin_dose_mgy * weight)


def age_risk_multiplier(age_years: int, tables: DosimetryTables) -> float:
    """Risk multiplier for the half-open age band containing ``age_years``."""
    if age_years < 0:
        raise DomainError(f"age must be non-negative, got {age_years}")
    return tables.age_risk.band_for(int(age_years)).multiplier


def classify_threshold(total: DoseQuantity, tables: DosimetryTables) -> ThresholdBand:
    """The unique dose-effect band covering ``total``.

    Band effects describe acute exposures; callers presenting cumulative
    lifetime doses must keep the acute-scale-reference caveat attached.
    """
    total.expect(DoseUnit.MSV)
    return tables.thresholds.band_for(total.value)


def chest_equivalents(effective: DoseQuantity) -> float:
    """How many PA chest radiographies deliver the same effective dose."""
    effective.expect(DoseUnit.MSV)
    return effective.value / PA_CHEST_MSV


def ct_reference_dose(exam: str, tables: DosimetryTables) -> DoseQuantity:
    """Catalog effective dose for a CT exam, used when no machine dose exists."""
    return tables.reference_dose(exam)


class SubjectKind(str, Enum):
    PUBLIC = "PUBLIC"
    OCCUPATIONAL = "OCCUPATIONAL"
    PATIENT = "PATIENT"


class LimitKind(str, Enum):
    PUBLIC_ANNUAL = "PUBLIC_ANNUAL"
    OCCUPATIONAL_ANNUAL = "OCCUPATIONAL_ANNUAL"
    OCCUPATIONAL_5YR_AVG = "OCCUPATIONAL_5YR_AVG"
    OCCUPATIONAL_SINGLE_YEAR = "OCCUPATIONAL_SINGLE_YEAR"
    PATIENT_ADVISORY = "PATIENT_ADVISORY"


@dataclass(frozen=True)
class LimitPolicy:
    """Annual and averaged dose limits; medical exposure gets advisory-only."""

    public_annual_msv: float = 1.0
    occupational_annual_msv: float = 20.0
    occupational_5yr_avg_msv: float = 20.0
    occupational_single_year_max_msv: float = 50.0
    advisory_patient_msv: float = 100.0

    def __post_init__(self) -> None:
        limits = (
            self.public_annual_msv,
            self.occupational_annual_msv,
            self.occupational_5yr_avg_msv,
            self.occupational_single_year_max_msv,
            self.advisory_patient_msv,
        )
        if any(not (float(v) > 0) for v in limits):
            raise DomainError("all limits must be positive")
        if self.occupational_single_year_max_msv < self.occupational_annual_msv:
            raise DomainError("single-year max must be >= the annual limit")


@dataclass(frozen=True)
class LimitFlag:
    kind: LimitKind
    window_start: datetime
    window_end: datetime
    observed_msv: float
    limit_msv: float

    def to_json_obj(self) -> dict:
        return {
            "name": self.kind.value,
            "window_start": isoformat_utc(self.window_start),
            "window_end": isoformat_utc(self.window_end),
            "observed_msv": self.observed_msv,
            "limit_msv": self.limit_msv,
        }


def isoformat_utc(dt: datetime) -> str:
    """UTC ISO-8601 with a Z suffix; the one timestamp rendering used on wire."""
    from datetime import timezone

    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def parse_utc(text: str) -> datetime:
    from datetime import timezone

    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


DoseEvent = tuple[datetime, float]


def _window_sum(events: Sequence[DoseEvent], end: datetime, span: timedelta) -> float:
    # half-open window (end - span, end]
    start = end - span
    return math.fsum(d for t, d in events if start < t <= end)


def check_limits(
    history: Iterable[DoseEvent],
    subject_kind: SubjectKind,
    policy: LimitPolicy,
    as_of: datetime,
) -> list[LimitFlag]:
    """Evaluate the dose history against the policy at ``as_of``.

    Trailing windows are half-open ``(end - span, end]``. Occupational
    histories additionally check the five-year per-year mean and the worst
    trailing 365-day window ending at any exposure or at ``as_of``. Patients
    get the cumulative advisory threshold only: medical exposure is excluded
    from the public limit.
    """
    year = timedelta(days=DAYS_PER_YEAR)
    events = sorted((t, float(d)) for t, d in history if t <= as_of)
    flags: list[LimitFlag] = []

    if subject_kind is SubjectKind.PUBLIC:
        observed = _window_sum(events, as_of, year)
        if observed >= policy.public_annual_msv:
            flags.append(
                LimitFlag(LimitKind.PUBLIC_ANNUAL, as_of - year, as_of, observed, policy.public_annual_msv)
            )
    elif subject_kind is SubjectKind.OCCUPATIONAL:
        observed = _window_sum(events, as_of, year)
        if observed >= policy.occupational_annual_msv:
            flags.append(
                LimitFlag(
                    LimitKind.OCCUPATIONAL_ANNUAL,
                    as_of - year,
                    as_of,
                    observed,
                    policy.occupational_annual_msv,
                )
            )
        five_years = timedelta(days=5 * DAYS_PER_YEAR)
        mean_per_year = _window_sum(events, as_of, five_years) / 5.0
        if mean_per_year >= policy.occupational_5yr_avg_msv:
            flags.append(
                LimitFlag(
                    LimitKind.OCCUPATIONAL_5YR_AVG,
                    as_of - five_years,
                    as_of,
                    mean_per_year,
                    policy.occupational_5yr_avg_msv,
                )
            )
        worst_end, worst = as_of, _window_sum(events, as_of, year)
        for t, _ in events:
            candidate = _window_sum(events, t, year)
            if candidate > worst:
                worst_end, worst = t, candidate
        if worst >= policy.occupational_single_year_max_msv:
            flags.append(
                LimitFlag(
                    LimitKind.OCCUPATIONAL_SINGLE_YEAR,
                    worst_end - year,
                    worst_end,
                    worst,
                    policy.occupational_single_year_max_msv,
                )
            )
    elif subject_kind is SubjectKind.PATIENT:
        total = math.fsum(d for _, d in events)
        if total >= policy.advisory_patient_msv:
            start = events[0][0] if events else as_of
            flags.append(
                LimitFlag(LimitKind.PATIENT_ADVISORY, start, as_of, total, policy.advisory_patient_msv)
            )
    else:  # pragma: no cover - enum is closed
        raise DomainError(f"unknown subject kind {subject_kind!r}")

    return flags
