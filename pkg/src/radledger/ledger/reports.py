"""Periodic regulatory reports, in both styles.

Official counting practice multiplies each exam type's count by a standing
medium dose; this report emits that estimate next to the exact sum of the
recorded individual doses, plus their difference, so the reporting error is
visible per type and in total.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Mapping, Optional

from ..dosimetry import isoformat_utc
from ..errors import DomainError
from .records import InvestigationRecord


@dataclass(frozen=True)
class ReportRow:
    exam_type: str
    count: int
    summed_msv: float
    mean_msv: float
    reference_mean_msv: float
    estimate_msv: float
    discrepancy_msv: float  # estimate - exact sum

    def to_json_obj(self) -> dict:
        return {
            "exam_type": self.exam_type,
            "count": self.count,
            "summed_msv": self.summed_msv,
            "mean_msv": self.mean_msv,
            "reference_mean_msv": self.reference_mean_msv,
            "estimate_msv": self.estimate_msv,
            "discrepancy_msv": self.discrepancy_msv,
        }


@dataclass(frozen=True)
class PeriodicReport:
    window_from: datetime
    window_to: datetime
    rows: tuple[ReportRow, ...]
    total_count: int
    total_summed_msv: float
    total_estimate_msv: float
    total_discrepancy_msv: float

    def to_json_obj(self) -> dict:
        return {
            "from": isoformat_utc(self.window_from),
            "to": isoformat_utc(self.window_to),
            "rows": [r.to_json_obj() for r in self.rows],
            "total_count": self.total_count,
            "total_summed_msv": self.total_summed_msv,
            "total_estimate_msv": self.total_estimate_msv,
            "total_discrepancy_msv": self.total_discrepancy_msv,
        }

    def to_tsv(self) -> str:
        """Downloadable tabular rendering."""
        lines = [
            "exam_type\tcount\tsummed_msv\tmean_msv\treference_mean_msv\testimate_msv\tdiscrepancy_msv"
        ]
        for r in self.rows:
            lines.append(
                f"{r.exam_type}\t{r.count}\t{r.summed_msv:.6f}\t{r.mean_msv:.6f}"
                f"\t{r.reference_mean_msv:.6f}\t{r.estimate_msv:.6f}\t{r.discrepancy_msv:.6f}"
            )
        lines.append(
            f"TOTAL\t{self.total_count}\t{self.total_summed_msv:.6f}\t"
            f"\t\t{self.total_estimate_msv:.6f}\t{self.total_discrepancy_msv:.6f}"
        )
        return "\n".join(lines) + "\n"


def periodic_report(
    records: Iterable[InvestigationRecord],
    window_from: datetime,
    window_to: datetime,
    reference_means: Optional[Mapping[str, float]] = None,
) -> PeriodicReport:
    """Group the window's records by exam type and emit both report styles.

    ``reference_means`` is the standing medium dose per exam type (e.g. from
    a reference period or the CT catalog). A type without one falls back to
    its own window mean, making its estimate equal the exact sum.
    """
    if window_from > window_to:
        raise DomainError("report window is inverted")
    reference_means = reference_means or {}

    by_type: dict[str, list[float]] = {}
    for r in records:
        if window_from <= r.performed_at <= window_to:
            by_type.setdefault(r.exam_type, []).append(r.effective_dose.value)

    rows = []
    for exam_type in sorted(by_type):
        doses = by_type[exam_type]
        count = len(doses)
        summed = math.fsum(doses)
        mean = summed / count
        reference = reference_means.get(exam_type, mean)
        estimate = count * reference
        rows.append(
            ReportRow(
                exam_type=exam_type,
                count=count,
                summed_msv=summed,
                mean_msv=mean,
                reference_mean_msv=reference,
                estimate_msv=estimate,
                discrepancy_msv=estimate - summed,
            )
        )

    return PeriodicReport(
        window_from=window_from,
        window_to=window_to,
        rows=tuple(rows),
        total_count=sum(r.count for r in rows),
        total_summed_msv=math.fsum(r.summed_msv for r in rows),
        total_estimate_msv=math.fsum(r.estimate_msv for r in rows),
        total_discrepancy_msv=math.fsum(r.discrepancy_msv for r in rows),
    )
