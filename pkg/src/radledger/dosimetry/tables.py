"""Loaders for the dosimetry registries.

Every registry lives in a tab-separated text file (``#`` comments, documented
header) so physicists can amend factors without touching code. The bundled
defaults sit in ``radledger/dosimetry/data/``; every loader accepts an
override path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from ..errors import ConfigError, MissingCatalogEntryError, MissingFactorError
from .units import DoseQuantity

WEIGHT_SUM_TOLERANCE = 1e-9


def _read_rows(path: Optional[Path], default_name: str) -> list[list[str]]:
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
    else:
        text = (
            resources.files("radledger.dosimetry")
            .joinpath("data", default_name)
            .read_text(encoding="utf-8")
        )
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        rows.append([cell.strip() for cell in line.split("\t")])
        if any(not cell for cell in rows[-1]):
            raise ConfigError(f"{default_name}: empty cell on line {lineno}")
    return rows


def _parse_bound(cell: str) -> Optional[float]:
    return None if cell.lower() == "inf" else float(cell)


@dataclass(frozen=True)
class TissueFactor:
    tissue: str
    group: str
    weight: float


class TissueRegistry:
    """Tissue weighting factors; the full schedule must sum to 1.00."""

    def __init__(self, factors: Sequence[TissueFactor]):
        self._by_name = {f.tissue: f for f in factors}
        if len(self._by_name) != len(factors):
            raise ConfigError("duplicate tissue in weighting registry")
        total = math.fsum(f.weight for f in factors)
        if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise ConfigError(f"tissue weights sum to {total!r}, expected 1.00")
        for f in factors:
            if not 0.0 <= f.weight <= 1.0:
                raise ConfigError(f"tissue weight out of [0,1]: {f}")

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "TissueRegistry":
        rows = _read_rows(path, "tissue_weights.tsv")
        return cls([TissueFactor(r[0], r[1], float(r[2])) for r in rows])

    def weight(self, tissue: str) -> float:
        try:
            return self._by_name[tissue].weight
        except KeyError:
            raise MissingFactorError(f"no weighting factor for tissue {tissue!r}") from None

    def weight_sum(self, tissues: Iterable[str]) -> float:
        return math.fsum(self.weight(t) for t in tissues)

    def tissues(self) -> list[str]:
        return list(self._by_name)

    def groups(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for f in self._by_name.values():
            out.setdefault(f.group, []).append(f.tissue)
        return out

    def group_totals(self) -> dict[str, float]:
        totals: dict[str, list[float]] = {}
        for f in self._by_name.values():
            totals.setdefault(f.group, []).append(f.weight)
        return {g: math.fsum(ws) for g, ws in totals.items()}

    def __contains__(self, tissue: str) -> bool:
        return tissue in self._by_name

    def __len__(self) -> int:
        return len(self._by_name)


@dataclass(frozen=True)
class AgeRiskBand:
    lower_years: int
    upper_years: Optional[int]  # exclusive; None = open
    multiplier: float


class AgeRiskTable:
    """Half-open age bands partitioning [0, inf)."""

    EXPECTED_MULTIPLIERS = {3.0, 2.0, 1.5, 0.5, 0.3, 0.0}

    def __init__(self, bands: Sequence[AgeRiskBand]):
        bands = sorted(bands, key=lambda b: b.lower_years)
        if not bands or bands[0].lower_years != 0 or bands[-1].upper_years is not None:
            raise ConfigError("age bands must cover [0, inf)")
        for a, b in zip(bands, bands[1:]):
            if a.upper_years != b.lower_years:
                raise ConfigError(f"age bands gap/overlap at {a.upper_years}/{b.lower_years}")
        if {b.multiplier for b in bands} != self.EXPECTED_MULTIPLIERS:
            raise ConfigError("age-risk multipliers do not match the published set")
        self.bands = tuple(bands)

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "AgeRiskTable":
        rows = _read_rows(path, "age_risk.tsv")
        bands = []
        for r in rows:
            upper = _parse_bound(r[1])
            bands.append(AgeRiskBand(int(r[0]), None if upper is None else int(upper), float(r[2])))
        return cls(bands)

    def band_for(self, age_years: int) -> AgeRiskBand:
        for band in self.bands:
            if band.upper_years is None or age_years < band.upper_years:
                if age_years >= band.lower_years:
                    return band
        raise ConfigError(f"age bands failed to cover {age_years}")  # unreachable


@dataclass(frozen=True)
class ThresholdBand:
    lower_msv: float
    upper_msv: Optional[float]  # exclusive; None = open
    range_text: str
    effect: str


class ThresholdTable:
    """Dose-effect bands; exactly one band covers any non-negative dose."""

    def __init__(self, bands: Sequence[ThresholdBand]):
        bands = sorted(bands, key=lambda b: b.lower_msv)
        if not bands or bands[0].lower_msv != 0 or bands[-1].upper_msv is not None:
            raise ConfigError("threshold bands must cover [0, inf)")
        for a, b in zip(bands, bands[1:]):
            if a.upper_msv != b.lower_msv:
                raise ConfigError("threshold bands gap/overlap")
        self.bands = tuple(bands)

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "ThresholdTable":
        rows = _read_rows(path, "thresholds.tsv")
        return cls([ThresholdBand(float(r[0]), _parse_bound(r[1]), r[2], r[3]) for r in rows])

    def band_for(self, msv: float) -> ThresholdBand:
        for band in self.bands:
            if band.upper_msv is None or msv < band.upper_msv:
                if msv >= band.lower_msv:
                    return band
        raise ConfigError(f"threshold bands failed to cover {msv}")  # unreachable


@dataclass(frozen=True)
class CatalogEntry:
    exam: str
    effective_msv: float
    chest_equivalents: float
    display_name: str


class CtCatalog:
    """Reference effective doses for catalog CT examinations."""

    def __init__(self, entries: Sequence[CatalogEntry]):
        self._by_exam = {e.exam: e for e in entries}
        if len(self._by_exam) != len(entries):
            raise ConfigError("duplicate exam in CT catalog")

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "CtCatalog":
        rows = _read_rows(path, "ct_catalog.tsv")
        return cls([CatalogEntry(r[0], float(r[1]), float(r[2]), r[3]) for r in rows])

    def entry(self, exam: str) -> CatalogEntry:
        try:
            return self._by_exam[exam]
        except KeyError:
            raise MissingCatalogEntryError(f"exam {exam!r} not in the CT catalog") from None

    def exams(self) -> list[str]:
        return list(self._by_exam)

    def __contains__(self, exam: str) -> bool:
        return exam in self._by_exam

    def __len__(self) -> int:
        return len(self._by_exam)


@dataclass(frozen=True)
class KFactor:
    anatomy: str
    msv_per_mgy_cm: float
    reference_dlp_mgy_cm: float


class KFactorTable:
    """DLP-to-effective-dose conversion factors; unknown anatomy hard-fails."""

    def __init__(self, factors: Sequence[KFactor]):
        self._by_anatomy = {f.anatomy: f for f in factors}
        if len(self._by_anatomy) != len(factors):
            raise ConfigError("duplicate anatomy in k-factor table")

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "KFactorTable":
        rows = _read_rows(path, "k_factors.tsv")
        return cls([KFactor(r[0], float(r[1]), float(r[2])) for r in rows])

    def factor(self, anatomy: str) -> float:
        try:
            return self._by_anatomy[anatomy].msv_per_mgy_cm
        except KeyError:
            raise MissingFactorError(
                f"no DLP conversion factor for anatomy {anatomy!r}"
            ) from None

    def entries(self) -> list[KFactor]:
        return list(self._by_anatomy.values())

    def __contains__(self, anatomy: str) -> bool:
        return anatomy in self._by_anatomy


class ExamTissueMap:
    """Default exam-field tissue attribution for DAP conversions (editable)."""

    def __init__(self, mapping: Mapping[str, Sequence[str]]):
        self._map = {k: tuple(v) for k, v in mapping.items()}

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "ExamTissueMap":
        rows = _read_rows(path, "exam_tissues.tsv")
        return cls({r[0]: [t.strip() for t in r[1].split(",")] for r in rows})

    def tissues_for(self, exam: str) -> tuple[str, ...]:
        try:
            return self._map[exam]
        except KeyError:
            raise MissingFactorError(f"no tissue attribution for exam {exam!r}") from None

    def __contains__(self, exam: str) -> bool:
        return exam in self._map


@dataclass
class DosimetryTables:
    """Bundle of every loaded registry, as the engine consumes them."""

    tissues: TissueRegistry = field(default_factory=TissueRegistry.load)
    age_risk: AgeRiskTable = field(default_factory=AgeRiskTable.load)
    thresholds: ThresholdTable = field(default_factory=ThresholdTable.load)
    catalog: CtCatalog = field(default_factory=CtCatalog.load)
    k_factors: KFactorTable = field(default_factory=KFactorTable.load)
    exam_tissues: ExamTissueMap = field(default_factory=ExamTissueMap.load)

    @classmethod
    def load(cls, k_factor_path: Optional[Path] = None) -> "DosimetryTables":
        tables = cls()
        if k_factor_path is not None:
            tables.k_factors = KFactorTable.load(k_factor_path)
        return tables

    def reference_dose(self, exam: str) -> DoseQuantity:
        return DoseQuantity.msv(self.catalog.entry(exam).effective_msv)
