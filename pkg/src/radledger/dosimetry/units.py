"""Radiological quantities with explicit units.

The same number can mean absorbed dose (mGy), effective dose (mSv), a
dose-length product (mGy·cm) or a dose-area product (mGy·cm²); mixing them
silently is the classic reporting bug this package exists to prevent, so
every quantity carries its unit and cross-unit arithmetic raises.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from ..errors import DomainError, UnitError


class DoseUnit(str, Enum):
    MGY = "mGy"          # absorbed dose
    MSV = "mSv"          # effective dose
    MGY_CM = "mGy.cm"    # dose-length product
    MGY_CM2 = "mGy.cm2"  # dose-area product

    @property
    def pretty(self) -> str:
        return _PRETTY[self]


_PRETTY = {
    DoseUnit.MGY: "mGy",
    DoseUnit.MSV: "mSv",
    DoseUnit.MGY_CM: "mGy·cm",
    DoseUnit.MGY_CM2: "mGy·cm²",
}


@dataclass(frozen=True)
class DoseQuantity:
    """A non-negative magnitude tagged with its radiological unit."""

    value: float
    unit: DoseUnit

    def __post_init__(self) -> None:
        if not isinstance(self.unit, DoseUnit):
            raise UnitError(f"unknown dose unit: {self.unit!r}")
        value = float(self.value)
        if not math.isfinite(value):
            raise DomainError(f"dose value must be finite, got {self.value!r}")
        if value < 0:
            raise DomainError(f"dose value must be non-negative, got {value}")
        object.__setattr__(self, "value", value)

    @classmethod
    def mgy(cls, value: float) -> "DoseQuantity":
        return cls(value, DoseUnit.MGY)

    @classmethod
    def msv(cls, value: float) -> "DoseQuantity":
        return cls(value, DoseUnit.MSV)

    @classmethod
    def mgy_cm(cls, value: float) -> "DoseQuantity":
        return cls(value, DoseUnit.MGY_CM)

    @classmethod
    def mgy_cm2(cls, value: float) -> "DoseQuantity":
        return cls(value, DoseUnit.MGY_CM2)

    @classmethod
    def from_gy_cm2(cls, value: float) -> "DoseQuantity":
        """Dose-area products reported in Gy·cm² are converted at ingestion."""
        return cls(float(value) * 1000.0, DoseUnit.MGY_CM2)

    def expect(self, unit: DoseUnit) -> "DoseQuantity":
        if self.unit is not unit:
            raise UnitError(
                f"expected {unit.value}, got {self.unit.value} ({self.value})"
            )
        return self

    def _check_same_unit(self, other: "DoseQuantity") -> None:
        if not isinstance(other, DoseQuantity):
            raise UnitError(f"cannot combine DoseQuantity with {type(other).__name__}")
        if other.unit is not self.unit:
            raise UnitError(
                f"cannot combine {self.unit.value} with {other.unit.value}"
            )

    def __add__(self, other: "DoseQuantity") -> "DoseQuantity":
        self._check_same_unit(other)
        return DoseQuantity(self.value + other.value, self.unit)

    def __sub__(self, other: "DoseQuantity") -> "DoseQuantity":
        self._check_same_unit(other)
        return DoseQuantity(self.value - other.value, self.unit)

    def scaled(self, factor: float) -> "DoseQuantity":
        """Scale by a dimensionless factor; the unit is unchanged."""
        return DoseQuantity(self.value * float(factor), self.unit)

    def __str__(self) -> str:
        return f"{self.value:g} {self.unit.pretty}"
