"""Canonical byte serialization for everything that gets signed.

Signatures must be reproducible across independent implementations, so the
payload encoding is pinned: UTF-8 JSON, field names sorted, no insignificant
whitespace, and every decimal rendered as an explicit non-exponential string.
Raw floats are refused at encode time — numeric fields are converted with
``format_decimal`` first, which keeps the rendering rule in one place.
"""
from __future__ import annotations

import json
from decimal import Decimal
from typing import Any

from .errors import IntegrityError


def format_decimal(value: float) -> str:
    """Shortest round-trip decimal rendering, never exponential.

    ``float(format_decimal(x)) == x`` exactly, so recomputation checks can
    compare bit-for-bit after a round trip.
    """
    return format(Decimal(repr(float(value))), "f")


def parse_decimal(text: str) -> float:
    return float(text)


def _reject_floats(obj: Any, path: str) -> None:
    if isinstance(obj, float):
        raise IntegrityError(
            f"raw float at {path}; render decimals with format_decimal() first"
        )
    if isinstance(obj, dict):
        for k, v in obj.items():
            if not isinstance(k, str):
                raise IntegrityError(f"non-string key at {path}: {k!r}")
            _reject_floats(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _reject_floats(v, f"{path}[{i}]")


def canonical_json(obj: Any) -> bytes:
    """Encode ``obj`` under the pinned canonical rules."""
    _reject_floats(obj, "$")
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def parse_canonical(data: bytes) -> Any:
    return json.loads(data.decode("utf-8"))
