"""Service configuration: file values, overridden by environment variables.

Every field has an ``RADLEDGER_*`` environment override (documented in the
README). A LOCAL-role service must name its upstream central service; a
CENTRAL service must not.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..dosimetry import DosimetryTables, LimitPolicy
from ..errors import ConfigError
from ..sync.replica import ReplicaKind

ENV_PREFIX = "RADLEDGER_"

_ENV_FIELDS = {
    "HOST": "host",
    "PORT": "port",
    "DATA_DIR": "data_dir",
    "ROLE": "role",
    "UPSTREAM": "upstream_url",
    "REPLICA_ID": "replica_id",
    "K_FACTORS": "k_factor_path",
    "TRUST_ROOT": "trust_root_path",
    "CRL": "crl_path",
    "SERVICE_CARD": "service_card_path",
    "TLS_CERT": "tls_cert_path",
    "TLS_KEY": "tls_key_path",
    "PUBLIC_ANNUAL_MSV": "public_annual_msv",
    "OCCUPATIONAL_ANNUAL_MSV": "occupational_annual_msv",
    "OCCUPATIONAL_5YR_AVG_MSV": "occupational_5yr_avg_msv",
    "OCCUPATIONAL_SINGLE_YEAR_MAX_MSV": "occupational_single_year_max_msv",
    "ADVISORY_MSV": "advisory_patient_msv",
}

_FLOAT_FIELDS = {
    "public_annual_msv",
    "occupational_annual_msv",
    "occupational_5yr_avg_msv",
    "occupational_single_year_max_msv",
    "advisory_patient_msv",
}


@dataclass
class ServiceConfig:
    data_dir: Path
    role: ReplicaKind = ReplicaKind.LOCAL
    host: str = "127.0.0.1"
    port: int = 8470
    replica_id: Optional[str] = None
    upstream_url: Optional[str] = None
    k_factor_path: Optional[Path] = None
    trust_root_path: Optional[Path] = None
    crl_path: Optional[Path] = None
    service_card_path: Optional[Path] = None  # identity for raw-input signing
    tls_cert_path: Optional[Path] = None
    tls_key_path: Optional[Path] = None
    public_annual_msv: float = 1.0
    occupational_annual_msv: float = 20.0
    occupational_5yr_avg_msv: float = 20.0
    occupational_single_year_max_msv: float = 50.0
    advisory_patient_msv: float = 100.0

    def __post_init__(self) -> None:
        self.data_dir = Path(self.data_dir)
        if isinstance(self.role, str):
            try:
                self.role = ReplicaKind(self.role.upper())
            except ValueError:
                raise ConfigError(f"unknown service role {self.role!r}") from None
        if self.role is ReplicaKind.CARD:
            raise ConfigError("a service cannot take the CARD role")
        if self.role is ReplicaKind.LOCAL and not self.upstream_url:
            raise ConfigError("LOCAL role requires an upstream central URL")
        if self.role is ReplicaKind.CENTRAL and self.upstream_url:
            raise ConfigError("CENTRAL role must not configure an upstream")
        for name in ("k_factor_path", "trust_root_path", "crl_path",
                     "service_card_path", "tls_cert_path", "tls_key_path"):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, Path(value))
        if self.replica_id is None:
            self.replica_id = self.role.value.lower()
        self.port = int(self.port)

    def policy(self) -> LimitPolicy:
        return LimitPolicy(
            public_annual_msv=self.public_annual_msv,
            occupational_annual_msv=self.occupational_annual_msv,
            occupational_5yr_avg_msv=self.occupational_5yr_avg_msv,
            occupational_single_year_max_msv=self.occupational_single_year_max_msv,
            advisory_patient_msv=self.advisory_patient_msv,
        )

    def tables(self) -> DosimetryTables:
        return DosimetryTables.load(k_factor_path=self.k_factor_path)

    @classmethod
    def load(cls, path: Optional[Path] = None, env: Optional[dict] = None) -> "ServiceConfig":
        """Read the JSON config file, then apply environment overrides."""
        env = os.environ if env is None else env
        values: dict = {}
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise ConfigError(f"config file {path} not found")
            try:
                values.update(json.loads(path.read_text(encoding="utf-8")))
            except json.JSONDecodeError as err:
                raise ConfigError(f"config file {path} is not valid JSON: {err}") from None
        for env_name, field_name in _ENV_FIELDS.items():
            raw = env.get(ENV_PREFIX + env_name)
            if raw is not None:
                values[field_name] = float(raw) if field_name in _FLOAT_FIELDS else raw
        if "data_dir" not in values:
            raise ConfigError("data_dir is required (config file or RADLEDGER_DATA_DIR)")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        return cls(**values)
