from datetime import datetime, timezone

import pytest

from radledger.dosimetry import DosimetryTables, LimitPolicy


@pytest.fixture(scope="session")
def tables() -> DosimetryTables:
    return DosimetryTables.load()


@pytest.fixture(scope="session")
def policy() -> LimitPolicy:
    return LimitPolicy()


def utc(year, month=1, day=1, hour=0, minute=0, second=0) -> datetime:
    return datetime(year, month, day, hour, minute, second, tzinfo=timezone.utc)


@pytest.fixture(scope="session")
def t0() -> datetime:
    return utc(2025, 6, 15, 12)
