import json

import pytest

from radledger.dosimetry import DosimetryTables
from radledger.errors import IntegrityError
from radledger.ledger import CatalogReference, LedgerLog, SignedEnvelope, create_record
from radledger.pki import CardKind, CertificateAuthority, personalize_card
from tests.conftest import utc

NOW = utc(2025, 5, 1)


@pytest.fixture(scope="module")
def envelopes(tables):
    ca = CertificateAuthority.create("root", scheme="hmac-demo", now=utc(2020), seed=b"ca")
    operator = personalize_card(
        CardKind.PROFESSIONAL, "dr", ca, pin="1234", now=utc(2020), validity_days=3650
    )
    operator.unlock("1234")
    return [
        create_record(
            patient_id="p1",
            exam_type="head",
            raw_input=CatalogReference("head"),
            signer=operator,
            tables=tables,
            facility_id="h1",
            operator_id="dr",
            performed_at=NOW,
        )
        for _ in range(5)
    ]


class TestLedgerLog:
    def test_append_and_reload(self, tmp_path, envelopes):
        log = LedgerLog(tmp_path / "envelopes.log")
        for env in envelopes:
            assert log.append(env) is True
        log.close()

        again = LedgerLog(tmp_path / "envelopes.log")
        assert [e.record_id() for e in again.envelopes()] == [
            e.record_id() for e in envelopes
        ]

    def test_identical_duplicate_is_noop(self, tmp_path, envelopes):
        log = LedgerLog(tmp_path / "envelopes.log")
        assert log.append(envelopes[0]) is True
        assert log.append(envelopes[0]) is False
        assert len(log) == 1

    def test_conflicting_bytes_raise(self, tmp_path, envelopes):
        log = LedgerLog(tmp_path / "envelopes.log")
        log.append(envelopes[0])
        conflicting = SignedEnvelope(
            envelopes[0].payload, b"\x01" * 32, envelopes[0].signer_cert_id
        )
        with pytest.raises(IntegrityError):
            log.append(conflicting)

    def test_torn_final_line_recovered(self, tmp_path, envelopes):
        path = tmp_path / "envelopes.log"
        log = LedgerLog(path)
        for env in envelopes[:3]:
            log.append(env)
        log.close()
        with open(path, "ab") as fh:
            fh.write(envelopes[3].to_line()[:-10])  # simulate a crash mid-write

        recovered = LedgerLog(path)
        assert len(recovered) == 3
        # and the file is truncated back to complete lines
        assert recovered.append(envelopes[3]) is True
        recovered.close()
        assert len(LedgerLog(path)) == 4

    def test_log_bytes_are_line_delimited_canonical_json(self, tmp_path, envelopes):
        path = tmp_path / "envelopes.log"
        log = LedgerLog(path)
        log.append(envelopes[0])
        log.close()
        raw = path.read_bytes()
        assert raw.endswith(b"\n")
        line = raw.rstrip(b"\n")
        obj = json.loads(line)
        assert sorted(obj) == ["payload", "signature", "signer_cert_id"]
        assert SignedEnvelope.from_line(line).payload == envelopes[0].payload

    def test_snapshot_index_written_and_checked(self, tmp_path, envelopes):
        path = tmp_path / "envelopes.log"
        log = LedgerLog(path)
        log.append(envelopes[0])
        log.write_snapshot()
        log.close()
        idx = json.loads((tmp_path / "envelopes.log.idx.json").read_text())
        assert idx == {"version": 1, "count": 1, "bytes": path.stat().st_size}

        # a log shorter than its index means lost data: refuse to open
        path.write_bytes(b"")
        with pytest.raises(IntegrityError):
            LedgerLog(path)

    def test_since_cursor_pagination(self, tmp_path, envelopes):
        log = LedgerLog(tmp_path / "envelopes.log")
        for env in envelopes:
            log.append(env)
        first, cursor = log.since(0, limit=2)
        assert len(first) == 2 and cursor == 2
        rest, cursor = log.since(cursor)
        assert len(rest) == 3 and cursor == 5
        empty, cursor = log.since(cursor)
        assert empty == [] and cursor == 5
