from datetime import timedelta

import pytest

from radledger.dosimetry import DoseQuantity, DosimetryTables, RadiographyParameters
from radledger.errors import DomainError
from radledger.ledger import CatalogReference, create_record, periodic_report
from radledger.pki import CardKind, CertificateAuthority, personalize_card
from tests.conftest import utc

NOW = utc(2025, 3, 1)
FROM, TO = utc(2025, 1, 1), utc(2025, 12, 31)


@pytest.fixture(scope="module")
def operator():
    ca = CertificateAuthority.create("root", scheme="hmac-demo", now=utc(2020), seed=b"ca")
    card = personalize_card(
        CardKind.PROFESSIONAL, "dr-a", ca, pin="1234", now=utc(2020), validity_days=3650
    )
    card.unlock("1234")
    return card


def _head_records(operator, tables, doses_msv):
    """Head CT records carrying arbitrary effective doses via DAP inputs."""
    records = []
    for i, msv in enumerate(doses_msv):
        # lung weight 0.12 over 100 cm2: dap = msv * 100 / 0.12 reproduces msv
        raw = RadiographyParameters(
            DoseQuantity.mgy_cm2(msv * 100 / 0.12), 100, ("lung",)
        )
        env = create_record(
            patient_id=f"p{i}",
            exam_type="head",
            raw_input=raw,
            signer=operator,
            tables=tables,
            facility_id="hosp-1",
            operator_id="dr-a",
            performed_at=NOW + timedelta(hours=i),
        )
        records.append(env.record())
    return records


class TestPeriodicReport:
    def test_symmetric_case_zero_discrepancy(self, operator, tables):
        records = _head_records(operator, tables, [1.8, 2.2])
        report = periodic_report(records, FROM, TO, reference_means={"head": 2.0})
        (row,) = report.rows
        assert row.count == 2
        assert row.summed_msv == pytest.approx(4.0)
        assert row.estimate_msv == pytest.approx(4.0)
        assert row.discrepancy_msv == pytest.approx(0.0)

    def test_heterogeneous_case_exposes_discrepancy(self, operator, tables):
        # Oracle: 1.5 + 2.0 = 3.5 recorded; 2 x 2.0 = 4.0 estimated.
        records = _head_records(operator, tables, [1.5, 2.0])
        report = periodic_report(records, FROM, TO, reference_means={"head": 2.0})
        (row,) = report.rows
        assert row.summed_msv == pytest.approx(3.5)
        assert row.estimate_msv == pytest.approx(4.0)
        assert row.discrepancy_msv == pytest.approx(0.5)

    def test_empty_window(self, operator, tables):
        records = _head_records(operator, tables, [2.0])
        report = periodic_report(records, utc(2030), utc(2031))
        assert report.rows == ()
        assert report.total_count == 0

    def test_inverted_window_rejected(self, tables):
        with pytest.raises(DomainError):
            periodic_report([], TO, FROM)

    def test_per_type_sums_add_to_total(self, operator, tables):
        envs = [
            create_record(
                patient_id="p1",
                exam_type=exam,
                raw_input=CatalogReference(exam),
                signer=operator,
                tables=tables,
                facility_id="h1",
                operator_id="dr-a",
                performed_at=NOW,
            )
            for exam in ["head", "chest", "head", "abdomen"]
        ]
        report = periodic_report([e.record() for e in envs], FROM, TO)
        assert report.total_summed_msv == pytest.approx(
            sum(row.summed_msv for row in report.rows)
        )
        assert {row.exam_type for row in report.rows} == {"head", "chest", "abdomen"}

    def test_without_reference_mean_estimate_equals_sum(self, operator, tables):
        records = _head_records(operator, tables, [1.0, 4.0])
        report = periodic_report(records, FROM, TO)
        (row,) = report.rows
        assert row.estimate_msv == pytest.approx(row.summed_msv)
        assert row.discrepancy_msv == pytest.approx(0.0)

    def test_tsv_rendering_has_header_and_total(self, operator, tables):
        records = _head_records(operator, tables, [2.0])
        text = periodic_report(records, FROM, TO).to_tsv()
        lines = text.strip().split("\n")
        assert lines[0].startswith("exam_type\tcount")
        assert lines[-1].startswith("TOTAL")
