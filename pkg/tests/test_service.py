import json
from datetime import timedelta

import pytest
from fastapi.testclient import TestClient

from radledger.dosimetry import DoseQuantity, DosimetryTables, RadiographyParameters
from radledger.ledger import CatalogReference, SignedEnvelope, create_record
from radledger.service import create_app
from radledger.sync.replica import ReplicaKind
from tests.conftest import utc
from tests.service_harness import SignedClient, TrustSetup

NOW = utc(2025, 6, 1, 9)
_TABLES = DosimetryTables.load()


@pytest.fixture
def trust(tmp_path):
    return TrustSetup(tmp_path / "trust")


@pytest.fixture
def service(trust, tmp_path):
    config = trust.write_service_dir(tmp_path / "central", role=ReplicaKind.CENTRAL)
    app = create_app(config)
    with TestClient(app) as client:
        yield SignedClient(client, trust.operator), trust, app


def _fig_envelope(trust, patient="p1", at=NOW, exam="chest_pa"):
    return create_record(
        patient_id=patient,
        exam_type=exam,
        raw_input=RadiographyParameters(DoseQuantity.mgy_cm2(197), 1225, ("lung",)),
        signer=trust.operator,
        tables=_TABLES,
        facility_id="h1",
        operator_id="dr-a",
        performed_at=at,
    )


class TestAuth:
    def test_unauthenticated_profile_403(self, service):
        signed, trust, app = service
        response = signed.client.get("/patients/p1/profile")
        assert response.status_code == 403

    def test_garbage_signature_403(self, service):
        signed, trust, app = service
        response = signed.client.get(
            "/patients/p1/profile",
            headers={"x-client-cert": "AAAA", "x-client-signature": "00"},
        )
        assert response.status_code == 403

    def test_professional_cannot_pull_reports(self, service):
        signed, trust, app = service
        response = signed.get("/reports/periodic?from=2025-01-01T00:00:00Z&to=2025-12-31T00:00:00Z")
        assert response.status_code == 403

    def test_status_is_open(self, service):
        signed, trust, app = service
        response = signed.client.get("/status")
        assert response.status_code == 200
        assert response.json()["role"] == "CENTRAL"
        assert response.json()["mode"] == "central"


class TestInvestigations:
    def test_envelope_ingestion_and_profile(self, service):
        signed, trust, app = service
        envelope = _fig_envelope(trust)
        response = signed.post("/investigations", {"envelope": envelope.to_json_obj()})
        assert response.status_code == 201
        body = response.json()
        assert body["effective_msv"] == pytest.approx(0.0192, abs=0.001)

        profile = signed.get(f"/patients/p1/profile?as_of=2025-12-01T00:00:00Z").json()
        assert profile["cumulative_total_msv"] == pytest.approx(body["effective_msv"])
        assert profile["records"][0]["record_id"] == body["record_id"]

    def test_duplicate_resubmission_is_idempotent(self, service):
        signed, trust, app = service
        envelope = _fig_envelope(trust)
        first = signed.post("/investigations", {"envelope": envelope.to_json_obj()})
        assert first.status_code == 201
        again = signed.post("/investigations", {"envelope": envelope.to_json_obj()})
        assert again.status_code == 200
        assert again.json()["status"] == "duplicate"
        assert app.state.service.store.size() == 1

    def test_tampered_envelope_422(self, service):
        signed, trust, app = service
        envelope = _fig_envelope(trust)
        tampered = SignedEnvelope(
            envelope.payload.replace(b'"p1"', b'"p2"', 1),
            envelope.signature,
            envelope.signer_cert_id,
        )
        response = signed.post("/investigations", {"envelope": tampered.to_json_obj()})
        assert response.status_code == 422

    def test_id_collision_409(self, service):
        signed, trust, app = service
        envelope = _fig_envelope(trust)
        assert signed.post("/investigations", {"envelope": envelope.to_json_obj()}).status_code == 201
        # same id, different (validly signed) bytes
        record = envelope.record()
        forged_payload = envelope.payload.replace(b'"exam_type":"chest_pa"', b'"exam_type":"skull"')
        assert forged_payload != envelope.payload
        forged = SignedEnvelope(
            forged_payload, trust.operator.sign(forged_payload), envelope.signer_cert_id
        )
        response = signed.post("/investigations", {"envelope": forged.to_json_obj()})
        assert response.status_code == 409

    def test_raw_mode_service_signs(self, service):
        signed, trust, app = service
        response = signed.post(
            "/investigations",
            {
                "raw": {"type": "catalog", "exam": "head"},
                "patient_id": "p9",
                "exam_type": "head",
                "performed_at": "2025-06-02T10:00:00Z",
            },
        )
        assert response.status_code == 201
        assert response.json()["effective_msv"] == 2.0

    def test_invalid_dose_inputs_400(self, service):
        signed, trust, app = service
        response = signed.post(
            "/investigations",
            {
                "raw": {
                    "type": "radiography",
                    "dap_mgy_cm2": 100,
                    "irradiated_area_cm2": 0,
                    "exposed_tissues": ["lung"],
                },
                "patient_id": "p9",
                "exam_type": "chest_pa",
            },
        )
        assert response.status_code == 400

    def test_unknown_patient_404(self, service):
        signed, trust, app = service
        assert signed.get("/patients/nobody/profile").status_code == 404


class TestWhatIf:
    def test_projection_without_persisting(self, service):
        signed, trust, app = service
        response = signed.post(
            "/whatif",
            {"patient_id": "p1", "exam_type": "abdomen", "as_of": "2025-06-01T00:00:00Z"},
        )
        assert response.status_code == 200
        body = response.json()
        assert body["proposed_effective_msv"] == 10.0
        assert body["projected"]["chest_equivalents_delta"] == 500.0
        assert app.state.service.store.size() == 0

    def test_head_on_recorded_history(self, service):
        signed, trust, app = service
        signed.post(
            "/investigations",
            {
                "raw": {"type": "catalog", "exam": "head"},
                "patient_id": "p1",
                "exam_type": "head",
                "performed_at": "2025-06-01T08:00:00Z",
            },
        )
        response = signed.post(
            "/whatif", {"patient_id": "p1", "exam_type": "head", "as_of": "2025-06-02T00:00:00Z"}
        )
        body = response.json()
        assert body["current"]["cumulative_total_msv"] == 2.0
        assert body["projected"]["cumulative_total_msv"] == 4.0


class TestSync:
    def test_empty_batch_noop(self, service):
        signed, trust, app = service
        admin = SignedClient(signed.client, trust.facility)
        response = admin.post("/sync", {"from_replica_id": "peer", "envelopes": []})
        assert response.status_code == 200
        assert response.json()["accepted"] == 0

    def test_disjoint_batch_grows_store(self, service):
        signed, trust, app = service
        admin = SignedClient(signed.client, trust.facility)
        envs = [_fig_envelope(trust, at=NOW + timedelta(minutes=i)) for i in range(3)]
        response = admin.post(
            "/sync",
            {"from_replica_id": "peer", "envelopes": [e.to_json_obj() for e in envs]},
        )
        assert response.status_code == 200
        assert response.json()["accepted"] == 3
        assert response.json()["store_size"] == 3

    def test_partial_batch_with_fault_422(self, service):
        signed, trust, app = service
        admin = SignedClient(signed.client, trust.facility)
        good = _fig_envelope(trust)
        bad = SignedEnvelope(good.payload.replace(b'"p1"', b'"px"'), good.signature, good.signer_cert_id)
        response = admin.post(
            "/sync",
            {"from_replica_id": "peer", "envelopes": [good.to_json_obj(), bad.to_json_obj()]},
        )
        assert response.status_code == 422
        assert response.json()["accepted"] == 1
        assert len(response.json()["faults"]) == 1

    def test_pull_cursor(self, service):
        signed, trust, app = service
        admin = SignedClient(signed.client, trust.facility)
        envs = [_fig_envelope(trust, at=NOW + timedelta(minutes=i)) for i in range(4)]
        admin.post("/sync", {"from_replica_id": "peer", "envelopes": [e.to_json_obj() for e in envs]})
        first = admin.get("/sync/pull?since_cursor=0&limit=3").json()
        assert len(first["envelopes"]) == 3
        rest = admin.get(f"/sync/pull?since_cursor={first['next_cursor']}&limit=3").json()
        assert len(rest["envelopes"]) == 1

    def test_binary_batch_content_type(self, service):
        from radledger.sync import SyncBatch, encode_batch

        signed, trust, app = service
        admin = SignedClient(signed.client, trust.facility)
        envs = [_fig_envelope(trust, at=NOW + timedelta(minutes=i)) for i in range(2)]
        raw = encode_batch(SyncBatch("peer", "central", envs, set()))
        response = admin.post("/sync", raw, content_type="application/octet-stream")
        assert response.status_code == 200
        assert response.json()["accepted"] == 2


class TestReports:
    def test_catalog_reference_report(self, service):
        signed, trust, app = service
        admin = SignedClient(signed.client, trust.facility)
        for i, exam in enumerate(["head", "head"]):
            signed.post(
                "/investigations",
                {
                    "raw": {"type": "catalog", "exam": exam},
                    "patient_id": f"p{i}",
                    "exam_type": exam,
                    "performed_at": f"2025-06-0{i + 1}T10:00:00Z",
                },
            )
        response = admin.get(
            "/reports/periodic?from=2025-01-01T00:00:00Z&to=2025-12-31T00:00:00Z"
        )
        assert response.status_code == 200
        (row,) = response.json()["rows"]
        assert row["count"] == 2 and row["estimate_msv"] == 4.0

    def test_bad_range_400(self, service):
        signed, trust, app = service
        admin = SignedClient(signed.client, trust.facility)
        response = admin.get(
            "/reports/periodic?from=2025-12-31T00:00:00Z&to=2025-01-01T00:00:00Z"
        )
        assert response.status_code == 400

    def test_tsv_download(self, service):
        signed, trust, app = service
        admin = SignedClient(signed.client, trust.facility)
        response = admin.get(
            "/reports/periodic?from=2025-01-01T00:00:00Z&to=2025-12-31T00:00:00Z&format=tsv"
        )
        assert response.status_code == 200
        assert response.text.startswith("exam_type\t")


class TestDurability:
    def test_restart_recovers_acknowledged_records(self, trust, tmp_path):
        config = trust.write_service_dir(tmp_path / "c1", role=ReplicaKind.CENTRAL)
        app1 = create_app(config)
        with TestClient(app1) as client:
            signed = SignedClient(client, trust.operator)
            envelope = _fig_envelope(trust)
            assert signed.post("/investigations", {"envelope": envelope.to_json_obj()}).status_code == 201

        app2 = create_app(config)
        with TestClient(app2) as client:
            signed = SignedClient(client, trust.operator)
            profile = signed.get("/patients/p1/profile?as_of=2025-12-01T00:00:00Z")
            assert profile.status_code == 200
            assert profile.json()["records"][0]["record_id"] == envelope.record_id()

    def test_replay_reproduces_identical_log_bytes(self, trust, tmp_path):
        envelopes = [_fig_envelope(trust, at=NOW + timedelta(minutes=i)) for i in range(5)]
        requests = [{"envelope": e.to_json_obj()} for e in envelopes]

        logs = []
        for run in range(2):
            config = trust.write_service_dir(tmp_path / f"replay{run}", role=ReplicaKind.CENTRAL)
            app = create_app(config)
            with TestClient(app) as client:
                signed = SignedClient(client, trust.operator)
                for body in requests:
                    assert signed.post("/investigations", body).status_code in (200, 201)
                    # replaying mid-stream must stay idempotent
                    signed.post("/investigations", requests[0])
            logs.append((config.data_dir / "envelopes.log").read_bytes())
        assert logs[0] == logs[1]


class TestLocalRole:
    def test_local_without_upstream_rejected(self, trust, tmp_path):
        from radledger.errors import ConfigError

        with pytest.raises(ConfigError):
            trust.write_service_dir(tmp_path / "l1", role=ReplicaKind.LOCAL)

    def test_local_mode_degrades_when_upstream_down(self, trust, tmp_path):
        config = trust.write_service_dir(
            tmp_path / "l2", role=ReplicaKind.LOCAL, upstream="http://127.0.0.1:1"
        )
        app = create_app(config)
        with TestClient(app) as client:
            status = client.get("/status").json()
            assert status["mode"] == "local-only"
            assert status["upstream_reachable"] is False
