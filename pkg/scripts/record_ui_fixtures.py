"""Record real API responses as fixtures for the dashboard's snapshot tests.

Runs the service in-process, seeds the documented demo history, and captures
the exact JSON the UI will render. Rerun after any API change:

    python3 scripts/record_ui_fixtures.py
"""
from __future__ import annotations

import json
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

from fastapi.testclient import TestClient

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from tests.service_harness import SignedClient, TrustSetup  # noqa: E402

from radledger.dosimetry import DosimetryTables  # noqa: E402
from radledger.ledger import CatalogReference, create_record  # noqa: E402
from radledger.service import create_app  # noqa: E402
from radledger.sync.replica import ReplicaKind  # noqa: E402

FIXTURES = Path(__file__).resolve().parent.parent / "frontend" / "fixtures"
AS_OF = "2025-12-01T00:00:00Z"


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    tables = DosimetryTables.load()
    with tempfile.TemporaryDirectory() as tmp:
        trust = TrustSetup(Path(tmp) / "trust")
        config = trust.write_service_dir(Path(tmp) / "central", role=ReplicaKind.CENTRAL)
        app = create_app(config)
        with TestClient(app) as client:
            signed = SignedClient(client, trust.operator)

            envelope = create_record(
                patient_id="demo-head-ct",
                exam_type="head",
                raw_input=CatalogReference("head"),
                signer=trust.operator,
                tables=tables,
                facility_id="hosp-1",
                operator_id="dr-a",
                performed_at=datetime(2025, 6, 1, 9, 30, tzinfo=timezone.utc),
            )
            assert signed.post(
                "/investigations", {"envelope": envelope.to_json_obj()}
            ).status_code == 201

            captures = {
                "profile_head_ct.json": signed.get(
                    f"/patients/demo-head-ct/profile?as_of={AS_OF}"
                ),
                "whatif_abdomen_empty.json": signed.post(
                    "/whatif",
                    {"patient_id": "demo-empty", "exam_type": "abdomen", "as_of": AS_OF},
                ),
                "catalog.json": signed.client.get("/catalog"),
                "status_central.json": signed.client.get("/status"),
            }
            for name, response in captures.items():
                assert response.status_code == 200, (name, response.status_code)
                (FIXTURES / name).write_text(
                    json.dumps(response.json(), indent=2, sort_keys=True) + "\n"
                )
                print("recorded", name)

        local_config = trust.write_service_dir(
            Path(tmp) / "local", role=ReplicaKind.LOCAL, upstream="http://127.0.0.1:1"
        )
        local_app = create_app(local_config)
        with TestClient(local_app) as client:
            response = client.get("/status")
            assert response.status_code == 200
            (FIXTURES / "status_local_only.json").write_text(
                json.dumps(response.json(), indent=2, sort_keys=True) + "\n"
            )
            print("recorded status_local_only.json")

    record_auth_vector()


def record_auth_vector() -> None:
    """Frozen request-signing vector: the TS client must reproduce it."""
    from radledger.pki import CertificateAuthority, Role, get_scheme
    from radledger.service import KeyIdentity
    from radledger.service.auth import build_auth_headers

    epoch = datetime(2024, 1, 1, tzinfo=timezone.utc)
    ca = CertificateAuthority.create("ui-demo-root", scheme="hmac-demo", now=epoch, seed=b"ui")
    keys = get_scheme("hmac-demo").generate_keypair(b"ui-identity")
    identity = KeyIdentity(
        certificate=ca.issue("ui-demo", Role.PROFESSIONAL, keys.public_key, now=epoch),
        private_key=keys.private_key,
    )
    method, path_qs = "POST", "/whatif"
    body = b'{"patient_id":"demo-empty","exam_type":"abdomen"}'
    headers = build_auth_headers(identity, method, path_qs, body)
    (FIXTURES / "auth_vector.json").write_text(
        json.dumps(
            {
                "identity": {
                    "certificate": identity.certificate.to_text(),
                    "private_key": identity.private_key.hex(),
                    "scheme": "hmac-demo",
                },
                "request": {"method": method, "path_qs": path_qs, "body": body.decode()},
                "headers": headers,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    print("recorded auth_vector.json")


if __name__ == "__main__":
    main()
