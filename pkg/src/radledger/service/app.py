"""The long-running LOCAL/CENTRAL service: durable ledger + HTTP/JSON API.

Every clinician and admin workflow is an endpoint here; the CLI and the web
dashboard are both plain clients of this contract. Ingested records are
fsynced to the append-only log before the 201 leaves the building, so an
acknowledged dose survives a process kill.
"""
from __future__ import annotations

import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import httpx
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from ..dosimetry import ENGINE_VERSION
from ..dosimetry.engine import isoformat_utc, parse_utc
from ..errors import (
    AuthorizationError,
    ConfigError,
    DomainError,
    IntegrityError,
    MissingCatalogEntryError,
    MissingFactorError,
    RadLedgerError,
    UnitError,
    WireFormatError,
)
from ..ledger.log import LedgerLog
from ..ledger.profiles import build_profile, whatif
from ..ledger.records import (
    SignedEnvelope,
    create_record,
    parse_raw_input,
    verify_recompute,
)
from ..ledger.reports import periodic_report
from ..pki.certificates import (
    Certificate,

    RevocationList,
    Role,
    verify_envelope,
)
from ..sync.replica import AddResult, ReplicaKind, ReplicaStore
from ..sync.wire import SyncBatch, decode_batch, encode_batch
from .auth import authenticate_request, build_auth_headers
from .config import ServiceConfig
from .identity import KeyIdentity

logger = logging.getLogger(__name__)

CLINICIAN_ROLES = {Role.PROFESSIONAL, Role.FACILITY, Role.CA}
ADMIN_ROLES = {Role.FACILITY, Role.CA}

SYNC_BINARY_CONTENT_TYPE = "application/octet-stream"

class ServiceState:
    """Everything the handlers share, wired once at startup."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.tables = config.tables()
        self.policy = config.policy()
        config.data_dir.mkdir(parents=True, exist_ok=True)

        trust_path = config.trust_root_path or config.data_dir / "trust_root.cert"
        if not Path(trust_path).exists():
            raise ConfigError(f"trust root certificate not found at {trust_path}")
        self.trust_root = Certificate.from_text(
            Path(trust_path).read_text(encoding="utf-8").strip()
        )

        self.certs_path = config.data_dir / "certs.txt"
        self.resolver: dict[str, Certificate] = {
            self.trust_root.cert_id: self.trust_root
        }
        if self.certs_path.exists():
            for line in self.certs_path.read_text(encoding="utf-8").splitlines():
                line = line.strip()
                if line:
                    cert = Certificate.from_text(line)
                    self.resolver[cert.cert_id] = cert

        self.crl_path = Path(config.crl_path) if config.crl_path else config.data_dir / "crl.txt"
        self._crl_mtime: Optional[float] = None
        self._crl: Optional[RevocationList] = None

        self.identity: Optional[KeyIdentity] = None
        if config.service_card_path and Path(config.service_card_path).exists():
            self.identity = KeyIdentity.load(config.service_card_path)
            self.resolver.setdefault(self.identity.certificate.cert_id, self.identity.certificate)

        self.log = LedgerLog(config.data_dir / "envelopes.log")
        self.store = ReplicaStore(
            kind=config.role,
            replica_id=config.replica_id,
            verifier=self._verify_envelope,
        )
        for envelope in self.log.envelopes():
            # the log is the durable source of truth; re-admit without re-verifying
            self.store.verifier = None
            self.store.add(envelope)
            self.store.verifier = self._verify_envelope
        self.store._on_append = self.log.append

    # -- trust helpers -----------------------------------------------------

    def crl(self) -> Optional[RevocationList]:
        if not self.crl_path.exists():
            return None
        mtime = self.crl_path.stat().st_mtime
        if self._crl is None or mtime != self._crl_mtime:
            self._crl = RevocationList.from_text(
                self.crl_path.read_text(encoding="utf-8").strip()
            )
            self._crl_mtime = mtime
        return self._crl

    def _verify_envelope(self, envelope: SignedEnvelope):
        return verify_envelope(
            envelope,
            self.trust_root,
            self.resolver,
            envelope.record().performed_at,
            self.crl(),
        )

    def remember_certificate(self, cert: Certificate) -> None:
        if cert.cert_id not in self.resolver:
            self.resolver[cert.cert_id] = cert
            with open(self.certs_path, "a", encoding="utf-8") as fh:
                fh.write(cert.to_text() + "\n")

    def authenticate(self, request: Request, body: bytes):
        path_qs = request.url.path
        if request.url.query:
            path_qs += "?" + request.url.query
        client = authenticate_request(
            request.headers,
            request.method,
            path_qs,
            body,
            self.trust_root,
            self.resolver,
            self.crl(),
        )
        self.remember_certificate(client.certificate)
        return client

    # -- sync helpers -------------------------------------------------------

    def apply_batch(self, batch: SyncBatch) -> dict:
        accepted = duplicates = 0
        faults = []
        for envelope in batch.envelopes:
            result = self.store.add(envelope)
            if result is AddResult.ADDED:
                accepted += 1
            elif result is AddResult.DUPLICATE:
                duplicates += 1
            else:
                faults.append(self.store.faults()[-1].to_json_obj())
        self.store.confirm_central(batch.central_confirmed)
        return {
            "accepted": accepted,
            "duplicates": duplicates,
            "faults": faults,
            "store_size": self.store.size(),
            "central_confirmed": sorted(self.store.central_confirmed()),
        }

    def upstream_reachable(self) -> Optional[bool]:
        if self.config.role is not ReplicaKind.LOCAL:
            return None
        try:
            response = httpx.get(
                self.config.upstream_url.rstrip("/") + "/status", timeout=2.0
            )
            return response.status_code < 500
        except httpx.HTTPError:
            return False

def _error_response(err: Exception) -> JSONResponse:
    if isinstance(err, AuthorizationError):
        status = 403
    elif isinstance(err, (MissingCatalogEntryError,)):
        status = 404
    elif isinstance(err, (DomainError, UnitError, MissingFactorError, ConfigError)):
        status = 400
    elif isinstance(err, WireFormatError):
        status = 400
    elif isinstance(err, IntegrityError):
        status = 409
    elif isinstance(err, RadLedgerError):
        status = 422
    else:
        raise err
    return JSONResponse({"error": type(err).__name__, "detail": str(err)}, status_code=status)

def create_app(config: ServiceConfig, static_dir: Optional[Path] = None) -> FastAPI:
    state = ServiceState(config)
    app = FastAPI(title="radledger service", version="0.1.0", docs_url=None, redoc_url=None)
    app.state.service = state

    def guard(request: Request, body: bytes, roles: set) -> None:
        client = state.authenticate(request, body)
        if client.role not in roles:
            raise AuthorizationError(
                f"role {client.role.value} may not call {request.url.path}"
            )

    @app.exception_handler(RadLedgerError)
    async def _handle_domain_errors(request: Request, err: RadLedgerError):
        return _error_response(err)

    # -- open metadata ------------------------------------------------------

    @app.get("/status")
    async def status() -> dict:
        upstream = state.upstream_reachable()
        if state.config.role is ReplicaKind.CENTRAL:
            mode = "central"
        else:
            mode = "normal" if upstream else "local-only"
        return {
            "role": state.config.role.value,
            "replica_id": state.config.replica_id,
            "records": state.store.size(),
            "upstream_url": state.config.upstream_url,
            "upstream_reachable": upstream,
            "mode": mode,
            "engine_version": ENGINE_VERSION,
        }

    @app.get("/catalog")
    async def catalog() -> dict:
        entries = [
            {
                "exam": e.exam,
                "display_name": e.display_name,
                "effective_msv": e.effective_msv,
                "chest_equivalents": e.chest_equivalents,
            }
            for e in (state.tables.catalog.entry(x) for x in state.tables.catalog.exams())
        ]
        return {"entries": entries, "pa_chest_msv": 0.02}

    # -- clinician endpoints --------------------------------------------------

    @app.get("/patients/{patient_id}/profile")
    async def patient_profile(patient_id: str, request: Request):
        guard(request, b"", CLINICIAN_ROLES)
        as_of_raw = request.query_params.get("as_of")
        age_raw = request.query_params.get("age")
        as_of = parse_utc(as_of_raw) if as_of_raw else datetime.now(timezone.utc)
        envelopes = state.store.envelopes_for_patient(patient_id)
        if not envelopes:
            return JSONResponse(
                {"error": "UnknownPatient", "detail": f"no records for {patient_id!r}"},
                status_code=404,
            )
        profile = build_profile(
            envelopes,
            patient_id,
            as_of,
            state.policy,
            state.tables,
            age_years=int(age_raw) if age_raw else None,
        )
        return profile.to_json_obj()

    @app.post("/investigations")
    async def post_investigation(request: Request):
        body = await request.body()
        guard(request, body, CLINICIAN_ROLES)
        payload = json.loads(body or b"{}")

        if "envelope" in payload:
            envelope = SignedEnvelope.from_json_obj(payload["envelope"])
            verdict = state._verify_envelope(envelope)
            if not verdict.accepted:
                return JSONResponse(
                    {"error": "VerificationFailure", "detail": verdict.reason.value},
                    status_code=422,
                )
            if not verify_recompute(envelope.record(), state.tables):
                return JSONResponse(
                    {"error": "VerificationFailure", "detail": "RECOMPUTE_MISMATCH"},
                    status_code=422,
                )
        elif "raw" in payload:
            if state.identity is None:
                raise ConfigError("service has no signing identity for raw inputs")
            raw = parse_raw_input(payload["raw"])
            performed_at = (
                parse_utc(payload["performed_at"])
                if payload.get("performed_at")
                else datetime.now(timezone.utc).replace(microsecond=0)
            )
            envelope = create_record(
                patient_id=payload["patient_id"],
                exam_type=payload.get("exam_type") or payload["raw"].get("exam", "unknown"),
                raw_input=raw,
                signer=state.identity,
                tables=state.tables,
                facility_id=payload.get("facility_id", state.config.replica_id),
                operator_id=payload.get("operator_id", "service"),
                performed_at=performed_at,
                crl=state.crl(),
            )
        else:
            raise DomainError("body must carry 'envelope' or 'raw'")

        record_id = envelope.record_id()
        existing = state.store.get(record_id)
        if existing is not None:
            if existing.payload == envelope.payload and existing.signature == envelope.signature:
                return JSONResponse(
                    {"status": "duplicate", "record_id": record_id}, status_code=200
                )
            return JSONResponse(
                {"error": "IdCollision", "record_id": record_id}, status_code=409
            )
        result = state.store.add(envelope)
        if result is not AddResult.ADDED:
            fault = state.store.faults()[-1]
            status_code = 409 if fault.reason == "ID_COLLISION" else 422
            return JSONResponse(
                {"error": fault.reason, "detail": fault.detail}, status_code=status_code
            )
        record = envelope.record()
        return JSONResponse(
            {
                "status": "recorded",
                "record_id": record_id,
                "effective_msv": record.effective_dose.value,
                "performed_at": isoformat_utc(record.performed_at),
            },
            status_code=201,
        )

    @app.post("/whatif")
    async def post_whatif(request: Request):
        body = await request.body()
        guard(request, body, CLINICIAN_ROLES)
        payload = json.loads(body or b"{}")
        patient_id = payload["patient_id"]
        as_of = (
            parse_utc(payload["as_of"])
            if payload.get("as_of")
            else datetime.now(timezone.utc)
        )
        profile = build_profile(
            state.store.envelopes_for_patient(patient_id),
            patient_id,
            as_of,
            state.policy,
            state.tables,
        )
        proposed_inputs = None
        if payload.get("raw"):
            proposed_inputs = parse_raw_input(payload["raw"])
        projection = whatif(
            profile,
            payload.get("exam_type") or payload.get("raw", {}).get("exam", ""),
            state.tables,
            state.policy,
            proposed_inputs=proposed_inputs,
            now=as_of,
        )
        result = projection.to_json_obj()
        result["current"] = {
            "cumulative_total_msv": profile.cumulative_total_msv,
            "threshold_band": profile.to_json_obj()["threshold_band"],
            "chest_equivalents_total": profile.chest_equivalents_total,
        }
        return result

    # -- sync endpoints -------------------------------------------------------

    @app.post("/sync")
    async def post_sync(request: Request):
        body = await request.body()
        guard(request, body, ADMIN_ROLES)
        if request.headers.get("content-type", "").startswith(SYNC_BINARY_CONTENT_TYPE):
            batch = decode_batch(body)
        else:
            obj = json.loads(body or b"{}")
            batch = SyncBatch(
                from_replica_id=obj.get("from_replica_id", "peer"),
                to_replica_id=state.config.replica_id,
                envelopes=[SignedEnvelope.from_json_obj(e) for e in obj.get("envelopes", [])],
                central_confirmed=set(obj.get("central_confirmed", [])),
            )
        outcome = state.apply_batch(batch)
        status_code = 422 if outcome["faults"] else 200
        return JSONResponse(outcome, status_code=status_code)

    @app.get("/sync/pull")
    async def sync_pull(request: Request):
        guard(request, b"", ADMIN_ROLES)
        cursor = int(request.query_params.get("since_cursor", 0))
        limit = int(request.query_params.get("limit", 500))
        envelopes, next_cursor = state.log.since(cursor, limit=limit)
        accept = request.headers.get("accept", "")
        if SYNC_BINARY_CONTENT_TYPE in accept:
            batch = SyncBatch(
                from_replica_id=state.config.replica_id,
                to_replica_id="peer",
                envelopes=envelopes,
                central_confirmed=state.store.central_confirmed(),
            )
            return Response(
                content=encode_batch(batch),
                media_type=SYNC_BINARY_CONTENT_TYPE,
                headers={"x-next-cursor": str(next_cursor)},
            )
        return {
            "envelopes": [e.to_json_obj() for e in envelopes],
            "next_cursor": next_cursor,
            "central_confirmed": sorted(state.store.central_confirmed()),
        }

    @app.post("/sync/run")
    async def sync_run(request: Request):
        body = await request.body()
        guard(request, body, ADMIN_ROLES)
        if state.config.role is not ReplicaKind.LOCAL:
            raise DomainError("only a LOCAL service syncs with an upstream")
        if state.identity is None:
            raise ConfigError("service has no signing identity for outbound sync")
        outcome = run_upstream_sync(state)
        return outcome

    # -- reports ---------------------------------------------------------------

    @app.get("/reports/periodic")
    async def reports_periodic(request: Request):
        guard(request, b"", ADMIN_ROLES)
        params = request.query_params
        if "from" not in params or "to" not in params:
            raise DomainError("from and to query parameters are required")
        window_from, window_to = parse_utc(params["from"]), parse_utc(params["to"])
        reference = params.get("reference", "catalog")
        reference_means = None
        if reference == "catalog":
            reference_means = {
                exam: state.tables.catalog.entry(exam).effective_msv
                for exam in state.tables.catalog.exams()
            }
        records = [e.record() for e in state.store.envelopes()]
        report = periodic_report(records, window_from, window_to, reference_means)
        if params.get("format") == "tsv":
            return PlainTextResponse(report.to_tsv(), media_type="text/tab-separated-values")
        return report.to_json_obj()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=static_dir, html=True), name="ui")

    return app

def run_upstream_sync(state: ServiceState) -> dict:
    """Bidirectional anti-entropy with the configured upstream over HTTP.

    Pull-based and initiated by the less-durable replica, per the protocol
    direction rule. An unreachable upstream is not an error: records stay
    queued locally and the caller sees the degraded mode.
    """
    base = state.config.upstream_url.rstrip("/")
    identity = state.identity
    pulled = pushed = 0
    try:
        cursor = 0
        while True:
            path_qs = f"/sync/pull?since_cursor={cursor}&limit=500"
            response = httpx.get(
                base + path_qs,
                headers=build_auth_headers(identity, "GET", path_qs, b""),
                timeout=10.0,
            )
            response.raise_for_status()
            data = response.json()
            for obj in data["envelopes"]:
                if state.store.add(SignedEnvelope.from_json_obj(obj)) is AddResult.ADDED:
                    pulled += 1
            state.store.confirm_central(data.get("central_confirmed", []))
            if data["next_cursor"] == cursor:
                break
            cursor = data["next_cursor"]

        body = json.dumps(
            {
                "from_replica_id": state.config.replica_id,
                "envelopes": [e.to_json_obj() for e in state.store.envelopes()],
                "central_confirmed": sorted(state.store.central_confirmed()),
            }
        ).encode("utf-8")
        response = httpx.post(
            base + "/sync",
            content=body,
            headers={
                "content-type": "application/json",
                **build_auth_headers(identity, "POST", "/sync", body),
            },
            timeout=30.0,
        )
        response.raise_for_status()
        push_outcome = response.json()
        pushed = push_outcome.get("accepted", 0)
        state.store.confirm_central(push_outcome.get("central_confirmed", []))
        return {
            "upstream_reachable": True,
            "pulled": pulled,
            "pushed": pushed,
            "store_size": state.store.size(),
        }
    except (httpx.HTTPError, OSError) as err:
        logger.warning("upstream sync failed: %s", err)
        return {
            "upstream_reachable": False,
            "pulled": pulled,
            "pushed": pushed,
            "queued": state.store.size(),
            "detail": str(err),
        }
