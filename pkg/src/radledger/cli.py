"""Operator command line: services, cards, records, profiles, sync, reports.

Every service capability is reachable here, so the whole system can run
headless. ``--format json`` prints stable machine-readable documents (the
contract covered by golden tests); human output is for eyes only.

Exit codes: 0 success, 1 generic failure, 2 missing/invalid configuration,
3 verification or authorization failure, 4 integrity fault.
"""
from __future__ import annotations

import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from random import Random
from typing import Optional

import click
import httpx

from .dosimetry import DosimetryTables, LimitPolicy, chest_equivalents, parse_utc
from .dosimetry.engine import isoformat_utc
from .errors import ConfigError, DomainError, RadLedgerError, VerificationError
from .ledger.profiles import build_profile, whatif
from .ledger.records import SignedEnvelope, create_record, parse_raw_input
from .ledger.reports import periodic_report
from .pki.cards import CardKind, EmulatedCard, personalize_card, replace_card
from .pki.certificates import CertificateAuthority, Role, verify_envelope
from .pki.signing import get_scheme
from .scenarios import load_scenario, replay
from .service.auth import build_auth_headers
from .service.config import ServiceConfig
from .service.identity import KeyIdentity
from .sync.diskstore import DiskStore, init_store_dir
from .sync.engine import merge
from .sync.replica import AddResult, ReplicaKind

CA_FILE = "ca.json"
TRUST_ROOT_FILE = "trust_root.cert"
CRL_FILE = "crl.txt"
CERTS_FILE = "certs.txt"


def _emit(ctx: click.Context, document: dict, human: str) -> None:
    if ctx.obj["format"] == "json":
        click.echo(json.dumps(document, indent=2, sort_keys=True))
    else:
        click.echo(human)


def _now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def _load_ca(ca_dir: Path) -> CertificateAuthority:
    path = Path(ca_dir) / CA_FILE
    if not path.exists():
        raise ConfigError(f"no certificate authority at {path}")
    return CertificateAuthority.load(path)


def _save_ca(ca: CertificateAuthority, ca_dir: Path) -> None:
    ca_dir = Path(ca_dir)
    ca_dir.mkdir(parents=True, exist_ok=True)
    ca.save(ca_dir / CA_FILE)
    (ca_dir / TRUST_ROOT_FILE).write_text(ca.cert.to_text() + "\n")
    (ca_dir / CRL_FILE).write_text(ca.crl().to_text() + "\n")
    (ca_dir / CERTS_FILE).write_text(
        "".join(c.to_text() + "\n" for c in ca.issued.values())
    )


def _open_card(card_path: Path, pin: Optional[str]) -> EmulatedCard:
    card = EmulatedCard.from_text(Path(card_path).read_text(encoding="utf-8").strip())
    if pin is not None:
        if not card.unlock(pin):
            raise VerificationError("wrong PIN" + (" (card locked)" if card.pin_state.locked else ""))
    return card


def _save_card(card: EmulatedCard, card_path: Path) -> None:
    Path(card_path).write_text(card.to_text() + "\n", encoding="utf-8")


def _signer_from_flags(identity: Optional[str], card: Optional[str], pin: Optional[str]):
    if identity:
        return KeyIdentity.load(Path(identity))
    if card:
        return _open_card(Path(card), pin)
    raise ConfigError("this operation needs --identity or --card credentials")


def _gather_envelopes(stores: tuple[str, ...], cards: tuple[str, ...]) -> list[SignedEnvelope]:
    envelopes: dict[str, SignedEnvelope] = {}
    for store_dir in stores:
        disk = DiskStore(Path(store_dir))
        for env in disk.store.envelopes():
            envelopes.setdefault(env.record_id(), env)
    for card_path in cards:
        card = EmulatedCard.from_text(Path(card_path).read_text(encoding="utf-8").strip())
        for env in card.store.envelopes():
            envelopes.setdefault(env.record_id(), env)
    return list(envelopes.values())


@click.group()
@click.option(
    "--format",
    "output_format",
    type=click.Choice(["human", "json"]),
    default="human",
    show_default=True,
    help="Output mode; json is the stable machine contract.",
)
@click.pass_context
def main(ctx: click.Context, output_format: str) -> None:
    """Signed, replicated ledger of radiological investigations."""
    ctx.ensure_object(dict)
    ctx.obj["format"] = output_format


def run() -> None:
    """Console entry point with the documented exit-code mapping."""
    try:
        main(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.ClickException as err:
        err.show()
        sys.exit(2)
    except RadLedgerError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(err.exit_code)


# --------------------------------------------------------------------------
# PKI commands
# --------------------------------------------------------------------------


@main.group()
def ca() -> None:
    """Certificate authority management."""


@ca.command("init")
@click.option("--name", required=True)
@click.option("--dir", "ca_dir", required=True, type=click.Path(path_type=Path))
@click.option("--scheme", default="ed25519", show_default=True)
@click.option("--days", default=3650, show_default=True)
@click.pass_context
def ca_init(ctx, name: str, ca_dir: Path, scheme: str, days: int) -> None:
    """Create a self-signed root and its trust material files."""
    if (ca_dir / CA_FILE).exists():
        raise ConfigError(f"certificate authority already exists in {ca_dir}")
    authority = CertificateAuthority.create(name, scheme=scheme, validity_days=days, now=_now())
    _save_ca(authority, ca_dir)
    _emit(
        ctx,
        {"cert_id": authority.cert.cert_id, "subject": name, "dir": str(ca_dir)},
        f"root {authority.cert.cert_id} ({name}) written to {ca_dir}",
    )


@main.group()
def cert() -> None:
    """Issue and revoke certificates."""


@cert.command("issue")
@click.option("--ca-dir", required=True, type=click.Path(path_type=Path))
@click.option("--subject", required=True)
@click.option("--role", required=True, type=click.Choice([r.value for r in Role]))
@click.option("--days", default=1825, show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path),
              help="Identity file to write (certificate + new private key).")
@click.pass_context
def cert_issue(ctx, ca_dir: Path, subject: str, role: str, days: int, out: Path) -> None:
    authority = _load_ca(ca_dir)
    keys = get_scheme(authority.cert.scheme).generate_keypair()
    certificate = authority.issue(subject, Role(role), keys.public_key, validity_days=days, now=_now())
    KeyIdentity(certificate, keys.private_key).save(out)
    _save_ca(authority, ca_dir)
    _emit(
        ctx,
        {"cert_id": certificate.cert_id, "subject": subject, "role": role, "identity": str(out)},
        f"issued {certificate.cert_id} ({role}) for {subject}; identity at {out}",
    )


@cert.command("revoke")
@click.option("--ca-dir", required=True, type=click.Path(path_type=Path))
@click.option("--cert-id", required=True)
@click.pass_context
def cert_revoke(ctx, ca_dir: Path, cert_id: str) -> None:
    authority = _load_ca(ca_dir)
    authority.revoke(cert_id, at=_now())
    _save_ca(authority, ca_dir)
    _emit(ctx, {"revoked": cert_id}, f"revoked {cert_id}")


@main.group()
def card() -> None:
    """Personalize, inspect, and replace radiation safety cards."""


@card.command("personalize")
@click.option("--ca-dir", required=True, type=click.Path(path_type=Path))
@click.option("--kind", required=True, help="CRSC/CITIZEN or PRSC/PROFESSIONAL.")
@click.option("--holder", required=True)
@click.option("--pin", required=True)
@click.option("--capacity", default=200, show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.pass_context
def card_personalize(ctx, ca_dir, kind, holder, pin, capacity, out) -> None:
    authority = _load_ca(ca_dir)
    new_card = personalize_card(
        CardKind.parse(kind), holder, authority, pin=pin, capacity=capacity, now=_now()
    )
    _save_card(new_card, out)
    _save_ca(authority, ca_dir)
    _emit(
        ctx,
        {
            "card_kind": new_card.kind.code,
            "holder": holder,
            "cert_id": new_card.certificate.cert_id,
            "card_file": str(out),
        },
        f"{new_card.kind.code} for {holder} written to {out}",
    )


@card.command("read")
@click.argument("card_file", type=click.Path(path_type=Path))
@click.pass_context
def card_read(ctx, card_file: Path) -> None:
    the_card = EmulatedCard.from_text(Path(card_file).read_text(encoding="utf-8").strip())
    info = the_card.select()
    records = [
        {
            "record_id": e.record_id(),
            "performed_at": isoformat_utc(e.record().performed_at),
            "exam_type": e.record().exam_type,
            "effective_msv": e.record().effective_dose.value,
        }
        for e in sorted(
            the_card.read_records(), key=lambda e: (e.record().performed_at, e.record_id())
        )
    ]
    document = {"card": info, "records": records}
    human = [f"{info['card_kind']} {info['holder']} ({info['records']} records)"]
    human += [
        f"  {r['performed_at']}  {r['exam_type']:<24} {r['effective_msv']:.4f} mSv"
        for r in records
    ]
    _emit(ctx, document, "\n".join(human))


@card.command("replace")
@click.option("--ca-dir", required=True, type=click.Path(path_type=Path))
@click.option("--holder", required=True)
@click.option("--central", "central_dir", required=True, type=click.Path(path_type=Path))
@click.option("--pin", required=True)
@click.option("--capacity", default=200, show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.pass_context
def card_replace(ctx, ca_dir, holder, central_dir, pin, capacity, out) -> None:
    """Rebuild a lost card from the central store; revokes the old cards."""
    authority = _load_ca(ca_dir)
    disk = DiskStore(Path(central_dir))
    new_card = replace_card(
        holder, disk.store, authority, pin=pin, capacity=capacity, now=_now()
    )
    _save_card(new_card, out)
    _save_ca(authority, ca_dir)
    _emit(
        ctx,
        {
            "holder": holder,
            "cert_id": new_card.certificate.cert_id,
            "records": new_card.store.size(),
            "card_file": str(out),
        },
        f"replacement card for {holder} holds {new_card.store.size()} records",
    )


# --------------------------------------------------------------------------
# Stores and records
# --------------------------------------------------------------------------


@main.group()
def store() -> None:
    """Local/central store directories."""


@store.command("init")
@click.option("--dir", "store_dir", required=True, type=click.Path(path_type=Path))
@click.option("--kind", required=True, type=click.Choice([k.value for k in ReplicaKind]))
@click.option("--replica-id", default=None)
@click.pass_context
def store_init(ctx, store_dir: Path, kind: str, replica_id: Optional[str]) -> None:
    init_store_dir(store_dir, ReplicaKind(kind), replica_id)
    _emit(ctx, {"dir": str(store_dir), "kind": kind}, f"{kind} store initialized at {store_dir}")


def _build_raw_input(catalog, dap, area, tissues, ctdi, length, anatomy, tables, exam):
    given = [x is not None for x in (dap, ctdi)]
    if catalog:
        return {"type": "catalog", "exam": exam}
    if dap is not None:
        if area is None:
            raise DomainError("--dap needs --area")
        tissue_list = (
            [t.strip() for t in tissues.split(",")]
            if tissues
            else list(tables.exam_tissues.tissues_for(exam))
        )
        return {
            "type": "radiography",
            "dap_mgy_cm2": dap,
            "irradiated_area_cm2": area,
            "exposed_tissues": tissue_list,
        }
    if ctdi is not None:
        if length is None:
            raise DomainError("--ctdi needs --length")
        return {
            "type": "ct",
            "ctdi_vol_mgy": ctdi,
            "scan_length_cm": length,
            "anatomy": anatomy or exam,
        }
    raise DomainError("give --catalog, or --dap/--area, or --ctdi/--length")


@main.command("record")
@click.option("--card", "card_path", required=True, type=click.Path(path_type=Path),
              help="Signing professional card.")
@click.option("--pin", required=True)
@click.option("--patient", required=True)
@click.option("--exam", required=True)
@click.option("--catalog", is_flag=True, help="Use the catalog reference dose.")
@click.option("--dap", type=float, default=None, help="Dose-area product, mGy*cm^2.")
@click.option("--gy-dap", type=float, default=None, help="Dose-area product, Gy*cm^2.")
@click.option("--area", type=float, default=None, help="Irradiated area, cm^2.")
@click.option("--tissues", default=None, help="Comma-separated exposed tissues.")
@click.option("--ctdi", type=float, default=None, help="CTDI_vol, mGy.")
@click.option("--length", type=float, default=None, help="Scan length, cm.")
@click.option("--anatomy", default=None)
@click.option("--at", "performed_at", default=None, help="UTC timestamp; defaults to now.")
@click.option("--facility", default="facility-1")
@click.option("--store", "store_dir", default=None, type=click.Path(path_type=Path))
@click.option("--service", "service_url", default=None)
@click.option("--seed", type=int, default=None, help="Deterministic record ids (demos/tests).")
@click.pass_context
def record_cmd(ctx, card_path, pin, patient, exam, catalog, dap, gy_dap, area, tissues,
               ctdi, length, anatomy, performed_at, facility, store_dir, service_url, seed) -> None:
    """Record one investigation: compute dose, sign, store or submit."""
    tables = DosimetryTables.load()
    signer = _open_card(card_path, pin)
    if gy_dap is not None:
        dap = gy_dap * 1000.0
    raw_obj = _build_raw_input(catalog, dap, area, tissues, ctdi, length, anatomy, tables, exam)
    envelope = create_record(
        patient_id=patient,
        exam_type=exam,
        raw_input=parse_raw_input(raw_obj),
        signer=signer,
        tables=tables,
        facility_id=facility,
        operator_id=signer.holder,
        performed_at=parse_utc(performed_at) if performed_at else _now(),
        rng=Random(seed) if seed is not None else None,
    )
    record = envelope.record()

    destination = "unstored"
    if store_dir:
        disk = DiskStore(Path(store_dir))
        disk.store.add(envelope)
        disk.close()
        destination = str(store_dir)
    if service_url:
        body = json.dumps({"envelope": envelope.to_json_obj()}).encode("utf-8")
        response = httpx.post(
            service_url.rstrip("/") + "/investigations",
            content=body,
            headers={
                "content-type": "application/json",
                **build_auth_headers(signer, "POST", "/investigations", body),
            },
            timeout=10.0,
        )
        if response.status_code not in (200, 201):
            raise VerificationError(f"service rejected record: {response.status_code} {response.text}")
        destination = service_url

    _emit(
        ctx,
        {
            "record_id": record.record_id,
            "patient_id": patient,
            "exam_type": exam,
            "effective_msv": record.effective_dose.value,
            "chest_equivalents": chest_equivalents(record.effective_dose),
            "stored_to": destination,
        },
        f"effective dose {record.effective_dose.value:.4f} mSv "
        f"({chest_equivalents(record.effective_dose):.1f} chest equivalents)\n"
        f"record {record.record_id} -> {destination}",
    )


@main.command("profile")
@click.option("--patient", required=True)
@click.option("--store", "stores", multiple=True, type=click.Path(path_type=Path))
@click.option("--card", "cards", multiple=True, type=click.Path(path_type=Path))
@click.option("--service", "service_url", default=None)
@click.option("--identity", default=None, type=click.Path(path_type=Path))
@click.option("--auth-card", default=None, type=click.Path(path_type=Path))
@click.option("--pin", default=None)
@click.option("--as-of", "as_of", default=None)
@click.option("--age", type=int, default=None)
@click.pass_context
def profile_cmd(ctx, patient, stores, cards, service_url, identity, auth_card, pin, as_of, age) -> None:
    """Patient dose history, cumulative dose, band, and flags."""
    as_of_dt = parse_utc(as_of) if as_of else _now()
    if service_url:
        signer = _signer_from_flags(identity, auth_card, pin)
        path_qs = f"/patients/{patient}/profile?as_of={isoformat_utc(as_of_dt)}"
        if age is not None:
            path_qs += f"&age={age}"
        response = httpx.get(
            service_url.rstrip("/") + path_qs,
            headers=build_auth_headers(signer, "GET", path_qs, b""),
            timeout=10.0,
        )
        if response.status_code == 404:
            document = None
        elif response.status_code != 200:
            raise VerificationError(f"service error {response.status_code}: {response.text}")
        else:
            document = response.json()
    else:
        envelopes = _gather_envelopes(stores, cards)
        profile = build_profile(
            envelopes, patient, as_of_dt, LimitPolicy(), DosimetryTables.load(), age_years=age
        )
        document = profile.to_json_obj()

    if document is None:
        document = {"patient_id": patient, "records": [], "cumulative_total_msv": 0.0}
        _emit(ctx, document, f"{patient}: no records")
        return
    human = [
        f"{patient}: {len(document['records'])} records, "
        f"{document['cumulative_total_msv']:.4f} mSv cumulative "
        f"({document.get('chest_equivalents_total', 0):.1f} chest equivalents)",
        f"band: {document['threshold_band']['range']} - {document['threshold_band']['effect']}",
    ]
    for flag in document.get("limit_flags", []):
        human.append(f"FLAG {flag['name']}: {flag['observed_msv']:.2f} >= {flag['limit_msv']} mSv")
    _emit(ctx, document, "\n".join(human))


@main.command("whatif")
@click.option("--patient", required=True)
@click.option("--exam", required=True)
@click.option("--store", "stores", multiple=True, type=click.Path(path_type=Path))
@click.option("--card", "cards", multiple=True, type=click.Path(path_type=Path))
@click.option("--service", "service_url", default=None)
@click.option("--identity", default=None, type=click.Path(path_type=Path))
@click.option("--auth-card", default=None, type=click.Path(path_type=Path))
@click.option("--pin", default=None)
@click.option("--as-of", "as_of", default=None)
@click.pass_context
def whatif_cmd(ctx, patient, exam, stores, cards, service_url, identity, auth_card, pin, as_of) -> None:
    """Project the cumulative dose as if the exam were performed now."""
    as_of_dt = parse_utc(as_of) if as_of else _now()
    if service_url:
        signer = _signer_from_flags(identity, auth_card, pin)
        body = json.dumps(
            {"patient_id": patient, "exam_type": exam, "as_of": isoformat_utc(as_of_dt)}
        ).encode("utf-8")
        response = httpx.post(
            service_url.rstrip("/") + "/whatif",
            content=body,
            headers={
                "content-type": "application/json",
                **build_auth_headers(signer, "POST", "/whatif", body),
            },
            timeout=10.0,
        )
        if response.status_code != 200:
            raise VerificationError(f"service error {response.status_code}: {response.text}")
        document = response.json()
    else:
        tables = DosimetryTables.load()
        policy = LimitPolicy()
        envelopes = _gather_envelopes(stores, cards)
        current = build_profile(envelopes, patient, as_of_dt, policy, tables)
        document = whatif(current, exam, tables, policy).to_json_obj()

    projected = document["projected"]
    human = [
        f"{exam} adds {document['proposed_effective_msv']:.4f} mSv "
        f"({projected['chest_equivalents_delta']:.1f} chest equivalents)",
        f"projected cumulative: {projected['cumulative_total_msv']:.4f} mSv "
        f"in band {projected['threshold_band']['range']}",
    ]
    for flag in projected.get("limit_flags", []):
        human.append(f"WOULD FLAG {flag['name']}: {flag['observed_msv']:.2f} mSv")
    _emit(ctx, document, "\n".join(human))


# --------------------------------------------------------------------------
# Sync, reports, scenarios, service
# --------------------------------------------------------------------------


def _open_endpoint(spec: str, verifier=None):
    """A sync endpoint: store dir or card file path."""
    path = Path(spec)
    if path.is_dir():
        return DiskStore(path, verifier=verifier)
    if path.is_file():
        return EmulatedCard.from_text(path.read_text(encoding="utf-8").strip())
    raise ConfigError(f"{spec} is neither a store directory nor a card file")


@main.command("sync")
@click.option("--a", "side_a", required=True, help="Store dir, card file, or service URL.")
@click.option("--b", "side_b", required=True, help="Store dir, card file, or service URL.")
@click.option("--identity", default=None, type=click.Path(path_type=Path),
              help="Identity for URL endpoints.")
@click.pass_context
def sync_cmd(ctx, side_a, side_b, identity) -> None:
    """Anti-entropy between two replicas."""
    urls = [s for s in (side_a, side_b) if s.startswith("http://") or s.startswith("https://")]
    if len(urls) == 2:
        raise ConfigError("sync between two URLs is not supported; run it on one side")

    if urls:
        (url,) = urls
        local_spec = side_a if side_b == url else side_b
        endpoint = _open_endpoint(local_spec)
        the_store = endpoint.store
        signer = KeyIdentity.load(identity) if identity else None
        if signer is None:
            raise ConfigError("syncing with a URL needs --identity")
        outcome = _sync_with_url(the_store, url, signer)
        if isinstance(endpoint, DiskStore):
            endpoint.close()
        else:
            _save_card(endpoint, Path(local_spec))
        _emit(ctx, outcome, f"pulled {outcome['pulled']}, pushed {outcome['pushed']}")
        return

    endpoint_a = _open_endpoint(side_a)
    endpoint_b = _open_endpoint(side_b)
    store_a = endpoint_a.store
    store_b = endpoint_b.store
    outcome = merge(store_a, store_b)
    for endpoint, spec in ((endpoint_a, side_a), (endpoint_b, side_b)):
        if isinstance(endpoint, DiskStore):
            endpoint.close()
        else:
            _save_card(endpoint, Path(spec))
    faults = outcome.faults
    _emit(
        ctx,
        outcome.to_json_obj(),
        f"transferred {outcome.transferred}; sizes {outcome.resulting_sizes}"
        + (f"; {len(faults)} faults" if faults else ""),
    )
    if faults:
        sys.exit(4)


def _sync_with_url(the_store, url: str, signer: KeyIdentity) -> dict:
    base = url.rstrip("/")
    pulled = pushed = 0
    cursor = 0
    while True:
        path_qs = f"/sync/pull?since_cursor={cursor}&limit=500"
        response = httpx.get(
            base + path_qs, headers=build_auth_headers(signer, "GET", path_qs, b""), timeout=10.0
        )
        response.raise_for_status()
        data = response.json()
        for obj in data["envelopes"]:
            if the_store.add(SignedEnvelope.from_json_obj(obj)) is AddResult.ADDED:
                pulled += 1
        the_store.confirm_central(data.get("central_confirmed", []))
        if data["next_cursor"] == cursor:
            break
        cursor = data["next_cursor"]
    body = json.dumps(
        {
            "from_replica_id": the_store.replica_id,
            "envelopes": [e.to_json_obj() for e in the_store.envelopes()],
            "central_confirmed": sorted(the_store.central_confirmed()),
        }
    ).encode("utf-8")
    response = httpx.post(
        base + "/sync",
        content=body,
        headers={
            "content-type": "application/json",
            **build_auth_headers(signer, "POST", "/sync", body),
        },
        timeout=30.0,
    )
    if response.status_code not in (200, 422):
        response.raise_for_status()
    outcome = response.json()
    pushed = outcome.get("accepted", 0)
    the_store.confirm_central(outcome.get("central_confirmed", []))
    return {"pulled": pulled, "pushed": pushed, "faults": outcome.get("faults", [])}


@main.command("report")
@click.option("--from", "window_from", required=True)
@click.option("--to", "window_to", required=True)
@click.option("--store", "stores", multiple=True, type=click.Path(path_type=Path))
@click.option("--reference", type=click.Choice(["catalog", "none"]), default="catalog",
              show_default=True, help="Source of the medium dose per exam type.")
@click.option("--means", "means_file", default=None, type=click.Path(path_type=Path),
              help="JSON file {exam_type: medium_msv} overriding --reference.")
@click.option("--tsv", is_flag=True, help="Emit the tabular file instead of JSON/human.")
@click.pass_context
def report_cmd(ctx, window_from, window_to, stores, reference, means_file, tsv) -> None:
    """Periodic report: exact sums next to count-times-medium estimates."""
    tables = DosimetryTables.load()
    reference_means = None
    if means_file:
        reference_means = {k: float(v) for k, v in json.loads(Path(means_file).read_text()).items()}
    elif reference == "catalog":
        reference_means = {
            exam: tables.catalog.entry(exam).effective_msv for exam in tables.catalog.exams()
        }
    records = [e.record() for e in _gather_envelopes(stores, ())]
    report = periodic_report(records, parse_utc(window_from), parse_utc(window_to), reference_means)
    if tsv:
        click.echo(report.to_tsv(), nl=False)
        return
    document = report.to_json_obj()
    human = [f"{r['exam_type']}: n={r['count']} sum={r['summed_msv']:.3f} "
             f"estimate={r['estimate_msv']:.3f} discrepancy={r['discrepancy_msv']:+.3f}"
             for r in document["rows"]]
    human.append(
        f"TOTAL: n={document['total_count']} sum={document['total_summed_msv']:.3f} "
        f"estimate={document['total_estimate_msv']:.3f} "
        f"discrepancy={document['total_discrepancy_msv']:+.3f}"
    )
    _emit(ctx, document, "\n".join(human))


@main.group()
def scenario() -> None:
    """Replay connectivity scenarios as executable narratives."""


@scenario.command("replay")
@click.option("--case", default=None, help="Bundled case name.")
@click.option("--file", "scenario_file", default=None, type=click.Path(path_type=Path))
@click.pass_context
def scenario_replay(ctx, case, scenario_file) -> None:
    if not case and not scenario_file:
        raise ConfigError("give --case or --file")
    transcript = replay(load_scenario(case=case, path=scenario_file))
    human = [f"scenario {transcript['name']}"]
    for step in transcript["steps"]:
        event = step["event"]
        line = f"step {step['step']}: {event['type']}"
        if event["type"] == "visit":
            line += (
                f" patient={event['patient']} sources={','.join(step['read_sources']) or '-'}"
                f" recorded={step['recorded'] or '-'}"
            )
        sizes = {name: len(ids) for name, ids in step["stores"].items()}
        line += f" stores={sizes}"
        human.append(line)
    _emit(ctx, transcript, "\n".join(human))


@main.command("verify")
@click.option("--store", "stores", multiple=True, type=click.Path(path_type=Path))
@click.option("--card", "cards", multiple=True, type=click.Path(path_type=Path))
@click.option("--trust-dir", required=True, type=click.Path(path_type=Path),
              help="CA directory with trust root, certs, and CRL.")
@click.pass_context
def verify_cmd(ctx, stores, cards, trust_dir) -> None:
    """Verify every stored envelope against the trust material."""
    authority = _load_ca(Path(trust_dir))
    crl = authority.crl(issued_at=_now())
    rejected = []
    total = 0
    for envelope in _gather_envelopes(stores, cards):
        total += 1
        result = verify_envelope(
            envelope,
            authority.cert,
            authority.resolver(),
            envelope.record().performed_at,
            crl,
        )
        if not result.accepted:
            rejected.append({"record_id": envelope.record_id(), "reason": result.reason.value})
    document = {"checked": total, "rejected": rejected}
    _emit(ctx, document, f"checked {total}, rejected {len(rejected)}")
    if rejected:
        sys.exit(3)


@main.command("serve")
@click.option("--config", "config_path", default=None, type=click.Path(path_type=Path))
@click.option("--ui-dir", default=None, type=click.Path(path_type=Path),
              help="Static dashboard build to serve under /ui.")
def serve_cmd(config_path, ui_dir) -> None:
    """Run the LOCAL/CENTRAL service (config file + RADLEDGER_* env vars)."""
    import uvicorn

    from .service.app import create_app

    config = ServiceConfig.load(config_path)
    app = create_app(config, static_dir=ui_dir)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")


if __name__ == "__main__":
    run()
