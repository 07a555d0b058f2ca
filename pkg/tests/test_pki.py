from dataclasses import replace
from datetime import timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radledger.errors import AuthorizationError, DomainError
from radledger.ledger.records import SignedEnvelope
from radledger.pki import (
    CardKind,
    Certificate,
    CertificateAuthority,
    RejectReason,
    Role,
    get_scheme,
    personalize_card,
    replace_card,
    verify_chain,
    verify_envelope,
)
from radledger.sync.replica import ReplicaKind, ReplicaStore
from tests.conftest import utc

NOW = utc(2025, 6, 1)


@pytest.fixture
def ca():
    return CertificateAuthority.create("test-root", scheme="hmac-demo", now=NOW, seed=b"ca")


class TestCa:
    def test_root_self_verifies(self, ca):
        result = verify_chain(ca.cert, ca.cert, ca.resolver(), NOW)
        assert result.accepted

    def test_one_hop_chain(self, ca):
        keys = get_scheme("hmac-demo").generate_keypair(b"leaf")
        leaf = ca.issue("leaf-holder", Role.PROFESSIONAL, keys.public_key, now=NOW)
        assert verify_chain(leaf, ca.cert, ca.resolver(), NOW).accepted

    def test_expired_intermediate_rejected(self, ca):
        # Oracle: the intermediate window [NOW, NOW+30d] excludes NOW+60d.
        mid_keys = get_scheme("hmac-demo").generate_keypair(b"mid")
        mid_ca_cert = ca.issue("mid-ca", Role.CA, mid_keys.public_key, validity_days=30, now=NOW)
        mid = CertificateAuthority(mid_ca_cert, mid_keys.private_key)
        leaf_keys = get_scheme("hmac-demo").generate_keypair(b"leaf2")
        leaf = mid.issue("leaf", Role.PROFESSIONAL, leaf_keys.public_key, validity_days=365, now=NOW)
        resolver = {**ca.resolver(), **mid.resolver()}
        later = NOW + timedelta(days=60)
        assert mid_ca_cert.not_after < later
        result = verify_chain(leaf, ca.cert, resolver, later)
        assert not result.accepted
        assert result.reason is RejectReason.EXPIRED

    def test_unknown_issuer_rejected(self, ca):
        other = CertificateAuthority.create("other-root", scheme="hmac-demo", now=NOW, seed=b"x")
        keys = get_scheme("hmac-demo").generate_keypair(b"leaf3")
        leaf = other.issue("leaf", Role.PROFESSIONAL, keys.public_key, now=NOW)
        result = verify_chain(leaf, ca.cert, ca.resolver(), NOW)
        assert result.reason is RejectReason.UNKNOWN_ISSUER

    def test_untrusted_root_rejected(self, ca):
        other = CertificateAuthority.create("other-root", scheme="hmac-demo", now=NOW, seed=b"y")
        keys = get_scheme("hmac-demo").generate_keypair(b"leaf4")
        leaf = other.issue("leaf", Role.PROFESSIONAL, keys.public_key, now=NOW)
        resolver = {**other.resolver()}
        result = verify_chain(leaf, ca.cert, resolver, NOW)
        assert result.reason is RejectReason.UNTRUSTED_ROOT

    def test_cycle_rejected(self, ca):
        # Hand-assemble a two-cert issuer cycle.
        scheme = get_scheme("hmac-demo")
        ka, kb = scheme.generate_keypair(b"a"), scheme.generate_keypair(b"b")
        end = NOW + timedelta(days=365)
        a_id = Certificate.derive_id("hmac-demo", ka.public_key, "a", Role.CA, NOW, end)
        b_id = Certificate.derive_id("hmac-demo", kb.public_key, "b", Role.CA, NOW, end)
        a = Certificate(a_id, "a", Role.CA, "hmac-demo", ka.public_key, b_id, NOW, end, b"")
        b = Certificate(b_id, "b", Role.CA, "hmac-demo", kb.public_key, a_id, NOW, end, b"")
        a = replace(a, signature=scheme.sign(kb.private_key, a.unsigned_body()))
        b = replace(b, signature=scheme.sign(ka.private_key, b.unsigned_body()))
        resolver = {a.cert_id: a, b.cert_id: b}
        result = verify_chain(a, ca.cert, resolver, NOW)
        assert result.reason is RejectReason.CHAIN_CYCLE

    def test_revoked_cert_rejected_after_revocation_only(self, ca):
        keys = get_scheme("hmac-demo").generate_keypair(b"leaf5")
        leaf = ca.issue("leaf", Role.PROFESSIONAL, keys.public_key, now=NOW)
        revoked_at = NOW + timedelta(days=10)
        ca.revoke(leaf.cert_id, at=revoked_at)
        crl = ca.crl(issued_at=revoked_at)
        assert crl.verify(ca.cert)
        before = verify_chain(leaf, ca.cert, ca.resolver(), NOW + timedelta(days=5), crl)
        assert before.accepted
        after = verify_chain(leaf, ca.cert, ca.resolver(), NOW + timedelta(days=15), crl)
        assert after.reason is RejectReason.REVOKED

    def test_certificate_text_round_trip(self, ca):
        again = Certificate.from_text(ca.cert.to_text())
        assert again == ca.cert


class TestCards:
    def test_personalize_citizen_role(self, ca):
        card = personalize_card(CardKind.CITIZEN, "p1", ca, pin="1234", now=NOW)
        assert card.certificate.role is Role.CITIZEN
        assert card.kind.code == "CRSC"
        assert card.store.size() == 0

    def test_personalize_professional_role(self, ca):
        card = personalize_card(CardKind.PROFESSIONAL, "dr-a", ca, pin="1234", now=NOW)
        assert card.certificate.role is Role.PROFESSIONAL
        assert card.kind.code == "PRSC"

    def test_distinct_keypairs_and_ids(self, ca):
        c1 = personalize_card(CardKind.CITIZEN, "p1", ca, pin="1", now=NOW, seed=b"s1")
        c2 = personalize_card(CardKind.CITIZEN, "p2", ca, pin="2", now=NOW, seed=b"s2")
        assert c1.certificate.cert_id != c2.certificate.cert_id
        assert c1.certificate.public_key != c2.certificate.public_key

    def test_sign_round_trip_and_tamper(self, ca):
        card = personalize_card(CardKind.PROFESSIONAL, "dr-a", ca, pin="1234", now=NOW)
        card.unlock("1234")
        payload = b"dose record bytes"
        sig = card.sign(payload, now=NOW)
        scheme = get_scheme(card.certificate.scheme)
        assert scheme.verify(card.certificate.public_key, payload, sig)
        flipped = bytes([payload[0] ^ 0x01]) + payload[1:]
        assert not scheme.verify(card.certificate.public_key, flipped, sig)

    def test_locked_card_cannot_sign(self, ca):
        card = personalize_card(CardKind.PROFESSIONAL, "dr-a", ca, pin="1234", now=NOW)
        with pytest.raises(AuthorizationError):
            card.sign(b"x", now=NOW)

    def test_three_strikes_lock(self, ca):
        card = personalize_card(CardKind.CITIZEN, "p1", ca, pin="1234", now=NOW)
        for _ in range(3):
            assert card.unlock("0000") is False
        assert card.pin_state.locked
        with pytest.raises(AuthorizationError):
            card.unlock("1234")

    def test_expired_cert_cannot_sign(self, ca):
        card = personalize_card(
            CardKind.PROFESSIONAL, "dr-a", ca, pin="1234", validity_days=10, now=NOW
        )
        card.unlock("1234")
        with pytest.raises(AuthorizationError):
            card.sign(b"x", now=NOW + timedelta(days=30))

    def test_private_key_not_in_select(self, ca):
        card = personalize_card(CardKind.CITIZEN, "p1", ca, pin="1234", now=NOW)
        info = card.select()
        assert "private" not in str(info).lower()

    def test_card_file_round_trip(self, ca):
        from radledger.pki.cards import EmulatedCard

        card = personalize_card(CardKind.CITIZEN, "p1", ca, pin="1234", now=NOW)
        again = EmulatedCard.from_text(card.to_text())
        assert again.certificate == card.certificate
        assert again.unlock("1234")


def _envelope_signed_by(card, payload: bytes) -> SignedEnvelope:
    card.unlock("1234")
    return SignedEnvelope(
        payload=payload, signature=card.sign(payload, now=NOW), signer_cert_id=card.certificate.cert_id
    )


class TestVerifyEnvelope:
    def test_valid_accepts(self, ca):
        card = personalize_card(CardKind.PROFESSIONAL, "dr-a", ca, pin="1234", now=NOW)
        env = _envelope_signed_by(card, b'{"record_id":"r1"}')
        result = verify_envelope(env, ca.cert, ca.resolver(), NOW)
        assert result.accepted and result.reason is RejectReason.OK

    def test_truncated_payload_rejected(self, ca):
        card = personalize_card(CardKind.PROFESSIONAL, "dr-a", ca, pin="1234", now=NOW)
        env = _envelope_signed_by(card, b'{"record_id":"r1"}')
        broken = SignedEnvelope(env.payload[:-1], env.signature, env.signer_cert_id)
        result = verify_envelope(broken, ca.cert, ca.resolver(), NOW)
        assert result.reason is RejectReason.BAD_SIGNATURE

    def test_unknown_signer_rejected(self, ca):
        env = SignedEnvelope(b"x", b"y", "nope")
        assert verify_envelope(env, ca.cert, ca.resolver(), NOW).reason is RejectReason.UNKNOWN_SIGNER

    def test_revoked_signer_after_revocation(self, ca):
        # Oracle: membership + date comparison on the revocation list.
        card = personalize_card(CardKind.PROFESSIONAL, "dr-a", ca, pin="1234", now=NOW)
        env = _envelope_signed_by(card, b'{"record_id":"r1"}')
        revoked_at = NOW + timedelta(days=1)
        ca.revoke(card.certificate.cert_id, at=revoked_at)
        crl = ca.crl()
        assert crl.revoked_at(card.certificate.cert_id) == revoked_at
        result = verify_envelope(env, ca.cert, ca.resolver(), NOW + timedelta(days=2), crl)
        assert result.reason is RejectReason.REVOKED
        earlier = verify_envelope(env, ca.cert, ca.resolver(), NOW, crl)
        assert earlier.accepted

    @given(payload=st.binary(min_size=1, max_size=200), data=st.data())
    @settings(max_examples=60, deadline=None)
    def test_single_bit_mutation_always_rejected(self, payload, data):
        ca = CertificateAuthority.create("r", scheme="hmac-demo", now=NOW, seed=b"ca")
        card = personalize_card(CardKind.PROFESSIONAL, "dr", ca, pin="1234", now=NOW, seed=b"k")
        env = _envelope_signed_by(card, payload)
        assert verify_envelope(env, ca.cert, ca.resolver(), NOW).accepted
        mutate_payload = data.draw(st.booleans())
        target = env.payload if mutate_payload else env.signature
        bit = data.draw(st.integers(min_value=0, max_value=len(target) * 8 - 1))
        mutated = bytearray(target)
        mutated[bit // 8] ^= 1 << (bit % 8)
        broken = SignedEnvelope(
            payload=bytes(mutated) if mutate_payload else env.payload,
            signature=env.signature if mutate_payload else bytes(mutated),
            signer_cert_id=env.signer_cert_id,
        )
        assert not verify_envelope(broken, ca.cert, ca.resolver(), NOW).accepted


class TestReplaceCard:
    def _central_with_records(self, ca, holder, n):
        from radledger.dosimetry import DosimetryTables
        from radledger.ledger.records import CatalogReference, create_record

        tables = DosimetryTables.load()
        central = ReplicaStore(ReplicaKind.CENTRAL, "central")
        operator = personalize_card(CardKind.PROFESSIONAL, "dr-a", ca, pin="1234", now=NOW)
        operator.unlock("1234")
        for i in range(n):
            env = create_record(
                patient_id=holder,
                exam_type="head",
                raw_input=CatalogReference("head"),
                signer=operator,
                tables=tables,
                facility_id="hosp-1",
                operator_id="dr-a",
                performed_at=NOW + timedelta(days=i),
            )
            central.add(env)
        return central

    def test_replacement_restores_central_history(self, ca):
        central = self._central_with_records(ca, "p1", 5)
        old = personalize_card(CardKind.CITIZEN, "p1", ca, pin="1234", now=NOW)
        new = replace_card("p1", central, ca, pin="5678", now=NOW + timedelta(days=30))
        assert new.store.record_ids() == central.record_ids()
        assert new.certificate.cert_id != old.certificate.cert_id

    def test_replacement_capacity_most_recent_first(self, ca):
        central = self._central_with_records(ca, "p1", 5)
        new = replace_card("p1", central, ca, pin="5678", capacity=3, now=NOW + timedelta(days=30))
        kept = sorted(e.record().performed_at for e in new.store.envelopes())
        all_times = sorted(e.record().performed_at for e in central.envelopes())
        assert kept == all_times[-3:]
        assert new.store.record_ids() <= central.record_ids()

    def test_empty_history_known_holder(self, ca):
        personalize_card(CardKind.CITIZEN, "p2", ca, pin="1234", now=NOW)
        central = ReplicaStore(ReplicaKind.CENTRAL, "central")
        new = replace_card("p2", central, ca, pin="5678", now=NOW + timedelta(days=1))
        assert new.store.size() == 0

    def test_unknown_holder_rejected(self, ca):
        central = ReplicaStore(ReplicaKind.CENTRAL, "central")
        with pytest.raises(DomainError):
            replace_card("ghost", central, ca, pin="5678", now=NOW)

    def test_old_card_future_signatures_rejected(self, ca):
        central = self._central_with_records(ca, "p1", 2)
        old = personalize_card(CardKind.CITIZEN, "p1", ca, pin="1234", now=NOW)
        replaced_at = NOW + timedelta(days=30)
        replace_card("p1", central, ca, pin="5678", now=replaced_at)
        crl = ca.crl()
        old.unlock("1234")
        later = replaced_at + timedelta(days=1)
        payload = b"post-loss signature"
        env = SignedEnvelope(payload, old.sign(payload, now=later), old.certificate.cert_id)
        result = verify_envelope(env, ca.cert, ca.resolver(), later, crl)
        assert result.reason is RejectReason.REVOKED
