import dataclasses
import json

import numpy as np
import pytest

from qpass.primitives import ProtocolParams, states_equivalent
from qpass.protocol import (
    ClassicalChannel,
    ClassicalPassword,
    DecoySchedule,
    PolicyError,
    ProtocolAbort,
    ProtocolConfig,
    Prover,
    SessionTranscript,
    Tap,
    Verifier,
    check_site,
    enroll,
    pair_states,
    run_basic_session,
    run_extended_session,
    run_session,
)
from qpass.protocol.channel import EventLog
from qpass.qcore import RngStream

BASIC = ProtocolConfig(N=8, seed=3)
EXTENDED = ProtocolConfig(N=8, N_D=16, seed=3, mode="extended")


def _phases(tr):
    return [p["phase"] for p in tr.phases]


@pytest.mark.parametrize("cfg", [BASIC, EXTENDED], ids=["basic", "extended"])
def test_honest_rounds_accept_and_restore(cfg):
    card, store, pw = enroll(cfg, rng=RngStream(1, 0))
    before = pair_states(card).copy()
    prover, verifier = Prover(card, pw, cfg.params), Verifier(store, params=cfg.params)
    for r in range(5):
        tr = run_session(prover, verifier, cfg, round_id=r, rng=RngStream(1, 1).child(r))
        assert tr.accepted, tr.reason
        assert states_equivalent(pair_states(card), before, atol=1e-12).all()
    assert card.locked


def test_basic_phase_order():
    card, store, pw = enroll(BASIC, rng=RngStream(2, 0))
    tr = run_basic_session(card, store, pw, BASIC, rng=RngStream(2, 1))
    assert _phases(tr) == ["announce", "step3", "step4", "step5", "step6", "step7", "step8", "step9", "end"]
    seqs = [p["seq"] for p in tr.phases]
    assert seqs == sorted(seqs)


def test_extended_phase_order_and_disclosure():
    card, store, pw = enroll(EXTENDED, rng=RngStream(2, 0))
    tr = run_extended_session(card, store, pw, EXTENDED, rng=RngStream(2, 1))
    assert tr.accepted
    assert _phases(tr) == ["announce"] + [f"step{i}" for i in range(3, 15)] + ["end"]
    disc = [m for m in tr.messages if m["kind"] == "decoy-disclosure"]
    assert len(disc) == 1 and disc[0]["payload"]["N_D"] == 16
    assert len(tr.decoy_results) == 16 and tr.decoy_mismatches == 0


def test_pad_is_fresh_per_round():
    card, store, pw = enroll(EXTENDED, rng=RngStream(4, 0))
    prover, verifier = Prover(card, pw, EXTENDED.params), Verifier(store, params=EXTENDED.params)
    pads = []
    for r in range(4):
        run_session(prover, verifier, EXTENDED, round_id=r, rng=RngStream(4, 1).child(r))
        pads.append(prover.pad.bits)
    assert len(set(pads)) > 1


def test_non_increasing_round_id_aborts():
    card, store, pw = enroll(BASIC, rng=RngStream(5, 0))
    prover, verifier = Prover(card, pw, BASIC.params), Verifier(store, params=BASIC.params)
    assert run_session(prover, verifier, BASIC, round_id=3).accepted
    tr = run_session(prover, verifier, BASIC, round_id=3)
    assert tr.verdict == "aborted" and "round id" in tr.reason


def test_decoy_disclosure_before_delivery_aborts():
    ch = ClassicalChannel(EventLog())
    with pytest.raises(ProtocolAbort):
        ch.announce("decoy-disclosure", {})
    ch.quantum_delivered = True
    assert ch.announce("decoy-disclosure", {}).kind == "decoy-disclosure"


def test_sites_are_enforced():
    for site in ("prover-region", "verifier-quantum", "nowhere"):
        with pytest.raises(PolicyError):
            check_site(site)
        with pytest.raises(PolicyError):
            Tap(site)
    card, store, pw = enroll(BASIC, rng=RngStream(6, 0))
    prover, verifier = Prover(card, pw, BASIC.params), Verifier(store, params=BASIC.params)
    with pytest.raises(PolicyError):
        run_session(prover, verifier, BASIC, classical_taps=[Tap("quantum-channel")])
    with pytest.raises(PolicyError):
        run_session(prover, verifier, BASIC, discard_taps=[Tap("classical-channel")])
    with pytest.raises(PolicyError):
        run_session(prover, verifier, BASIC, record_taps=[Tap("verifier-discard")])


def test_transcript_json_roundtrip():
    card, store, pw = enroll(EXTENDED, rng=RngStream(7, 0))
    tr = run_extended_session(card, store, pw, EXTENDED, rng=RngStream(7, 1))
    back = SessionTranscript.from_dict(json.loads(tr.to_json()))
    assert back == tr
    with pytest.raises(ValueError):
        SessionTranscript.from_dict({**tr.to_dict(), "schema": "other/9"})


def test_store_length_mismatch_aborts():
    card, store, pw = enroll(BASIC, rng=RngStream(8, 0))
    tr = run_basic_session(card, store, pw, dataclasses.replace(BASIC, N=4))
    assert tr.verdict == "aborted" and "store" in tr.reason


def test_password_must_match_card():
    card, _, _ = enroll(BASIC, rng=RngStream(9, 0))
    with pytest.raises(ValueError):
        Prover(card, ClassicalPassword.from_string("0101"), BASIC.params)
    with pytest.raises(ValueError):
        enroll(BASIC, password="01")
    with pytest.raises(ValueError):
        ClassicalPassword.from_string("012")


def test_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig(mode="fast")
    with pytest.raises(ValueError):
        ProtocolConfig(mode="extended", N_D=0)
    with pytest.raises(ValueError):
        ProtocolConfig(N=0)
    with pytest.raises(ValueError):
        ProtocolConfig(decoy_error_budget=-1)


def test_decoy_schedule_validation():
    with pytest.raises(ValueError):
        DecoySchedule((2, 3), (1,))
    with pytest.raises(ValueError):
        DecoySchedule((7,), (0,))
    with pytest.raises(ValueError):
        DecoySchedule((2, 3), (4, 1))


def test_wrong_password_is_rejected():
    card, store, pw = enroll(ProtocolConfig(N=16), password="1" * 16, rng=RngStream(10, 0))
    tr = run_basic_session(card, store, "0" * 16, ProtocolConfig(N=16), rng=RngStream(10, 1))
    assert tr.verdict == "rejected-at-bell"


@pytest.mark.parametrize("cfg", [BASIC, EXTENDED], ids=["basic", "extended"])
def test_sessions_are_deterministic(cfg):
    out = []
    for _ in range(2):
        card, store, pw = enroll(cfg)
        tr = run_session(Prover(card, pw, cfg.params), Verifier(store, params=cfg.params), cfg)
        out.append((tr.to_json(), pair_states(card).tobytes()))
    assert out[0] == out[1]


def test_other_parameters_work():
    cfg = ProtocolConfig(N=6, N_D=4, mode="extended", params=ProtocolParams.from_xi(0.3, 0.8))
    card, store, pw = enroll(cfg, rng=RngStream(11, 0))
    assert run_extended_session(card, store, pw, cfg, rng=RngStream(11, 1)).accepted
