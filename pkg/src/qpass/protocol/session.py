"""Full protocol executions and their transcripts."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from qpass.primitives import LockUnitary
from qpass.protocol.channel import (
    ClassicalChannel,
    EventLog,
    PolicyError,
    ProtocolAbort,
    QuantumChannel,
)
from qpass.protocol.parties import (
    ClassicalPassword,
    ProtocolConfig,
    Prover,
    SmartCard,
    Verifier,
    VerifierStore,
)
from qpass.qcore import RngStream

TRANSCRIPT_SCHEMA = "qpass.transcript/1"
VERDICTS = ("accepted", "rejected-at-decoy", "rejected-at-bell", "aborted")

_STEPS = {
    "basic": {"unlock": "step5", "verify": "step6", "relock": "step7", "discard": "step8", "return": "step9"},
    "extended": {"unlock": "step9", "verify": "step10", "relock": "step11", "discard": "step12", "return": "step13"},
}


@dataclass
class SessionTranscript:
    round_id: int
    mode: str
    verdict: str = "aborted"
    reason: str | None = None
    phases: list = field(default_factory=list)
    messages: list = field(default_factory=list)
    bell_outcomes: list = field(default_factory=list)
    decoy_results: list = field(default_factory=list)
    channel_events: list = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.verdict == "accepted"

    @property
    def decoy_mismatches(self) -> int:
        return sum(1 for r in self.decoy_results if not r["consistent"])

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["schema"] = TRANSCRIPT_SCHEMA
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "SessionTranscript":
        d = dict(d)
        schema = d.pop("schema", TRANSCRIPT_SCHEMA)
        if schema != TRANSCRIPT_SCHEMA:
            raise ValueError(f"unsupported transcript schema {schema!r}")
        return cls(**d)


class Session:
    """Mutable per-run context handed to the parties."""

    def __init__(self, config: ProtocolConfig, round_id: int, rng: RngStream, observer=None):
        self.config = config
        self.mode = config.mode
        self.round_id = round_id
        self.log = EventLog()
        self.prover_rng = rng.child(0)
        self.verifier_rng = rng.child(1)
        self.tap_rng = rng.child(2)
        self.observer = observer
        self.prover = None
        self.verifier = None
        self.transfer = None

    def mark(self, phase: str) -> None:
        self.log.mark(phase)
        if self.observer is not None:
            self.observer(phase, self)


def run_session(
    prover,
    verifier: Verifier,
    config: ProtocolConfig,
    *,
    round_id: int = 0,
    rng: RngStream | None = None,
    taps=(),
    classical_taps=(),
    discard_taps=(),
    record_taps=(),
    observer=None,
) -> SessionTranscript:
    """Run one authentication round; never raises for protocol-level failures."""
    rng = rng or RngStream(config.seed, round_id)
    session = Session(config, round_id, rng, observer)
    session.prover, session.verifier = prover, verifier
    transcript = SessionTranscript(round_id=round_id, mode=config.mode)
    classical = ClassicalChannel(session.log, classical_taps)
    steps = _STEPS[config.mode]
    for tap in discard_taps:
        if tap.site != "verifier-discard":
            raise PolicyError(f"tap at {tap.site!r} cannot read discarded qubits")
    for tap in record_taps:
        if tap.site != "verifier-classical":
            raise PolicyError(f"tap at {tap.site!r} cannot read verifier records")

    try:
        quantum = QuantumChannel(taps)
        if len(verifier.store) != config.N:
            raise ProtocolAbort(f"store holds {len(verifier.store)} qubits, config.N = {config.N}")
        session.mark("announce")
        classical.announce("start", {"round_id": round_id, "mode": config.mode, "N": config.N})
        transfer = prover.start(session)
        session.transfer = transfer
        quantum.send(transfer, session.tap_rng)
        classical.quantum_delivered = True
        transcript.channel_events = list(transfer.log)
        if not transfer.delivered:
            raise ProtocolAbort("timeout: verifier received no qubits")
        if transfer.card_length != config.N:
            raise ProtocolAbort("returned card length does not match N")
        reg = transfer.register
        k, a = transfer.password_label, transfer.card_label

        if config.mode == "extended":
            session.mark("step8")
            disclosure = prover.disclosure()
            classical.announce("decoy-disclosure", disclosure)
            got, expected = verifier.check_decoys(transfer, disclosure, session.verifier_rng)
            for pos, sym, g, e in zip(disclosure["positions"], disclosure["symbols"], got, expected):
                transcript.decoy_results.append(
                    {"position": int(pos), "symbol": int(sym), "outcome": int(g), "consistent": bool(g == e)}
                )
            if transcript.decoy_mismatches > config.decoy_error_budget:
                transcript.verdict = "rejected-at-decoy"
                transcript.reason = f"{transcript.decoy_mismatches} decoy mismatch(es)"
                return _finish(transcript, session)
        elif transfer.stream_length != config.N:
            raise ProtocolAbort("password stream length does not match N")

        session.mark(steps["unlock"])
        outcomes = verifier.unlock_and_verify(reg, k, a, session.verifier_rng)
        session.mark(steps["verify"])
        transcript.bell_outcomes = outcomes
        for tap in record_taps:
            tap.read_records(round_id, list(outcomes))
        if any(o != "+" for o in outcomes):
            transcript.verdict = "rejected-at-bell"
            transcript.reason = f"{sum(o != '+' for o in outcomes)} non-'+' Bell outcome(s)"
            return _finish(transcript, session)
        session.mark(steps["relock"])
        verifier.relock(reg, k, a)
        session.mark(steps["discard"])
        verifier.discard(reg, k, session.verifier_rng, round_id, discard_taps)
        session.mark(steps["return"])
        prover.restore(session, verifier.hand_back(a))
        transcript.verdict = "accepted"
    except ProtocolAbort as exc:
        transcript.verdict = "aborted"
        transcript.reason = str(exc)
    return _finish(transcript, session)


def _finish(transcript: SessionTranscript, session: Session) -> SessionTranscript:
    session.mark("end")
    transcript.phases = list(session.log.phases)
    transcript.messages = [m.to_dict() for m in session.log.messages]
    return transcript


def _parties(card, store, password, config, lock):
    if isinstance(password, str):
        password = ClassicalPassword.from_string(password)
    prover = Prover(card, password, config.params)
    verifier = Verifier(store, lock=lock, params=config.params)
    return prover, verifier


def run_basic_session(
    card: SmartCard,
    store: VerifierStore,
    password: ClassicalPassword,
    config: ProtocolConfig,
    *,
    lock: LockUnitary | None = None,
    **kw,
) -> SessionTranscript:
    """Honest prover, nine-step protocol."""
    config = dataclasses.replace(config, mode="basic")
    prover, verifier = _parties(card, store, password, config, lock)
    return run_session(prover, verifier, config, **kw)


def run_extended_session(
    card: SmartCard,
    store: VerifierStore,
    password: ClassicalPassword,
    config: ProtocolConfig,
    *,
    lock: LockUnitary | None = None,
    **kw,
) -> SessionTranscript:
    """Honest prover, fourteen-step protocol with one-time pad and decoys."""
    if config.mode != "extended":
        config = dataclasses.replace(config, mode="extended")
    prover, verifier = _parties(card, store, password, config, lock)
    return run_session(prover, verifier, config, **kw)


def pair_states(card: SmartCard) -> np.ndarray:
    """Joint (card, store) pure states per block, shape (N, 4).

    Only valid when the register holds exactly the two halves.
    """
    reg = card.register
    if len(reg.labels) != 2:
        raise ValueError(f"register holds extra qubits {reg.labels!r}")
    order = [card.label] + [lab for lab in reg.labels if lab != card.label]
    t = reg.copy()
    t.reorder(order)
    return t.data
