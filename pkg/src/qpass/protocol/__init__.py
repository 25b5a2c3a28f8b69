"""Prover/verifier state machines, channels and full protocol runs."""

from qpass.protocol.channel import (
    ALLOWED_SITES,
    FORBIDDEN_SITES,
    ClassicalChannel,
    DiscardedQubits,
    Message,
    PolicyError,
    ProtocolAbort,
    QuantumChannel,
    Tap,
    Transfer,
    check_site,
)
from qpass.protocol.parties import (
    ClassicalPassword,
    DecoySchedule,
    OneTimePad,
    ProtocolConfig,
    Prover,
    SmartCard,
    Verifier,
    VerifierStore,
    enroll,
)
from qpass.protocol.session import (
    TRANSCRIPT_SCHEMA,
    VERDICTS,
    SessionTranscript,
    pair_states,
    run_basic_session,
    run_extended_session,
    run_session,
)

__all__ = [
    "ALLOWED_SITES",
    "FORBIDDEN_SITES",
    "ClassicalChannel",
    "ClassicalPassword",
    "DecoySchedule",
    "DiscardedQubits",
    "Message",
    "OneTimePad",
    "PolicyError",
    "ProtocolAbort",
    "ProtocolConfig",
    "Prover",
    "QuantumChannel",
    "SessionTranscript",
    "SmartCard",
    "TRANSCRIPT_SCHEMA",
    "Tap",
    "Transfer",
    "VERDICTS",
    "Verifier",
    "VerifierStore",
    "check_site",
    "enroll",
    "pair_states",
    "run_basic_session",
    "run_extended_session",
    "run_session",
]
