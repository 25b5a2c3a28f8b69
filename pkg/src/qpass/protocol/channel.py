"""Simulated classical and quantum channels with adversary taps.

The security environment is enforced here: adversaries may sit on the
public channels, stand in for the prover, read the verifier's classical
records, or read qubits the verifier destroys. They may never enter the
prover's region or move quantum media in or out of the verifier's.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from qpass.qcore import QubitRegister, RngStream

ALLOWED_SITES = frozenset(
    {
        "quantum-channel",
        "classical-channel",
        "prover-substitute",
        "verifier-classical",
        "verifier-discard",
    }
)
FORBIDDEN_SITES = {
    "prover-region": "the prover's region is secure",
    "verifier-quantum": "no quantum media may enter or leave the verifier's region",
}


class PolicyError(PermissionError):
    """An adversary asked for access the security environment forbids."""


class ProtocolAbort(Exception):
    """Session cannot continue; becomes an ``aborted`` verdict."""


def check_site(site: str) -> str:
    if site in FORBIDDEN_SITES:
        raise PolicyError(f"access site {site!r} forbidden: {FORBIDDEN_SITES[site]}")
    if site not in ALLOWED_SITES:
        raise PolicyError(f"unknown access site {site!r}")
    return site


class Tap:
    """Base for every adversary attachment; validates its site on creation."""

    site: str = "quantum-channel"

    def __init__(self, site: str | None = None):
        if site is not None:
            self.site = site
        check_site(self.site)


# --------------------------------------------------------------------------
# Classical
# --------------------------------------------------------------------------


@dataclass
class Message:
    seq: int
    phase: str
    kind: str
    payload: Any

    def to_dict(self) -> dict:
        return {"seq": self.seq, "phase": self.phase, "kind": self.kind, "payload": self.payload}


class EventLog:
    """Shared sequence counter for phase markers and messages."""

    def __init__(self):
        self._counter = itertools.count()
        self.phases: list[dict] = []
        self.messages: list[Message] = []
        self.phase = "init"

    def next_seq(self) -> int:
        return next(self._counter)

    def mark(self, phase: str) -> None:
        self.phase = phase
        self.phases.append({"seq": self.next_seq(), "phase": phase})


class ClassicalChannel:
    """Public broadcast channel: delivered unmodified, readable by any tap."""

    def __init__(self, log: EventLog, taps=()):
        self.log = log
        self.taps = []
        self.quantum_delivered = False
        for tap in taps:
            self.register(tap)

    def register(self, tap) -> None:
        if tap.site not in ("classical-channel",):
            raise PolicyError(f"tap at {tap.site!r} cannot listen on the classical channel")
        self.taps.append(tap)

    def announce(self, kind: str, payload: Any) -> Message:
        if kind == "decoy-disclosure" and not self.quantum_delivered:
            # the positions are only safe to reveal once the qubits have arrived
            raise ProtocolAbort("decoy positions announced before quantum delivery completed")
        msg = Message(self.log.next_seq(), self.log.phase, kind, payload)
        self.log.messages.append(msg)
        for tap in self.taps:
            tap.observe(msg)
        return msg


# --------------------------------------------------------------------------
# Quantum
# --------------------------------------------------------------------------


class Transfer:
    """Qubits in flight from prover to verifier.

    ``card`` qubits are row ``i`` of the session register. The ``stream``
    carries password qubits, and in extended mode decoys interleaved at
    positions the adversary does not know. Taps only get opaque slot-level
    operations.
    """

    def __init__(
        self,
        register: QubitRegister,
        card_label: str,
        password_label: str,
        decoys: QubitRegister | None = None,
        decoy_label: str | None = None,
        slot_kind: np.ndarray | None = None,
        slot_index: np.ndarray | None = None,
    ):
        n = register.rows
        self.register = register
        self.decoys = decoys
        self.card_label: str | None = card_label
        self.password_label: str | None = password_label
        self.decoy_label: str | None = decoy_label
        if slot_kind is None:
            slot_kind = np.zeros(n, dtype=np.int8)
            slot_index = np.arange(n)
        self._kind = np.asarray(slot_kind, dtype=np.int8)
        self._index = np.asarray(slot_index, dtype=np.int64)
        self._fresh = itertools.count(1)
        self.log: list[str] = []

    # public, adversary-visible facts
    @property
    def card_length(self) -> int:
        return self.register.rows

    @property
    def stream_length(self) -> int:
        return int(self._kind.size)

    @property
    def aligned(self) -> bool:
        """True when stream slot ``i`` is known to pair with card qubit ``i``."""
        return self.decoys is None

    @property
    def delivered(self) -> bool:
        ok = self.card_label is not None and self.password_label is not None
        if self.decoys is not None:
            ok = ok and self.decoy_label is not None
        return ok

    # --- operations available to taps and to the verifier ---

    def measure_stream(self, slots, bases: np.ndarray, rng: RngStream) -> np.ndarray:
        """Measure stream ``slots``; ``bases[k]`` holds the kets for slot k."""
        slots = np.asarray(slots, dtype=np.int64)
        bases = np.asarray(bases, dtype=np.complex128)
        if bases.ndim == 2:
            bases = np.broadcast_to(bases, (slots.size, 2, 2))
        out = np.full(slots.size, -1, dtype=np.int64)
        for kind, reg, label in ((0, self.register, self.password_label), (1, self.decoys, self.decoy_label)):
            pick = np.nonzero(self._kind[slots] == kind)[0]
            if pick.size == 0:
                continue
            if label is None:
                raise ProtocolAbort("measured a slot that was never delivered")
            rows = self._index[slots[pick]]
            full = np.tile(np.eye(2, dtype=np.complex128), (reg.rows, 1, 1))
            full[rows] = bases[pick]
            res = reg.measure(full, [label], rng, rows=rows)
            out[pick] = res[rows]
        return out

    def measure_card(self, rows, bases: np.ndarray, rng: RngStream) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        bases = np.asarray(bases, dtype=np.complex128)
        if bases.ndim == 2:
            bases = np.broadcast_to(bases, (rows.size, 2, 2))
        full = np.tile(np.eye(2, dtype=np.complex128), (self.register.rows, 1, 1))
        full[rows] = bases
        return self.register.measure(full, [self.card_label], rng, rows=rows)[rows]

    def _take(self, reg: QubitRegister | None, label: str | None) -> None:
        if reg is not None and label is not None:
            reg.relabel(label, f"E:{label}")

    def absorb(self) -> None:
        """Adversary keeps every in-flight qubit; nothing reaches the verifier yet."""
        self._take(self.register, self.card_label)
        self._take(self.register, self.password_label)
        self._take(self.decoys, self.decoy_label)
        self.card_label = self.password_label = self.decoy_label = None
        self.log.append("absorbed")

    def _label(self, stem: str) -> str:
        return f"{stem}'{next(self._fresh)}"

    def forward_pairs(self, psi: np.ndarray) -> None:
        """Forward joint (password, card) states; requires an aligned stream."""
        if not self.aligned:
            raise ValueError("pairs can only be forwarded when slots align with card qubits")
        k, a = self._label("K"), self._label("A")
        self.register.append_joint([k, a], psi)
        self.password_label, self.card_label = k, a
        self.log.append("forwarded-pairs")

    def forward_card(self, states: np.ndarray) -> None:
        a = self._label("A")
        self.register.append(a, states)
        self.card_label = a
        self.log.append("forwarded-card")

    def forward_stream(self, states: np.ndarray) -> None:
        """Forward one single-qubit state per stream slot."""
        states = np.asarray(states, dtype=np.complex128).reshape(self.stream_length, 2)
        pw = self._kind == 0
        kets = np.empty((self.register.rows, 2), dtype=np.complex128)
        kets[self._index[pw]] = states[pw]
        k = self._label("K")
        self.register.append(k, kets)
        self.password_label = k
        if self.decoys is not None:
            dk = np.empty((self.decoys.rows, 2), dtype=np.complex128)
            dk[self._index[~pw]] = states[~pw]
            dl = self._label("D")
            self.decoys.append(dl, dk)
            self.decoy_label = dl
        self.log.append("forwarded-stream")

    # --- verifier-side bookkeeping ---

    def password_slots(self, decoy_positions) -> np.ndarray:
        """Slots left after removing announced decoys, checked against the layout."""
        mask = np.ones(self.stream_length, dtype=bool)
        mask[np.asarray(decoy_positions, dtype=np.int64)] = False
        slots = np.nonzero(mask)[0]
        if not (np.all(self._kind[slots] == 0) and np.array_equal(self._index[slots], np.arange(slots.size))):
            raise ProtocolAbort("announced decoy positions do not match the received stream")
        return slots


class QuantumChannel:
    """Delivers a :class:`Transfer`, passing it through quantum-channel taps."""

    def __init__(self, taps=()):
        self.taps = []
        for tap in taps:
            self.register(tap)

    def register(self, tap) -> None:
        if tap.site != "quantum-channel":
            raise PolicyError(f"tap at {tap.site!r} cannot act on the quantum channel")
        self.taps.append(tap)

    def send(self, transfer: Transfer, rng: RngStream) -> Transfer:
        for i, tap in enumerate(self.taps):
            tap.intercept(transfer, rng.child(i))
        return transfer


@dataclass
class DiscardedQubits:
    """Read-only view of password qubits the verifier is about to destroy."""

    register: QubitRegister
    label: str
    round_id: int
    outcomes: list = field(default_factory=list)

    def measure(self, basis: np.ndarray, rng: RngStream) -> np.ndarray:
        out = self.register.measure(basis, [self.label], rng)
        self.outcomes.append(out)
        return out


Observer = Callable[[str, Any], None]
