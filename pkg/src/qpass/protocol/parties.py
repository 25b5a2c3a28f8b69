"""Parties, their secrets and their local operations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from qpass.primitives import (
    BELL_LABELS,
    BELL_VECTORS,
    DECOY_SYMBOLS,
    LockUnitary,
    ProtocolParams,
    build_lock_unitary,
    decoy_arrays,
    make_R,
    password_kets,
)
from qpass.protocol.channel import DiscardedQubits, ProtocolAbort, Transfer
from qpass.qcore import QubitRegister, RngStream

MODES = ("basic", "extended")
ENROLL_STREAM = 1 << 40


@dataclass(frozen=True)
class ProtocolConfig:
    N: int = 8
    N_D: int = 0
    params: ProtocolParams = field(default_factory=ProtocolParams)
    seed: int = 0
    mode: str = "basic"
    decoy_error_budget: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.N_D < 0:
            raise ValueError("N_D must be >= 0")
        if self.mode == "extended" and self.N_D < 1:
            raise ValueError("extended mode needs N_D >= 1")
        if self.decoy_error_budget < 0:
            raise ValueError("decoy_error_budget must be >= 0")

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "N_D": self.N_D,
            "params": self.params.to_dict(),
            "seed": self.seed,
            "mode": self.mode,
            "decoy_error_budget": self.decoy_error_budget,
        }


@dataclass(frozen=True)
class ClassicalPassword:
    bits: tuple

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if not bits or any(b not in (0, 1) for b in bits):
            raise ValueError("password must be a non-empty 0/1 sequence")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_string(cls, s: str) -> "ClassicalPassword":
        return cls(tuple(int(c) for c in s))

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.int8)

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


@dataclass(frozen=True)
class OneTimePad:
    bits: tuple
    round_id: int

    @property
    def array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.int8)


@dataclass(frozen=True)
class DecoySchedule:
    symbols: tuple
    positions: tuple

    def __post_init__(self):
        if len(self.symbols) != len(self.positions):
            raise ValueError("one position per decoy symbol")
        if any(s not in DECOY_SYMBOLS for s in self.symbols):
            raise ValueError(f"decoy symbols must come from {DECOY_SYMBOLS}")
        pos = list(self.positions)
        if pos != sorted(set(pos)):
            raise ValueError("decoy positions must be strictly increasing")

    def to_dict(self) -> dict:
        return {"N_D": len(self.symbols), "positions": list(self.positions), "symbols": list(self.symbols)}


class _Half:
    """One half of the shared Bell pairs, addressed by register label."""

    def __init__(self, register: QubitRegister, label: str):
        self.register = register
        self.label = label

    def __len__(self) -> int:
        return self.register.rows

    def reduced_states(self) -> np.ndarray:
        """Per-qubit reduced density matrices, shape (N, 2, 2)."""
        return self.register.reduced([self.label])


class SmartCard(_Half):
    """The prover's halves ``Q_A``; carries no information about ``K``."""

    def __init__(self, register: QubitRegister, label: str = "A"):
        super().__init__(register, label)
        self.locked = True


class VerifierStore(_Half):
    """The verifier's halves ``Q_B``."""

    def __init__(self, register: QubitRegister, label: str = "B"):
        super().__init__(register, label)


def enroll(
    config: ProtocolConfig,
    password: ClassicalPassword | str | None = None,
    rng: RngStream | None = None,
):
    """Steps (1)-(2): share ``N`` copies of ``|+>`` and lock the card with ``K``."""
    rng = rng or RngStream(config.seed, ENROLL_STREAM)
    if password is None:
        password = ClassicalPassword(tuple(rng.bits(config.N)))
    elif isinstance(password, str):
        password = ClassicalPassword.from_string(password)
    if len(password) != config.N:
        raise ValueError(f"password has {len(password)} bits, config.N = {config.N}")
    reg = QubitRegister.joint(["A", "B"], BELL_VECTORS[0], rows=config.N)
    card, store = SmartCard(reg, "A"), VerifierStore(reg, "B")
    mask = password.array.astype(bool)
    reg.apply(make_R(config.params), [card.label], rows=mask)
    card.locked = True
    return card, store, password


# --------------------------------------------------------------------------
# Prover
# --------------------------------------------------------------------------


def draw_decoys(n: int, n_d: int, rng: RngStream):
    """Decoy symbols from {2,3,4,5} and their slots among ``n + n_d``."""
    symbols = rng.integers(2, 6, size=n_d)
    positions = np.sort(rng.choice(n + n_d, size=n_d, replace=False))
    return symbols, positions


def interleave(reg: QubitRegister, card_label: str, password_label: str, symbols, positions):
    """Build the decoy register and the interleaved stream layout."""
    n, n_d = reg.rows, len(symbols)
    kets, _, _ = decoy_arrays(symbols)
    decoys = QubitRegister.product("D", kets)
    kind = np.zeros(n + n_d, dtype=np.int8)
    kind[positions] = 1
    index = np.empty(n + n_d, dtype=np.int64)
    index[kind == 0] = np.arange(n)
    index[kind == 1] = np.arange(n_d)
    schedule = DecoySchedule(tuple(int(x) for x in symbols), tuple(int(p) for p in positions))
    return Transfer(reg, card_label, password_label, decoys, "D", kind, index), schedule


class Prover:
    """Honest party ``A``. Holds the card and the only copy of ``K``."""

    def __init__(self, card: SmartCard, password: ClassicalPassword, params: ProtocolParams):
        if len(password) != len(card):
            raise ValueError("password length does not match the card")
        self.card = card
        self._password = password
        self.params = params
        self._R = make_R(params)
        self._last_round = -1
        self.pad: OneTimePad | None = None
        self.schedule: DecoySchedule | None = None

    def _lock_rows(self, bits: np.ndarray, inverse: bool = False) -> None:
        op = self._R.conj().T if inverse else self._R
        self.card.register.apply(op, [self.card.label], rows=bits.astype(bool))

    def _new_round(self, round_id: int) -> None:
        if round_id <= self._last_round:
            raise ProtocolAbort(f"round id {round_id} not greater than previous {self._last_round}")
        self._last_round = round_id

    def start(self, session) -> Transfer:
        """Prepare qubits for transmission (basic steps 3-4, extended 3-7)."""
        reg = self.card.register
        self._new_round(session.round_id)
        if session.mode == "basic":
            session.mark("step3")
            reg.append("K", password_kets(self._password.array, self.params))
            session.mark("step4")
            return Transfer(reg, self.card.label, "K")

        rng = session.prover_rng
        session.mark("step3")
        self._lock_rows(self._password.array, inverse=True)
        session.mark("step4")
        self.pad = OneTimePad(tuple(rng.bits(len(self.card))), session.round_id)
        self._lock_rows(self.pad.array)
        session.mark("step5")
        reg.append("K", password_kets(self.pad.array, self.params))
        session.mark("step6")
        symbols, positions = draw_decoys(len(self.card), session.config.N_D, rng)
        session.mark("step7")
        transfer, self.schedule = interleave(reg, self.card.label, "K", symbols, positions)
        return transfer

    def disclosure(self) -> dict:
        """Step (8) announcement: decoy positions and values."""
        return self.schedule.to_dict()

    def restore(self, session, label: str | None) -> None:
        """Take the returned card qubits back (basic 9 / extended 13-14)."""
        if label is None:
            raise ProtocolAbort("card qubits were not returned")
        self.card.label = label
        if session.mode == "extended":
            session.mark("step14")
            self._lock_rows(self.pad.array, inverse=True)
            self._lock_rows(self._password.array)
        self.card.locked = True


# --------------------------------------------------------------------------
# Verifier
# --------------------------------------------------------------------------


class Verifier:
    """Party ``B``: holds the store and the lock device, never ``K``."""

    def __init__(self, store: VerifierStore, lock: LockUnitary | None = None, params: ProtocolParams | None = None):
        if lock is None:
            lock = build_lock_unitary(params or ProtocolParams())
        self.store = store
        self.lock = lock
        self.held: set[str] = {store.label}

    def check_decoys(self, transfer: Transfer, disclosure: dict, rng: RngStream):
        n_d = int(disclosure["N_D"])
        positions = np.asarray(disclosure["positions"], dtype=np.int64)
        symbols = np.asarray(disclosure["symbols"], dtype=np.int64)
        if positions.size != n_d or symbols.size != n_d:
            raise ProtocolAbort("malformed decoy disclosure")
        if transfer.stream_length != len(self.store) + n_d:
            raise ProtocolAbort("stream length does not match N + N_D")
        if n_d and (positions.min() < 0 or positions.max() >= transfer.stream_length):
            raise ProtocolAbort("decoy position out of range")
        transfer.password_slots(positions)
        _, bases, expected = decoy_arrays(symbols)
        got = transfer.measure_stream(positions, bases, rng)
        return got, expected

    def unlock_and_verify(self, reg: QubitRegister, k: str, a: str, rng: RngStream) -> list[str]:
        self.held |= {k, a}
        reg.apply(self.lock.matrix, [k, a, self.store.label])
        idx = reg.measure(BELL_VECTORS, [a, self.store.label], rng)
        return [BELL_LABELS[i] for i in idx]

    def relock(self, reg: QubitRegister, k: str, a: str) -> None:
        reg.apply(self.lock.inverse, [k, a, self.store.label])

    def discard(self, reg: QubitRegister, k: str, rng: RngStream, round_id: int, taps=()) -> None:
        view = DiscardedQubits(reg, k, round_id)
        for i, tap in enumerate(taps):
            tap.read_discarded(view, rng.child(1000 + i))
        reg.discard(k, rng)
        self.held.discard(k)

    def hand_back(self, a: str) -> str:
        self.held.discard(a)
        return a
