"""Adversary strategies against the password protocol.

Every strategy is a :class:`~qpass.protocol.channel.Tap` bound to one access
site, so the security environment is checked when the strategy is built.
Substitutes for the prover implement the prover interface (``start``,
``disclosure``, ``restore``) and are handed to ``run_session`` in its place.

Each attack has two engines. ``"session"`` drives the full protocol state
machine. ``"vectorized"`` samples the same per-block statistics straight from
the lock unitary with the hot kernels, which is what the large Monte Carlo
runs use. The two are compared in the test suite.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from qpass._kernels import sample_categorical, unlock_bell_probs
from qpass.analysis.stats import DetectionStats
from qpass.primitives import (
    BELL_VECTORS,
    DECOY_SYMBOLS,
    KET0,
    X_BASIS,
    Z_BASIS,
    LockUnitary,
    ProtocolParams,
    alpha_ket,
    build_lock_unitary,
    decoy_arrays,
    make_R,
)
from qpass.protocol.channel import Tap, Transfer
from qpass.protocol.parties import (
    ProtocolConfig,
    Prover,
    Verifier,
    draw_decoys,
    enroll,
    interleave,
)
from qpass.protocol.session import run_session
from qpass.qcore import RngStream


class AttackKind(str, enum.Enum):
    NO_CARD = "no-card-forgery"
    CARD_STEAL = "card-steal"
    MITM = "man-in-the-middle"
    INTERCEPT_RESEND = "intercept-resend-decoys"
    ACCUMULATE = "accumulate-discarded"

    @property
    def site(self) -> str:
        return ATTACK_SITES[self]


ATTACK_SITES = {
    AttackKind.NO_CARD: "prover-substitute",
    AttackKind.CARD_STEAL: "prover-substitute",
    AttackKind.MITM: "quantum-channel",
    AttackKind.INTERCEPT_RESEND: "quantum-channel",
    AttackKind.ACCUMULATE: "verifier-discard",
}


# --------------------------------------------------------------------------
# Forged inputs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ForgedInput:
    """Product forgery ``|Psi_E>`` on (password qubit, card qubit).

    Amplitudes are ordered ``Psi_00, Psi_01, Psi_10, Psi_11`` with the
    password qubit most significant.
    """

    psi: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=np.complex128).reshape(-1)
        if psi.size != 4:
            raise ValueError("a forged block has exactly 4 amplitudes")
        norm = float(np.vdot(psi, psi).real)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"forged state not normalised (norm^2 = {norm!r})")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @classmethod
    def normalized(cls, amps) -> "ForgedInput":
        amps = np.asarray(amps, dtype=np.complex128)
        return cls(amps / np.linalg.norm(amps))

    @classmethod
    def product(cls, k_ket, a_ket) -> "ForgedInput":
        return cls.normalized(np.kron(k_ket, a_ket))

    @classmethod
    def random(cls, rng: RngStream) -> "ForgedInput":
        """Haar-random two-qubit state."""
        z = rng.generator.normal(size=4) + 1j * rng.generator.normal(size=4)
        return cls.normalized(z)

    @property
    def matrix(self) -> np.ndarray:
        """``Psi[k, a]`` as a 2x2 array."""
        return self.psi.reshape(2, 2)

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        """Reduced states of the password and card qubits."""
        m = self.matrix
        return m @ m.conj().T, (m.T @ m.conj()).T

    def to_list(self) -> list:
        return [[float(z.real), float(z.imag)] for z in self.psi]


@dataclass(frozen=True)
class CardStealPassword:
    """Password-qubit forgery ``rho_E = [[r, x + iy], [x - iy, 1 - r]]``.

    Any point of the Bloch ball is admitted (``x^2 + y^2 <= r(1 - r)``);
    the surface is the pure-state case.
    """

    r: float
    x: float = 0.0
    y: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"r must lie in [0, 1], got {self.r!r}")
        if self.x * self.x + self.y * self.y > self.r * (1.0 - self.r) + 1e-12:
            raise ValueError("x^2 + y^2 exceeds r(1 - r): not a density matrix")

    @property
    def rho(self) -> np.ndarray:
        return np.array(
            [[self.r, self.x + 1j * self.y], [self.x - 1j * self.y, 1.0 - self.r]],
            dtype=np.complex128,
        )

    @classmethod
    def from_ket(cls, ket) -> "CardStealPassword":
        ket = np.asarray(ket, dtype=np.complex128)
        ket = ket / np.linalg.norm(ket)
        off = ket[0] * np.conj(ket[1])
        return cls(float(abs(ket[0]) ** 2), float(off.real), float(off.imag))

    @classmethod
    def optimal(cls, params: ProtocolParams) -> "CardStealPassword":
        """Minimiser of the card-steal detection probability."""
        a, b = params.alpha, params.beta
        return cls((1.0 + a) / 2.0, b / 2.0, 0.0)

    def ensemble(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigen-decomposition as (weights, kets)."""
        w, v = np.linalg.eigh(self.rho)
        return np.clip(w, 0.0, None), v.T.copy()

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        return sample_ensemble(self.rho, n, rng)

    def to_dict(self) -> dict:
        return {"r": self.r, "x": self.x, "y": self.y}


def sample_ensemble(rho: np.ndarray, n: int, rng: RngStream) -> np.ndarray:
    """Draw ``n`` pure states whose average is ``rho``; shape (n, d)."""
    w, v = np.linalg.eigh(np.asarray(rho, dtype=np.complex128))
    w = np.clip(w, 0.0, None)
    idx = sample_categorical(np.broadcast_to(w, (n, w.size)), rng.random(n))
    return v.T[idx].copy()


# --------------------------------------------------------------------------
# Measurement policies
# --------------------------------------------------------------------------


def angle_basis(theta: float) -> np.ndarray:
    """Projective qubit basis rotated by ``theta`` in the X-Z plane.

    ``theta = 0`` is Z, ``pi/2`` is X and ``pi/4`` the Breidbart basis.
    """
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, s], [-s, c]], dtype=np.complex128)


@dataclass(frozen=True)
class BasisPolicy:
    """How an intercept-resend adversary picks its measurement basis.

    ``kind`` is ``"random"`` (Z or X with equal probability), ``"Z"``,
    ``"X"`` or ``"angle"`` (fixed rotated basis, see :func:`angle_basis`).
    """

    kind: str = "random"
    angle: float = math.pi / 4

    def __post_init__(self):
        if self.kind not in ("random", "Z", "X", "angle"):
            raise ValueError(f"unknown basis policy {self.kind!r}")

    @classmethod
    def breidbart(cls) -> "BasisPolicy":
        return cls("angle", math.pi / 4)

    def choices(self) -> list[tuple[float, np.ndarray]]:
        """(probability, basis) pairs the policy mixes over."""
        if self.kind == "random":
            return [(0.5, Z_BASIS), (0.5, X_BASIS)]
        if self.kind == "Z":
            return [(1.0, Z_BASIS)]
        if self.kind == "X":
            return [(1.0, X_BASIS)]
        return [(1.0, angle_basis(self.angle))]

    def bases(self, n: int, rng: RngStream) -> np.ndarray:
        if self.kind == "random":
            pick = rng.bits(n).astype(bool)
            return np.where(pick[:, None, None], X_BASIS[None], Z_BASIS[None])
        return np.broadcast_to(self.choices()[0][1], (n, 2, 2)).copy()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "angle": self.angle}


def decoy_flag_probability(policy: BasisPolicy) -> float:
    """Exact per-decoy flag probability under intercept-resend.

    Enumerates the four decoy states, the policy's bases and both of the
    adversary's outcomes.
    """
    kets, vbases, expected = decoy_arrays(DECOY_SYMBOLS)
    total = 0.0
    for ket, vb, e in zip(kets, vbases, expected):
        for weight, eb in policy.choices():
            for out in eb:
                p_e = abs(np.vdot(out, ket)) ** 2
                p_wrong = abs(np.vdot(vb[1 - e], out)) ** 2
                total += 0.25 * weight * p_e * p_wrong
    return float(total)


def helstrom_basis(ket0, ket1, grid: int = 181, refine: int = 40) -> tuple[np.ndarray, float]:
    """Best projective measurement for two equiprobable pure qubit states.

    Brute-force sweep of measurement axes over the Bloch sphere followed by
    local grid refinement. Outcome 0 guesses ``ket0``.

    Returns
    -------
    basis : ndarray, shape (2, 2)
        Measurement kets as rows.
    success : float
        Probability of a correct guess.
    """
    ket0 = np.asarray(ket0, dtype=np.complex128)
    ket1 = np.asarray(ket1, dtype=np.complex128)

    def bloch(k):
        rho = np.outer(k, k.conj())
        return np.array([2 * rho[0, 1].real, -2 * rho[0, 1].imag, (rho[0, 0] - rho[1, 1]).real])

    diff = bloch(ket0) - bloch(ket1)

    def success(theta, phi):
        n = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)
        return 0.5 + 0.25 * (n @ diff)

    th = np.linspace(0.0, math.pi, grid)
    ph = np.linspace(0.0, 2 * math.pi, 2 * grid - 1)
    T, P = np.meshgrid(th, ph, indexing="ij")
    s = success(T, P)
    i, j = np.unravel_index(np.argmax(s), s.shape)
    t0, p0 = th[i], ph[j]
    step = math.pi / (grid - 1)
    for _ in range(refine):
        tt = t0 + step * np.linspace(-2, 2, 9)
        pp = p0 + step * np.linspace(-2, 2, 9)
        T, P = np.meshgrid(tt, pp, indexing="ij")
        s = success(T, P)
        i, j = np.unravel_index(np.argmax(s), s.shape)
        t0, p0 = tt[i], pp[j]
        step /= 2.0
    best = float(success(t0, p0))
    up = np.array([math.cos(t0 / 2), np.exp(1j * p0) * math.sin(t0 / 2)], dtype=np.complex128)
    down = np.array([-np.exp(-1j * p0) * math.sin(t0 / 2), math.cos(t0 / 2)], dtype=np.complex128)
    return np.array([up, down]), best


def majority_accuracy(p: float, rounds: int) -> float:
    """Exact accuracy of a majority vote over ``rounds`` independent guesses.

    Each guess is right with probability ``p``; ties are broken by a fair coin.
    """
    k = np.arange(rounds + 1)
    logc = np.array([math.lgamma(rounds + 1) - math.lgamma(i + 1) - math.lgamma(rounds - i + 1) for i in k])
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    # 0 * log(0) is taken as 0 so the end points p = 0 and p = 1 are exact
    lp, lq = math.log(p) if p > 0 else -np.inf, math.log1p(-p) if p < 1 else -np.inf
    m = rounds - k
    with np.errstate(invalid="ignore"):
        logp = logc + np.where(k > 0, k * lp, 0.0) + np.where(m > 0, m * lq, 0.0)
    pk = np.exp(logp)
    acc = pk[2 * k > rounds].sum() + 0.5 * pk[2 * k == rounds].sum()
    return float(min(acc, 1.0))


# --------------------------------------------------------------------------
# Strategies
# --------------------------------------------------------------------------


class _Impersonator(Tap):
    """Shared plumbing for adversaries standing in for the prover."""

    site = "prover-substitute"
    kind: AttackKind

    def __init__(self):
        super().__init__()
        self.schedule = None
        self._fresh = 0

    def _labels(self, *stems: str) -> list[str]:
        self._fresh += 1
        return [f"E{s}{self._fresh}" for s in stems]

    def _finish(self, session, reg, card_label: str, pw_label: str) -> Transfer:
        if session.mode == "basic":
            return Transfer(reg, card_label, pw_label)
        # own decoys: the adversary knows them, so they always pass
        symbols, positions = draw_decoys(reg.rows, session.config.N_D, session.prover_rng)
        transfer, self.schedule = interleave(reg, card_label, pw_label, symbols, positions)
        return transfer

    def disclosure(self) -> dict:
        return self.schedule.to_dict()

    def restore(self, session, label) -> None:
        pass


class Forger(_Impersonator):
    """Impersonation without the card or ``K``: sends ``|Psi_E>`` per block."""

    kind = AttackKind.NO_CARD

    def __init__(self, forged: ForgedInput):
        super().__init__()
        self.forged = forged

    def start(self, session) -> Transfer:
        # rows of the shared world register index the blocks; the genuine
        # card stays with the prover and is never touched
        reg = session.verifier.store.register
        k, a = self._labels("K", "A")
        reg.append_joint([k, a], self.forged.psi)
        return self._finish(session, reg, a, k)


class CardThief(_Impersonator):
    """Holds the stolen, still locked card; forges password qubits as ``rho_E``."""

    kind = AttackKind.CARD_STEAL

    def __init__(self, password: CardStealPassword, card):
        super().__init__()
        self.password = password
        self.card = card

    def start(self, session) -> Transfer:
        reg = self.card.register
        (k,) = self._labels("K")
        reg.append(k, self.password.sample(reg.rows, session.prover_rng))
        return self._finish(session, reg, self.card.label, k)

    def restore(self, session, label) -> None:
        if label is not None:
            self.card.label = label


class ManInTheMiddle(Tap):
    """Absorbs everything the prover sends and forwards forgeries.

    On an aligned (basic) stream the forgery goes out as joint pairs. With
    decoys the adversary cannot tell which stream slot pairs with which card
    qubit, so it forwards the two single-qubit marginals independently.
    With ``forward=False`` nothing reaches the verifier.
    """

    site = "quantum-channel"
    kind = AttackKind.MITM

    def __init__(self, forged: ForgedInput | None = None, forward: bool = True):
        super().__init__()
        self.forged = forged or ForgedInput.product(KET0, KET0)
        self.forward = forward
        self.stolen_rounds = 0

    def intercept(self, transfer: Transfer, rng: RngStream) -> None:
        transfer.absorb()
        self.stolen_rounds += 1
        if not self.forward:
            return
        if transfer.aligned:
            transfer.forward_pairs(self.forged.psi)
            return
        rho_k, rho_a = self.forged.marginals()
        transfer.forward_card(sample_ensemble(rho_a, transfer.card_length, rng.child(0)))
        transfer.forward_stream(sample_ensemble(rho_k, transfer.stream_length, rng.child(1)))


class InterceptResend(Tap):
    """Measures every stream slot under ``policy`` and resends the result."""

    site = "quantum-channel"
    kind = AttackKind.INTERCEPT_RESEND

    def __init__(self, policy: BasisPolicy | None = None):
        super().__init__()
        self.policy = policy or BasisPolicy()
        self.measured = 0

    def intercept(self, transfer: Transfer, rng: RngStream) -> None:
        n = transfer.stream_length
        bases = self.policy.bases(n, rng.child(0))
        transfer.measure_stream(np.arange(n), bases, rng.child(1))
        self.measured += n


class DiscardAccumulator(Tap):
    """Reads each discarded password qubit with one fixed measurement.

    Outcome 1 is taken as a vote for K-bit 1. ``votes`` has one row per
    observed round.
    """

    site = "verifier-discard"
    kind = AttackKind.ACCUMULATE

    def __init__(self, basis: np.ndarray):
        super().__init__()
        self.basis = np.asarray(basis, dtype=np.complex128)
        self.votes: list[np.ndarray] = []

    @classmethod
    def helstrom(cls, params: ProtocolParams) -> "DiscardAccumulator":
        basis, _ = helstrom_basis(KET0, alpha_ket(params))
        return cls(basis)

    def read_discarded(self, view, rng: RngStream) -> None:
        self.votes.append(view.measure(self.basis, rng).astype(np.int8))


class ClassicalListener(Tap):
    """Passive listener on the public classical channel."""

    site = "classical-channel"

    def __init__(self):
        super().__init__()
        self.heard: list = []

    def observe(self, msg) -> None:
        self.heard.append(msg)


class VerifierRecordReader(Tap):
    """Reads the verifier's classical Bell-outcome records."""

    site = "verifier-classical"

    def __init__(self):
        super().__init__()
        self.records: list[tuple[int, list]] = []

    def read_records(self, round_id: int, outcomes: list) -> None:
        self.records.append((round_id, outcomes))


class CardProbe(Tap):
    """Reads the card inside the prover's region. Always refused."""

    site = "prover-region"


class StoreExtractor(Tap):
    """Carries the verifier's stored qubits out of its region. Always refused."""

    site = "verifier-quantum"


# --------------------------------------------------------------------------
# Attack drivers
# --------------------------------------------------------------------------


@dataclass
class AttackResult:
    """Outcome of a batch of attacks.

    ``block`` counts detections per elementary unit (Bell block, or decoy
    for intercept-resend); ``session`` counts rejected sessions.
    """

    kind: str
    block: DetectionStats | None
    session: DetectionStats
    verdicts: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "block": None if self.block is None else self.block.to_dict(),
            "session": self.session.to_dict(),
            "verdicts": dict(self.verdicts),
            "details": dict(self.details),
        }


def _lock_for(config: ProtocolConfig, lock: LockUnitary | None) -> LockUnitary:
    return lock if lock is not None else build_lock_unitary(config.params)


def _key_pairs(bits: np.ndarray, params: ProtocolParams) -> np.ndarray:
    """Locked (card, store) pair per block: ``|+>`` or ``(R x I)|+>``."""
    plus = BELL_VECTORS[0]
    locked = np.kron(make_R(params), np.eye(2)) @ plus
    return np.where(bits.astype(bool)[:, None], locked[None], plus[None])


def _bell_flags(lock: LockUnitary, states: np.ndarray, rng: RngStream) -> np.ndarray:
    probs = unlock_bell_probs(lock.matrix, states)
    return sample_categorical(probs, rng.random(states.shape[0])) != 0


def _from_sessions(kind: str, transcripts, n_blocks: int, details=None) -> AttackResult:
    verdicts: dict[str, int] = {}
    flags, rejected = [], []
    for tr in transcripts:
        verdicts[tr.verdict] = verdicts.get(tr.verdict, 0) + 1
        if tr.bell_outcomes:
            flags.extend(o != "+" for o in tr.bell_outcomes)
        rejected.append(not tr.accepted)
    block = DetectionStats.from_flags(flags, f"{kind}/block") if flags else None
    return AttackResult(kind, block, DetectionStats.from_flags(rejected, f"{kind}/session"), verdicts, details or {})


def attack_no_card(
    forged: ForgedInput,
    config: ProtocolConfig,
    trials: int,
    rng: RngStream,
    *,
    engine: str = "vectorized",
    store_model: str = "pair",
    lock: LockUnitary | None = None,
) -> AttackResult:
    """Impersonate the prover with neither card nor ``K``.

    Parameters
    ----------
    store_model : {"pair", "mixed"}
        Vectorized engine only. ``"pair"`` keeps the genuine enrolled pair
        and lets the absent card decohere the store qubit; ``"mixed"``
        feeds the store as exactly ``I/2``.
    """
    lock = _lock_for(config, lock)
    n = config.N
    if engine == "session":
        out = []
        for t in range(trials):
            trng = rng.child(t)
            _, store, _ = enroll(config, rng=trng.child(0))
            verifier = Verifier(store, lock=lock)
            out.append(run_session(Forger(forged), verifier, config, rng=trng.child(1)))
        return _from_sessions(AttackKind.NO_CARD.value, out, n)
    if engine != "vectorized":
        raise ValueError(f"unknown engine {engine!r}")
    m = trials * n
    if store_model == "pair":
        pairs = _key_pairs(rng.child(0).bits(m), config.params)
        # the card is out of reach: its Z outcome fixes the store qubit
        p_card0 = np.abs(pairs[:, 0]) ** 2 + np.abs(pairs[:, 1]) ** 2
        b = (rng.child(1).random(m) >= p_card0).astype(np.int64)
    elif store_model == "mixed":
        b = rng.child(1).bits(m).astype(np.int64)
    else:
        raise ValueError(f"unknown store model {store_model!r}")
    states = np.kron(forged.psi, np.eye(2)[0])[None].repeat(m, 0)
    states[b == 1] = np.kron(forged.psi, np.eye(2)[1])
    flags = _bell_flags(lock, states, rng.child(2)).reshape(trials, n)
    kind = AttackKind.NO_CARD.value
    return AttackResult(
        kind,
        DetectionStats.from_flags(flags, f"{kind}/block"),
        DetectionStats.from_flags(flags.any(axis=1), f"{kind}/session"),
        details={"engine": engine, "store_model": store_model},
    )


def attack_with_stolen_card(
    password: CardStealPassword,
    config: ProtocolConfig,
    trials: int,
    rng: RngStream,
    *,
    engine: str = "vectorized",
    lock: LockUnitary | None = None,
) -> AttackResult:
    """Impersonate the prover with the stolen card and forged password qubits."""
    lock = _lock_for(config, lock)
    n = config.N
    kind = AttackKind.CARD_STEAL.value
    if engine == "session":
        out = []
        for t in range(trials):
            trng = rng.child(t)
            card, store, _ = enroll(config, rng=trng.child(0))
            verifier = Verifier(store, lock=lock)
            out.append(run_session(CardThief(password, card), verifier, config, rng=trng.child(1)))
        return _from_sessions(kind, out, n)
    if engine != "vectorized":
        raise ValueError(f"unknown engine {engine!r}")
    m = trials * n
    pairs = _key_pairs(rng.child(0).bits(m), config.params)
    kets = password.sample(m, rng.child(1))
    states = (kets[:, :, None] * pairs[:, None, :]).reshape(m, 8)
    flags = _bell_flags(lock, states, rng.child(2)).reshape(trials, n)
    return AttackResult(
        kind,
        DetectionStats.from_flags(flags, f"{kind}/block"),
        DetectionStats.from_flags(flags.any(axis=1), f"{kind}/session"),
        details={"engine": engine},
    )


def _honest_round(config, tap, trng, lock):
    card, store, password = enroll(config, rng=trng.child(0))
    prover = Prover(card, password, config.params)
    verifier = Verifier(store, lock=lock)
    return run_session(prover, verifier, config, rng=trng.child(1), taps=(tap,))


def attack_mitm(
    config: ProtocolConfig,
    trials: int,
    rng: RngStream,
    *,
    forged: ForgedInput | None = None,
    forward: bool = True,
    lock: LockUnitary | None = None,
) -> AttackResult:
    """Absorb-and-forward against an honest prover."""
    lock = _lock_for(config, lock)
    kind = AttackKind.MITM.value
    out, stolen = [], 0
    for t in range(trials):
        tap = ManInTheMiddle(forged, forward)
        out.append(_honest_round(config, tap, rng.child(t), lock))
        stolen += tap.stolen_rounds
    return _from_sessions(kind, out, config.N, {"rounds_with_stolen_states": stolen, "forward": forward})


def attack_intercept_resend(
    policy: BasisPolicy,
    config: ProtocolConfig,
    trials: int,
    rng: RngStream,
    *,
    lock: LockUnitary | None = None,
) -> AttackResult:
    """Intercept-resend on every stream slot of an extended-mode session.

    ``block`` counts flagged decoys, ``session`` counts sessions rejected at
    the decoy check. ``details["total"]`` counts rejections at any stage.
    """
    if config.mode != "extended":
        raise ValueError("intercept-resend is screened by decoys; use extended mode")
    lock = _lock_for(config, lock)
    kind = AttackKind.INTERCEPT_RESEND.value
    flags, at_decoy, rejected = [], [], []
    verdicts: dict[str, int] = {}
    for t in range(trials):
        tr = _honest_round(config, InterceptResend(policy), rng.child(t), lock)
        verdicts[tr.verdict] = verdicts.get(tr.verdict, 0) + 1
        flags.extend(not r["consistent"] for r in tr.decoy_results)
        at_decoy.append(tr.verdict == "rejected-at-decoy")
        rejected.append(not tr.accepted)
    return AttackResult(
        kind,
        DetectionStats.from_flags(flags, f"{kind}/decoy"),
        DetectionStats.from_flags(at_decoy, f"{kind}/session"),
        verdicts,
        {"total": DetectionStats.from_flags(rejected, f"{kind}/any-stage").to_dict(), "policy": policy.to_dict()},
    )


@dataclass
class AccumulationReport:
    """Per-bit accuracy of ``K`` estimates against the number of rounds."""

    mode: str
    checkpoints: list
    correct: list
    bits: int
    single_shot: float
    details: dict = field(default_factory=dict)

    @property
    def accuracy(self) -> list[float]:
        return [c / self.bits for c in self.correct]

    def stats(self, i: int = -1) -> DetectionStats:
        """Correct guesses at checkpoint ``i`` as a binomial count."""
        return DetectionStats(self.bits, self.correct[i], f"accuracy@{self.checkpoints[i]}")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "bits": self.bits,
            "single_shot": self.single_shot,
            "rows": [
                {"rounds": r, "accuracy": c / self.bits, "stderr": self.stats(i).stderr}
                for i, (r, c) in enumerate(zip(self.checkpoints, self.correct))
            ],
            "details": dict(self.details),
        }


def attack_accumulate_discarded(
    rounds: int,
    config: ProtocolConfig,
    rng: RngStream,
    *,
    basis: np.ndarray | None = None,
    trials: int = 1,
    checkpoints=None,
    lock: LockUnitary | None = None,
) -> AccumulationReport:
    """Read every discarded password qubit over repeated honest rounds.

    Each trial enrolls a fresh card, runs ``rounds`` honest sessions and
    estimates each bit of ``K`` by majority vote over the votes seen so far
    (ties broken by a fair coin). The default measurement is the
    numerically found Helstrom basis for ``|0>`` against ``|alpha>``.
    """
    lock = _lock_for(config, lock)
    if basis is None:
        basis, single = helstrom_basis(KET0, alpha_ket(config.params))
    else:
        basis = np.asarray(basis, dtype=np.complex128)
        a = alpha_ket(config.params)
        single = 0.5 * (abs(basis[0, 0]) ** 2 + abs(np.vdot(basis[1], a)) ** 2)
    checkpoints = sorted(set(checkpoints or [rounds]))
    if checkpoints[0] < 1 or checkpoints[-1] > rounds:
        raise ValueError("checkpoints must lie in [1, rounds]")
    correct = np.zeros(len(checkpoints), dtype=np.int64)
    verdicts: dict[str, int] = {}
    for t in range(trials):
        trng = rng.child(t)
        card, store, password = enroll(config, rng=trng.child(0))
        prover = Prover(card, password, config.params)
        verifier = Verifier(store, lock=lock)
        tap = DiscardAccumulator(basis)
        rounds_rng = trng.child(1)
        for r in range(rounds):
            tr = run_session(prover, verifier, config, round_id=r, rng=rounds_rng.child(r), discard_taps=(tap,))
            verdicts[tr.verdict] = verdicts.get(tr.verdict, 0) + 1
        votes = np.array(tap.votes, dtype=np.int64)
        if votes.shape[0] != rounds:
            raise RuntimeError(f"only {votes.shape[0]} of {rounds} rounds reached the discard step")
        ones = np.cumsum(votes, axis=0)
        coins = trng.child(2).bits(config.N)
        for i, c in enumerate(checkpoints):
            k1 = ones[c - 1]
            guess = np.where(2 * k1 > c, 1, np.where(2 * k1 < c, 0, coins))
            correct[i] += int(np.sum(guess == password.array))
    return AccumulationReport(
        config.mode,
        checkpoints,
        [int(c) for c in correct],
        trials * config.N,
        float(single),
        {"rounds": rounds, "trials": trials, "verdicts": verdicts},
    )
