"""Protocol-specific quantum objects.

Bell states, password kets, the phase rotation ``R``, the 8x8 lock unitary
``U`` on (password qubit) x (Bell pair), Bell verification and BB84 decoys.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from qpass._kernels import sample_categorical
from qpass.qcore import (
    ATOL,
    DensityMatrix,
    ProjectiveBasis,
    QuantumError,
    RngStream,
    StateVector,
    measure,
)

_S = 1.0 / math.sqrt(2.0)

KET0 = np.array([1.0, 0.0], dtype=np.complex128)
KET1 = np.array([0.0, 1.0], dtype=np.complex128)
KET0X = np.array([_S, _S], dtype=np.complex128)
KET1X = np.array([_S, -_S], dtype=np.complex128)

BELL_LABELS = ("+", "-", "B+", "B-")
BELL_VECTORS = np.array(
    [
        [_S, 0, 0, _S],
        [_S, 0, 0, -_S],
        [0, _S, _S, 0],
        [0, _S, -_S, 0],
    ],
    dtype=np.complex128,
)
BELL_BASIS = ProjectiveBasis.from_vectors(BELL_VECTORS, BELL_LABELS)

Z_BASIS = np.array([KET0, KET1])
X_BASIS = np.array([KET0X, KET1X])


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolParams:
    """Password overlap ``alpha`` and lock phase ``delta``.

    Derived: ``beta = sqrt(1 - alpha^2)``, ``xi = cos(delta)``,
    ``eta = sin(delta)``, ``d = sqrt(1 - alpha^2 xi^2)``.
    Both ``alpha`` and ``xi`` are kept strictly inside (0, 1) so that the
    password states and the key states stay non-orthogonal and distinct.
    Built with :meth:`from_xi`, the given ``xi`` is kept exactly rather than
    recovered as ``cos(acos(xi))``.
    """

    alpha: float = 0.5
    delta: float = math.pi / 3
    exact_xi: float | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not 0.0 < self.delta < math.pi / 2:
            raise ParameterError(f"delta must lie in (0, pi/2), got {self.delta!r}")
        if self.exact_xi is not None and abs(math.cos(self.delta) - self.exact_xi) > 1e-12:
            raise ParameterError(f"xi = {self.exact_xi!r} does not match cos(delta)")

    @classmethod
    def from_xi(cls, alpha: float, xi: float) -> "ProtocolParams":
        if not 0.0 < xi < 1.0:
            raise ParameterError(f"xi must lie in (0, 1), got {xi!r}")
        return cls(alpha, math.acos(xi), float(xi))

    @property
    def beta(self) -> float:
        return math.sqrt(1.0 - self.alpha**2)

    @property
    def xi(self) -> float:
        return math.cos(self.delta) if self.exact_xi is None else self.exact_xi

    @property
    def eta(self) -> float:
        if self.exact_xi is None:
            return math.sin(self.delta)
        return math.sqrt((1.0 - self.exact_xi) * (1.0 + self.exact_xi))

    @property
    def d(self) -> float:
        return math.sqrt(1.0 - (self.alpha * self.xi) ** 2)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "delta": self.delta, "xi": self.xi}


# --------------------------------------------------------------------------
# States and single-qubit gates
# --------------------------------------------------------------------------


def make_bell(kind: str) -> StateVector:
    """One of ``"+"``, ``"-"``, ``"B+"``, ``"B-"`` (A qubit first)."""
    aliases = {"−": "-", "B−": "B-"}
    kind = aliases.get(kind, kind)
    try:
        return StateVector(BELL_VECTORS[BELL_LABELS.index(kind)])
    except ValueError:
        raise QuantumError(f"unknown Bell state {kind!r}") from None


def alpha_ket(params: ProtocolParams) -> np.ndarray:
    return np.array([params.alpha, params.beta], dtype=np.complex128)


def make_alpha_ket(params: ProtocolParams) -> StateVector:
    """``|alpha> = alpha|0> + beta|1>``."""
    return StateVector(alpha_ket(params))


def make_R(params: ProtocolParams) -> np.ndarray:
    """Diagonal lock rotation ``diag(e^{i delta}, e^{-i delta})``."""
    ph = complex(params.xi, params.eta)
    return np.diag([ph, ph.conjugate()]).astype(np.complex128)


def xi_ket(params: ProtocolParams) -> np.ndarray:
    """``|xi> = xi|+> + i eta|->``, equal to ``(R x I)|+>``."""
    return params.xi * BELL_VECTORS[0] + 1j * params.eta * BELL_VECTORS[1]


def c_ket(params: ProtocolParams) -> np.ndarray:
    """Password-qubit output ``alpha xi|0> + d|1>`` of an honest 1-bit block."""
    return np.array([params.alpha * params.xi, params.d], dtype=np.complex128)


def password_kets(bits, params: ProtocolParams) -> np.ndarray:
    """Encode bits as ``|0>`` (bit 0) or ``|alpha>`` (bit 1); shape (n, 2)."""
    bits = np.asarray(bits, dtype=bool)
    return np.where(bits[:, None], alpha_ket(params)[None, :], KET0[None, :])


# --------------------------------------------------------------------------
# Lock unitary
# --------------------------------------------------------------------------

# Columns: |0>|+>, |1>|+>, |0>|->, |1>|->, |0>|B+>, |0>|B->, |1>|B+>, |1>|B->
_SECTOR = np.array(
    [np.kron(k, b) for k, b in [
        (KET0, BELL_VECTORS[0]), (KET1, BELL_VECTORS[0]),
        (KET0, BELL_VECTORS[1]), (KET1, BELL_VECTORS[1]),
        (KET0, BELL_VECTORS[2]), (KET0, BELL_VECTORS[3]),
        (KET1, BELL_VECTORS[2]), (KET1, BELL_VECTORS[3]),
    ]]
).T


def fixed_row(params: ProtocolParams) -> np.ndarray:
    """``<1|<+| U`` restricted to span{|1>|+>, |0>|->, |1>|->}."""
    a, b, xi, eta, d = params.alpha, params.beta, params.xi, params.eta, params.d
    return np.array([b * xi / d, -1j * a * eta / d, -1j * b * eta / d], dtype=np.complex128)


def gram_schmidt_completion(v: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Complete a unit row ``v`` to a 3x3 unitary with rows (v, r2, r3).

    Canonical vectors e1, e2, e3 are orthogonalised in that order against
    the rows accepted so far; candidates with residual norm below ``tol``
    are skipped.
    """
    rows = [np.asarray(v, dtype=np.complex128)]
    for e in np.eye(3, dtype=np.complex128):
        r = e.copy()
        for q in rows:
            r = r - np.vdot(q, r) * q
        # second pass keeps orthogonality at machine precision
        for q in rows:
            r = r - np.vdot(q, r) * q
        norm = np.linalg.norm(r)
        if norm < tol:
            continue
        rows.append(r / norm)
        if len(rows) == 3:
            break
    return np.array(rows)


@dataclass(frozen=True)
class LockUnitary:
    """Unlock unitary ``U`` on (K, A, B) with its chosen completion.

    ``completion`` is the 2x3 block ``[[u11, u12, u13], [u21, u22, u23]]``.
    """

    matrix: np.ndarray
    params: ProtocolParams
    completion: np.ndarray = field(repr=False)

    @property
    def inverse(self) -> np.ndarray:
        return self.matrix.conj().T

    def u(self, i: int, j: int) -> complex:
        """Completion entry ``u_ij`` with 1-based indices."""
        return complex(self.completion[i - 1, j - 1])

    def to_json(self) -> dict:
        m = self.matrix
        return {
            "params": self.params.to_dict(),
            "dim": 8,
            "order": "row-major",
            "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in m],
            "completion": [[[float(z.real), float(z.imag)] for z in row] for row in self.completion],
        }


def build_lock_unitary(params: ProtocolParams, completion: np.ndarray | None = None) -> LockUnitary:
    """Construct ``U``.

    Without ``completion`` the free block is fixed by Gram-Schmidt. A
    user-supplied 2x3 ``completion`` must make the 3x3 sector unitary.
    """
    if completion is None:
        return _default_lock(params)
    completion = np.asarray(completion, dtype=np.complex128)
    if completion.shape != (2, 3):
        raise ParameterError("completion must be 2x3")
    block = np.vstack([fixed_row(params), completion])
    if np.abs(block @ block.conj().T - np.eye(3)).max() > 1e-10:
        raise ParameterError("completion does not yield a unitary block")
    return _assemble(params, block)


@functools.lru_cache(maxsize=256)
def _default_lock(params: ProtocolParams) -> LockUnitary:
    return _assemble(params, gram_schmidt_completion(fixed_row(params)))


def _assemble(params: ProtocolParams, block: np.ndarray) -> LockUnitary:
    sector = np.eye(8, dtype=np.complex128)
    sector[1:4, 1:4] = block
    u = _SECTOR @ sector @ _SECTOR.conj().T
    u.setflags(write=False)
    comp = block[1:].copy()
    comp.setflags(write=False)
    return LockUnitary(u, params, comp)


def u_relation_residuals(lock: LockUnitary) -> np.ndarray:
    """Residuals of the six normalisation/orthogonality relations on ``u_ij``."""
    p = lock.params
    a, b, xi, eta, d = p.alpha, p.beta, p.xi, p.eta, p.d
    u = lock.u
    lhs = [
        abs(u(1, 1)) ** 2 + abs(u(2, 1)) ** 2,
        abs(u(1, 2)) ** 2 + abs(u(2, 2)) ** 2,
        abs(u(1, 3)) ** 2 + abs(u(2, 3)) ** 2,
        u(1, 1) * u(1, 3).conjugate() + u(2, 1) * u(2, 3).conjugate(),
        u(1, 2) * u(1, 3).conjugate() + u(2, 2) * u(2, 3).conjugate(),
        u(1, 1) * u(1, 2).conjugate() + u(2, 1) * u(2, 2).conjugate(),
    ]
    rhs = [
        1 - b**2 * xi**2 / d**2,
        1 - a**2 * eta**2 / d**2,
        1 - b**2 * eta**2 / d**2,
        -1j * b**2 * xi * eta / d**2,
        -(a * b * eta**2) / d**2,
        -1j * a * b * xi * eta / d**2,
    ]
    return np.abs(np.array(lhs) - np.array(rhs))


def _apply(op: np.ndarray, block):
    if isinstance(block, StateVector):
        if block.dim != 8:
            raise QuantumError("lock acts on a 3-qubit (K, A, B) block")
        return StateVector(op @ block.amplitudes)
    if isinstance(block, DensityMatrix):
        if block.dim != 8:
            raise QuantumError("lock acts on a 3-qubit (K, A, B) block")
        return DensityMatrix(op @ block.matrix @ op.conj().T)
    raise TypeError(f"expected StateVector or DensityMatrix, got {type(block).__name__}")


def apply_unlock(lock: LockUnitary, block):
    """``U|psi>`` or ``U rho U^dagger``."""
    return _apply(lock.matrix, block)


def apply_lock(lock: LockUnitary, block):
    """Inverse of :func:`apply_unlock`."""
    return _apply(lock.inverse, block)


# --------------------------------------------------------------------------
# Verification and decoys
# --------------------------------------------------------------------------


def bell_verify(pair, rng: RngStream) -> tuple[bool, str]:
    """Four-outcome Bell measurement; accepted iff the outcome is ``"+"``."""
    if isinstance(pair, DensityMatrix):
        if pair.dim != 4:
            raise QuantumError("Bell verification needs a 2-qubit input")
        probs = np.array([pair.expectation(p) for p in BELL_BASIS.projectors])
        idx = int(sample_categorical(np.clip(probs, 0, None)[None, :], [rng.random()])[0])
        label = BELL_LABELS[idx]
    else:
        if not isinstance(pair, StateVector):
            pair = StateVector(pair)
        if pair.dim != 4:
            raise QuantumError("Bell verification needs a 2-qubit input")
        label, _ = measure(pair, BELL_BASIS, rng)
    return label == "+", label


DECOY_SYMBOLS = (2, 3, 4, 5)
DECOY_KETS = {2: KET0, 3: KET1, 4: KET0X, 5: KET1X}


def decoy_class(symbol: int) -> str:
    """``"Z"`` for symbols 2, 3 and ``"X"`` for 4, 5."""
    if symbol in (2, 3):
        return "Z"
    if symbol in (4, 5):
        return "X"
    raise ValueError(f"decoy symbol must be one of {DECOY_SYMBOLS}, got {symbol!r}")


def decoy_bit(symbol: int) -> int:
    """Expected measurement outcome for ``symbol`` in its own basis."""
    decoy_class(symbol)
    return (symbol - 2) % 2


def decoy_encode(symbol: int) -> StateVector:
    decoy_class(symbol)
    return StateVector(DECOY_KETS[symbol])


def decoy_measure(q: StateVector, basis_class: str, rng: RngStream) -> int:
    """Measure one qubit in Z or X; returns bit 0 or 1."""
    kets = {"Z": Z_BASIS, "X": X_BASIS}[basis_class]
    label, _ = measure(q, ProjectiveBasis.from_vectors(kets, (0, 1)), rng)
    return label


def decoy_arrays(symbols) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised decoy encoding: (kets, measurement bases, expected bits)."""
    symbols = np.asarray(symbols, dtype=np.int64)
    kets = np.array([DECOY_KETS[2], DECOY_KETS[3], DECOY_KETS[4], DECOY_KETS[5]])[symbols - 2]
    is_x = symbols >= 4
    bases = np.where(is_x[:, None, None], X_BASIS[None], Z_BASIS[None])
    return kets, bases, (symbols - 2) % 2


def states_equivalent(a: np.ndarray, b: np.ndarray, atol: float = ATOL) -> np.ndarray:
    """Row-wise phase-blind equality of batches of pure states."""
    ov = np.abs(np.einsum("ni,ni->n", np.conj(a), b))
    return np.abs(ov - 1.0) <= atol
