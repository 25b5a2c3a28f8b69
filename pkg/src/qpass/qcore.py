"""Small-dimension exact quantum linear algebra.

States are dense ``complex128`` arrays. Qubit ordering is big-endian: for a
block ``(K, A, B)`` the basis index is ``4*k + 2*a + b``.

Two layers live here:

* value types (:class:`StateVector`, :class:`DensityMatrix`,
  :class:`ProjectiveBasis`) with the free functions :func:`tensor`,
  :func:`partial_trace`, :func:`measure`, :func:`born_probability` and
  :func:`purity`;
* :class:`QubitRegister`, a batch of identically-laid-out pure states used by
  the protocol simulator so that all blocks of a session move together.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from qpass._kernels import sample_categorical

ATOL = 1e-12


class QuantumError(ValueError):
    """Invalid quantum object or incompatible dimensions."""


def _num_qubits(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise QuantumError(f"dimension {dim} is not a power of two")
    return n


# --------------------------------------------------------------------------
# RNG
# --------------------------------------------------------------------------


class RngStream:
    """Seeded, splittable counter-based random stream (Philox).

    Identical ``(seed, stream_id)`` pairs reproduce identical draws. Child
    streams made with :meth:`child` are statistically independent of the
    parent and of each other.
    """

    def __init__(self, seed: int, stream_id: int | Sequence[int] = 0):
        if isinstance(stream_id, (int, np.integer)):
            path: tuple[int, ...] = (int(stream_id),)
        else:
            path = tuple(int(s) for s in stream_id)
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.path = path
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=path)
        self.generator = np.random.Generator(np.random.Philox(seq))

    @property
    def stream_id(self) -> int:
        return self.path[0]

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.path + (int(index),))

    def random(self, size=None):
        return self.generator.random(size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size=size)

    def bits(self, n: int) -> np.ndarray:
        return self.generator.integers(0, 2, size=n, dtype=np.int8)

    def choice(self, a, size=None, replace=True):
        return self.generator.choice(a, size=size, replace=replace)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"


# --------------------------------------------------------------------------
# Value types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state of ``n`` qubits."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        _num_qubits(amps.size)
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > 1e-10:
            raise QuantumError(f"state not normalized (norm^2={norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, bits: str) -> "StateVector":
        amps = np.zeros(2 ** len(bits), dtype=np.complex128)
        amps[int(bits, 2)] = 1.0
        return cls(amps)

    @property
    def num_qubits(self) -> int:
        return _num_qubits(self.amplitudes.size)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def inner(self, other: "StateVector") -> complex:
        """Return ``<self|other>``."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "StateVector") -> float:
        return abs(self.inner(other)) ** 2

    def equiv(self, other: "StateVector", atol: float = ATOL) -> bool:
        """Equality up to a global phase."""
        return self.dim == other.dim and abs(abs(self.inner(other)) - 1.0) <= atol

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def evolve(self, op: np.ndarray) -> "StateVector":
        return StateVector(np.asarray(op) @ self.amplitudes)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QuantumError(f"density matrix must be square, got {m.shape}")
        _num_qubits(m.shape[0])
        if np.abs(m - m.conj().T).max() > 1e-10:
            raise QuantumError("density matrix not Hermitian")
        if abs(np.trace(m).real - 1.0) > 1e-10:
            raise QuantumError("density matrix trace != 1")
        if np.linalg.eigvalsh(m).min() < -1e-10:
            raise QuantumError("density matrix not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def maximally_mixed(cls, num_qubits: int) -> "DensityMatrix":
        d = 2**num_qubits
        return cls(np.eye(d, dtype=np.complex128) / d)

    @property
    def num_qubits(self) -> int:
        return _num_qubits(self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def evolve(self, op: np.ndarray) -> "DensityMatrix":
        op = np.asarray(op)
        return DensityMatrix(op @ self.matrix @ op.conj().T)

    def expectation(self, op: np.ndarray) -> float:
        return float(np.trace(self.matrix @ np.asarray(op)).real)

    def allclose(self, other, atol: float = ATOL) -> bool:
        other = other.matrix if isinstance(other, DensityMatrix) else np.asarray(other)
        return other.shape == self.matrix.shape and np.abs(self.matrix - other).max() <= atol

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def _as_density(x) -> DensityMatrix:
    if isinstance(x, DensityMatrix):
        return x
    if isinstance(x, StateVector):
        return x.to_density()
    arr = np.asarray(x)
    if arr.ndim == 1:
        return StateVector(arr).to_density()
    return DensityMatrix(arr)


@dataclass(frozen=True)
class ProjectiveBasis:
    """Complete set of orthogonal projectors with outcome labels."""

    projectors: tuple
    labels: tuple
    vectors: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        projs = tuple(np.array(p, dtype=np.complex128) for p in self.projectors)
        if len(projs) != len(self.labels):
            raise QuantumError("one label per projector required")
        d = projs[0].shape[0]
        total = sum(projs)
        if np.abs(total - np.eye(d)).max() > ATOL:
            raise QuantumError("projectors do not sum to identity")
        for i, p in enumerate(projs):
            for j, q in enumerate(projs):
                target = p if i == j else np.zeros_like(p)
                if np.abs(p @ q - target).max() > ATOL:
                    raise QuantumError("projectors are not mutually orthogonal idempotents")
        for p in projs:
            p.setflags(write=False)
        object.__setattr__(self, "projectors", projs)
        object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def from_vectors(cls, vectors: Sequence, labels: Sequence) -> "ProjectiveBasis":
        """Rank-one basis from orthonormal kets."""
        vecs = tuple(np.asarray(v, dtype=np.complex128).reshape(-1) for v in vectors)
        projs = tuple(np.outer(v, v.conj()) for v in vecs)
        return cls(projs, tuple(labels), vecs)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def index(self, label) -> int:
        return self.labels.index(label)


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------


def tensor(a, b):
    """Kronecker product with ``a`` as the more significant factor."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(np.kron(a.amplitudes, b.amplitudes))
    return DensityMatrix(np.kron(_as_density(a).matrix, _as_density(b).matrix))


def partial_trace(rho, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on the qubits listed in ``keep`` (in ascending order).

    Qubit 0 is the most significant. ``keep`` must be a non-empty proper
    subset of the qubit indices.
    """
    rho = _as_density(rho)
    n = rho.num_qubits
    keep = sorted(set(int(k) for k in keep))
    if not keep or len(keep) >= n or keep[0] < 0 or keep[-1] >= n:
        raise QuantumError(f"keep={keep!r} is not a non-empty proper subset of range({n})")
    drop = [q for q in range(n) if q not in keep]
    t = rho.matrix.reshape((2,) * (2 * n))
    # move kept row axes, kept col axes, then traced axes
    perm = keep + [k + n for k in keep] + drop + [q + n for q in drop]
    t = t.transpose(perm)
    dk, dd = 2 ** len(keep), 2 ** len(drop)
    t = t.reshape(dk, dk, dd, dd)
    return DensityMatrix(np.trace(t, axis1=2, axis2=3))


def _check_projector(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.complex128)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise QuantumError("projector must be a square matrix")
    if np.abs(p - p.conj().T).max() > 1e-10 or np.abs(p @ p - p).max() > 1e-10:
        raise QuantumError("not an orthogonal projector")
    return p


def born_probability(state, projector) -> float:
    """``<psi|P|psi>`` (or ``Tr[rho P]`` for a density matrix)."""
    p = _check_projector(projector)
    if isinstance(state, DensityMatrix):
        if state.dim != p.shape[0]:
            raise QuantumError("dimension mismatch")
        val = np.trace(state.matrix @ p).real
    else:
        psi = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
        if psi.size != p.shape[0]:
            raise QuantumError("dimension mismatch")
        val = np.vdot(psi, p @ psi).real
    return float(min(1.0, max(0.0, val)))


def measure(state: StateVector, basis: ProjectiveBasis, rng: RngStream):
    """Projective measurement; returns ``(label, post_state)``."""
    if state.dim != basis.dim:
        raise QuantumError(f"basis dim {basis.dim} != state dim {state.dim}")
    psi = state.amplitudes
    probs = np.array([np.vdot(psi, p @ psi).real for p in basis.projectors])
    probs = np.clip(probs, 0.0, None)
    idx = _inverse_cdf(probs, rng.random())
    post = basis.projectors[idx] @ psi
    post = post / np.linalg.norm(post)
    return basis.labels[idx], StateVector(post)


def _inverse_cdf(probs: np.ndarray, u: float) -> int:
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    idx = min(idx, len(probs) - 1)
    # never land on a zero-probability outcome through round-off
    while probs[idx] <= 0.0 and idx > 0:
        idx -= 1
    return idx


def purity(rho) -> float:
    """``Tr[rho^2]``."""
    m = _as_density(rho).matrix
    return float(np.einsum("ij,ji->", m, m).real)


# --------------------------------------------------------------------------
# Batched register
# --------------------------------------------------------------------------


class QubitRegister:
    """A batch of ``n`` pure states sharing one qubit layout.

    Row ``i`` is the joint state of block ``i``. Qubits are addressed by
    label; the first label is the most significant qubit. Rows never
    exchange qubits, so every operation is a per-row local operation.
    """

    def __init__(self, labels: Sequence[str], data: np.ndarray):
        data = np.asarray(data, dtype=np.complex128)
        if data.ndim != 2 or data.shape[1] != 2 ** len(labels):
            raise QuantumError(f"data shape {data.shape} does not match {len(labels)} qubits")
        if len(set(labels)) != len(labels):
            raise QuantumError(f"duplicate labels {labels!r}")
        self.labels = list(labels)
        self.data = data

    @classmethod
    def product(cls, label: str, states: np.ndarray) -> "QubitRegister":
        """Register of ``n`` rows holding one qubit each."""
        states = np.asarray(states, dtype=np.complex128)
        return cls([label], states.reshape(-1, 2))

    @classmethod
    def joint(cls, labels: Sequence[str], states: np.ndarray, rows: int | None = None):
        states = np.asarray(states, dtype=np.complex128)
        if states.ndim == 1:
            states = np.broadcast_to(states, (rows, states.size)).copy()
        return cls(labels, states)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    def copy(self) -> "QubitRegister":
        return QubitRegister(list(self.labels), self.data.copy())

    def _axes(self, labels: Sequence[str]) -> list[int]:
        try:
            return [self.labels.index(lab) for lab in labels]
        except ValueError:
            raise QuantumError(f"unknown label in {labels!r}; have {self.labels!r}") from None

    def _split(self, labels: Sequence[str]):
        """View data as (rows, rest, target) with targets last."""
        axes = self._axes(labels)
        q = self.num_qubits
        t = self.data.reshape((self.rows,) + (2,) * q)
        rest = [i for i in range(q) if i not in axes]
        perm = [0] + [r + 1 for r in rest] + [a + 1 for a in axes]
        t = t.transpose(perm).reshape(self.rows, 2 ** len(rest), 2 ** len(axes))
        return t, perm

    def _merge(self, t: np.ndarray, perm: list[int]) -> np.ndarray:
        q = self.num_qubits
        t = t.reshape((t.shape[0],) + (2,) * q)
        inv = np.argsort(perm)
        return t.transpose(inv).reshape(t.shape[0], 2**q)

    def apply(self, op: np.ndarray, labels: Sequence[str], rows=None) -> None:
        """Apply ``op`` (shape ``(d, d)`` or ``(n, d, d)``) to ``labels``.

        ``rows`` restricts the action to a boolean mask or index array.
        """
        op = np.asarray(op, dtype=np.complex128)
        t, perm = self._split(labels)
        if rows is None:
            if op.ndim == 2:
                t = t @ op.T
            else:
                t = np.einsum("nrj,nij->nri", t, op)
        else:
            sel = np.arange(self.rows)[rows]
            sub = t[sel]
            if op.ndim == 2:
                sub = sub @ op.T
            else:
                sub = np.einsum("nrj,nij->nri", sub, op[sel] if op.shape[0] == self.rows else op)
            t = t.copy()
            t[sel] = sub
        self.data = np.ascontiguousarray(self._merge(t, perm))

    def append(self, label: str, states: np.ndarray) -> None:
        """Tensor a fresh qubit (or joint block) in as least significant."""
        self.append_joint([label], states)

    def append_joint(self, labels: Sequence[str], states: np.ndarray) -> None:
        states = np.asarray(states, dtype=np.complex128)
        k = 2 ** len(labels)
        if states.ndim == 1:
            states = np.broadcast_to(states, (self.rows, k))
        if states.shape != (self.rows, k):
            raise QuantumError(f"append shape {states.shape} != {(self.rows, k)}")
        if set(labels) & set(self.labels):
            raise QuantumError(f"labels {labels!r} already present")
        self.data = (self.data[:, :, None] * states[:, None, :]).reshape(self.rows, -1)
        self.labels.extend(labels)

    def relabel(self, old: str, new: str) -> None:
        if new in self.labels:
            raise QuantumError(f"label {new!r} already present")
        self.labels[self._axes([old])[0]] = new

    def reorder(self, labels: Sequence[str]) -> None:
        if sorted(labels) != sorted(self.labels):
            raise QuantumError("reorder must be a permutation of the labels")
        axes = self._axes(labels)
        t = self.data.reshape((self.rows,) + (2,) * self.num_qubits)
        t = t.transpose([0] + [a + 1 for a in axes])
        self.data = np.ascontiguousarray(t.reshape(self.rows, -1))
        self.labels = list(labels)

    def amplitudes(self, basis: np.ndarray, labels: Sequence[str]) -> np.ndarray:
        """Amplitudes ``<b_j|`` on ``labels``: shape (rows, rest, m).

        ``basis`` holds kets as rows, shape ``(m, d)`` or ``(rows, m, d)``.
        """
        basis = np.asarray(basis, dtype=np.complex128)
        t, _ = self._split(labels)
        if basis.ndim == 2:
            return t @ basis.conj().T
        return np.einsum("nrd,nmd->nrm", t, basis.conj())

    def probabilities(self, basis: np.ndarray, labels: Sequence[str]) -> np.ndarray:
        amps = self.amplitudes(basis, labels)
        return np.einsum("nrm,nrm->nm", amps, amps.conj()).real

    def measure(
        self,
        basis: np.ndarray,
        labels: Sequence[str],
        rng: RngStream,
        rows=None,
    ) -> np.ndarray:
        """Rank-one projective measurement on ``labels``; collapses in place.

        Returns the outcome index per row (``-1`` for rows not measured).
        """
        basis = np.asarray(basis, dtype=np.complex128)
        sel = np.arange(self.rows) if rows is None else np.arange(self.rows)[rows]
        out = np.full(self.rows, -1, dtype=np.int64)
        if sel.size == 0:
            return out
        t, perm = self._split(labels)
        sub = t[sel]
        b = basis if basis.ndim == 2 else basis[sel]
        if b.ndim == 2:
            amps = sub @ b.conj().T
        else:
            amps = np.einsum("nrd,nmd->nrm", sub, b.conj())
        probs = np.einsum("nrm,nrm->nm", amps, amps.conj()).real
        idx = sample_categorical(probs, rng.random(sel.size))
        k = np.arange(sel.size)
        cond = amps[k, :, idx]
        cond = cond / np.linalg.norm(cond, axis=1, keepdims=True)
        chosen = b[idx] if b.ndim == 2 else b[k, idx]
        t = t.copy()
        t[sel] = cond[:, :, None] * chosen[:, None, :]
        self.data = np.ascontiguousarray(self._merge(t, perm))
        out[sel] = idx
        return out

    def discard(self, label: str, rng: RngStream) -> np.ndarray:
        """Destroy a qubit.

        The qubit is measured in the computational basis and its axis is
        removed. For a qubit in a product state with the rest this leaves
        the remaining rows exactly unchanged (up to phase); otherwise it is
        a faithful unravelling of the partial trace.
        """
        outcome = self.measure(np.eye(2), [label], rng)
        t, _ = self._split([label])
        k = np.arange(self.rows)
        self.data = np.ascontiguousarray(t[k, :, outcome])
        self.labels.remove(label)
        return outcome

    def reduced(self, labels: Sequence[str]) -> np.ndarray:
        """Reduced density matrices on ``labels``: shape (rows, d, d)."""
        t, _ = self._split(labels)
        return np.einsum("nri,nrj->nij", t, t.conj())

    def row_state(self, i: int) -> StateVector:
        return StateVector(self.data[i])
