"""Closed-form security quantities and their independent matrix oracles.

Each closed form is paired with a ``*_direct`` function that evaluates the
defining trace expression with explicit matrices built from the lock
unitary, so the two can be checked against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qpass.adversary import CardStealPassword, ForgedInput
from qpass.primitives import (
    BELL_VECTORS,
    KET0,
    KET1,
    LockUnitary,
    ProtocolParams,
    alpha_ket,
    build_lock_unitary,
    c_ket,
    fixed_row,
    gram_schmidt_completion,
    make_R,
    u_relation_residuals,
    xi_ket,
)
from qpass.qcore import DensityMatrix, partial_trace

PLUS = BELL_VECTORS[0]
P_PLUS = np.outer(PLUS, PLUS.conj())

# tolerances used by verify-bounds; each is stated next to its check
TOL_ALGEBRAIC = 1e-10
TOL_GRID = 1e-6


def _lock(params: ProtocolParams, lock: LockUnitary | None) -> LockUnitary:
    return lock if lock is not None else build_lock_unitary(params)


# --------------------------------------------------------------------------
# Lock unitary
# --------------------------------------------------------------------------


def lock_residuals(params: ProtocolParams, lock: LockUnitary | None = None) -> dict[str, float]:
    """Largest deviation from each defining property of ``U``.

    Keys: ``unitarity``, ``u_relations``, ``zero_plus`` (``U|0>|+> = |0>|+>``),
    ``alpha_xi`` (``U|alpha>|xi> = |c>|+>``, phase exact) and
    ``identity_sector`` (``U|b>|B+-> = |b>|B+->``).
    """
    lock = _lock(params, lock)
    u = lock.matrix
    ident = 0.0
    for b in (KET0, KET1):
        for bell in BELL_VECTORS[2:]:
            v = np.kron(b, bell)
            ident = max(ident, float(np.abs(u @ v - v).max()))
    zp = np.kron(KET0, PLUS)
    return {
        "unitarity": float(np.abs(u @ u.conj().T - np.eye(8)).max()),
        "u_relations": float(u_relation_residuals(lock).max()),
        "zero_plus": float(np.abs(u @ zp - zp).max()),
        "alpha_xi": float(np.abs(u @ np.kron(alpha_ket(params), xi_ket(params)) - np.kron(c_ket(params), PLUS)).max()),
        "identity_sector": ident,
    }


def alternate_lock(params: ProtocolParams, mix: np.ndarray) -> LockUnitary:
    """Lock built from the default completion rotated by a 2x2 unitary ``mix``."""
    comp = gram_schmidt_completion(fixed_row(params))[1:]
    return build_lock_unitary(params, completion=np.asarray(mix) @ comp)


def random_unitary2(rng) -> np.ndarray:
    z = rng.generator.normal(size=(2, 2)) + 1j * rng.generator.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


# --------------------------------------------------------------------------
# No-card forgery
# --------------------------------------------------------------------------


def ps_closed_form(forged: ForgedInput, params: ProtocolParams) -> float:
    """Per-block pass probability of a product forgery, four-term form."""
    p00, p01, p10, p11 = forged.psi
    a, b, eta, d, delta = params.alpha, params.beta, params.eta, params.d, params.delta
    t3 = (b / d) * np.exp(-1j * delta) * p10 - 1j * (a * eta / d) * p00
    t4 = (b / d) * np.exp(1j * delta) * p11 + 1j * (a * eta / d) * p01
    return float(0.25 * (abs(p00) ** 2 + abs(p01) ** 2 + abs(t3) ** 2 + abs(t4) ** 2))


def ps_direct(forged: ForgedInput, params: ProtocolParams, lock: LockUnitary | None = None) -> float:
    """``<+| Tr_K[U (|Psi><Psi| x I/2) U^dag] |+>`` by explicit matrix algebra."""
    u = _lock(params, lock).matrix
    rho_in = np.kron(np.outer(forged.psi, forged.psi.conj()), np.eye(2) / 2.0)
    rho_out = DensityMatrix(u @ rho_in @ u.conj().T)
    rho_ab = partial_trace(rho_out, keep=[1, 2])
    return float(np.real(PLUS.conj() @ rho_ab.matrix @ PLUS))


def ps_operator(params: ProtocolParams, lock: LockUnitary | None = None) -> np.ndarray:
    """4x4 operator ``O`` with ``p_s = <Psi|O|Psi>``."""
    u = _lock(params, lock).matrix
    # O = 1/2 Tr_B[U^dag (I_K x P_+) U] on (K, A)
    m = u.conj().T @ np.kron(np.eye(2), P_PLUS) @ u
    m = m.reshape(2, 2, 2, 2, 2, 2)
    return 0.5 * np.einsum("kabjcb->kajc", m).reshape(4, 4)


def ps_supremum(params: ProtocolParams, lock: LockUnitary | None = None) -> tuple[float, np.ndarray]:
    """Largest achievable ``p_s`` and a maximising forgery (top eigenpair)."""
    w, v = np.linalg.eigh(ps_operator(params, lock))
    return float(w[-1]), v[:, -1]


def ps_supremum_closed_form(params: ProtocolParams) -> float:
    """``(1 + alpha eta / d) / 4``, the top eigenvalue of :func:`ps_operator`."""
    return 0.25 * (1.0 + params.alpha * params.eta / params.d)


PS_UPPER_BOUND = 0.5


def no_card_detection_bound(n: int) -> float:
    """Lower bound ``1 - (1/2)^N`` on no-card detection."""
    return total_detection(PS_UPPER_BOUND, n)


# --------------------------------------------------------------------------
# Stolen card
# --------------------------------------------------------------------------


def delta_e_closed_form(pw: CardStealPassword, params: ProtocolParams) -> float:
    a, b, xi = params.alpha, params.beta, params.xi
    pre = 0.5 * (1.0 - xi * xi) / (1.0 - a * a * xi * xi)
    return float(pre * (1.0 + a * a - 2.0 * a * a * pw.r - 2.0 * a * b * pw.x))


def _key_states(params: ProtocolParams) -> tuple[np.ndarray, np.ndarray]:
    """``|+>`` and ``|xi> = (R x I)|+>`` on (card, store)."""
    return PLUS, np.kron(make_R(params), np.eye(2)) @ PLUS


def delta_e_direct(pw: CardStealPassword, params: ProtocolParams, lock: LockUnitary | None = None) -> float:
    """``(p_E0 + p_E1) / 2`` with each term an explicit trace."""
    u = _lock(params, lock).matrix
    reject = np.eye(8) - np.kron(np.eye(2), P_PLUS)
    out = []
    for key in _key_states(params):
        rho = np.kron(pw.rho, np.outer(key, key.conj()))
        out.append(np.trace(u @ rho @ u.conj().T @ reject).real)
    return float(0.5 * out[0] + 0.5 * out[1])


def detection_operator(params: ProtocolParams, lock: LockUnitary | None = None) -> np.ndarray:
    """2x2 operator ``M`` with ``Delta_E = Tr[rho_E M]``."""
    u = _lock(params, lock).matrix
    reject = np.eye(8) - np.kron(np.eye(2), P_PLUS)
    full = u.conj().T @ reject @ u
    m = np.zeros((2, 2), dtype=np.complex128)
    for key in _key_states(params):
        kb = np.kron(np.eye(2), key[:, None])  # 8x2 embedding |k> -> |k>|key>
        m += 0.5 * kb.conj().T @ full @ kb
    return m


def pn_closed_form(params: ProtocolParams) -> float:
    a, xi = params.alpha, params.xi
    # one rounding step at the final division, so exact at alpha = xi = 1/2
    return float((1.0 - xi * xi) * (1.0 - a) / (2.0 * (1.0 - a * a * xi * xi)))


def pn_minimize_direct(
    params: ProtocolParams,
    lock: LockUnitary | None = None,
    grid: int = 401,
    zoom: int = 30,
) -> tuple[float, CardStealPassword]:
    """Grid search of the detection probability over pure ``rho_E``.

    ``rho_E`` runs over the Bloch sphere surface ``x^2 + y^2 = r(1 - r)``
    parametrised by ``(r, phi)``. A coarse grid is refined by repeated
    zooming around the current best point.
    """
    m = detection_operator(params, lock)

    def delta(r, phi):
        s = np.sqrt(np.clip(r * (1.0 - r), 0.0, None))
        x, y = s * np.cos(phi), s * np.sin(phi)
        # Tr[rho M] with rho01 = x + iy
        return (r * m[0, 0] + (1.0 - r) * m[1, 1] + 2.0 * np.real((x - 1j * y) * m[0, 1])).real

    rs = np.linspace(0.0, 1.0, grid)
    ps = np.linspace(-math.pi, math.pi, grid)
    R, P = np.meshgrid(rs, ps, indexing="ij")
    val = delta(R, P)
    i, j = np.unravel_index(np.argmin(val), val.shape)
    r0, p0 = rs[i], ps[j]
    hr, hp = 1.0 / (grid - 1), 2 * math.pi / (grid - 1)
    for _ in range(zoom):
        rr = np.clip(r0 + hr * np.linspace(-2, 2, 21), 0.0, 1.0)
        pp = p0 + hp * np.linspace(-2, 2, 21)
        R, P = np.meshgrid(rr, pp, indexing="ij")
        val = delta(R, P)
        i, j = np.unravel_index(np.argmin(val), val.shape)
        r0, p0 = rr[i], pp[j]
        hr, hp = hr / 4.0, hp / 4.0
    s = math.sqrt(max(r0 * (1.0 - r0), 0.0))
    best = CardStealPassword(float(r0), s * math.cos(p0), s * math.sin(p0))
    return float(delta(r0, p0)), best


# --------------------------------------------------------------------------
# Composition over blocks
# --------------------------------------------------------------------------


def total_detection(p: float, n: int) -> float:
    """``1 - (1 - p)^N``: detection over ``N`` independent blocks."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    if int(n) != n or n < 1:
        raise ValueError(f"N must be a positive integer, got {n!r}")
    return float(-math.expm1(int(n) * math.log1p(-p))) if p < 1.0 else 1.0


def decoy_session_detection(n_d: int, flag: float = 0.25) -> float:
    """Chance that at least one of ``n_d`` decoys is flagged."""
    return total_detection(flag, n_d)


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundCheckReport:
    """One closed-form / oracle / optimiser comparison."""

    quantity: str
    params: dict
    closed_form: float
    oracle: float
    tolerance: float
    optimizer: float | None = None
    discrepancy: float | None = None
    note: str = ""

    def __post_init__(self):
        if self.discrepancy is None:
            object.__setattr__(self, "discrepancy", abs(self.closed_form - self.oracle))

    @property
    def passed(self) -> bool:
        return bool(self.discrepancy <= self.tolerance)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            **{f"param_{k}": v for k, v in self.params.items()},
            "closed_form": self.closed_form,
            "oracle": self.oracle,
            "optimizer": self.optimizer,
            "discrepancy": self.discrepancy,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "note": self.note,
        }
