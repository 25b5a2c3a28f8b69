"""Pure numpy implementations of the hot Monte Carlo kernels.

Semantics are shared with the compiled module ``_ckernels``; the test suite
runs both against each other.
"""

from __future__ import annotations

import numpy as np

_S = 1.0 / np.sqrt(2.0)


def sample_categorical(probs, uniforms):
    """Inverse-CDF sampling, one draw per row.

    Picks the first index whose cumulative weight exceeds ``u * total``.
    Round-off can never select a zero-weight outcome.
    """
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    u = np.ascontiguousarray(uniforms, dtype=np.float64)
    n, m = probs.shape
    cdf = np.cumsum(probs, axis=1)
    target = u * cdf[:, -1]
    idx = (cdf <= target[:, None]).sum(axis=1)
    np.minimum(idx, m - 1, out=idx)
    rows = np.arange(n)
    bad = np.nonzero(probs[rows, idx] <= 0.0)[0]
    for r in bad:
        j = idx[r]
        while j > 0 and probs[r, j] <= 0.0:
            j -= 1
        idx[r] = j
    return idx.astype(np.int64)


def unlock_bell_probs(unitary, states):
    """Bell-outcome probabilities on qubits (A, B) after ``U`` on (K, A, B).

    Columns are ordered ``(+, -, B+, B-)``; the password qubit K is
    marginalised.
    """
    u = np.asarray(unitary, dtype=np.complex128)
    psi = np.asarray(states, dtype=np.complex128)
    phi = (psi @ u.T).reshape(-1, 2, 4)
    a00, a01, a10, a11 = phi[..., 0], phi[..., 1], phi[..., 2], phi[..., 3]
    amps = np.stack(
        [(a00 + a11) * _S, (a00 - a11) * _S, (a01 + a10) * _S, (a01 - a10) * _S], axis=-1
    )
    return (amps.real**2 + amps.imag**2).sum(axis=1)


def qubit_probs(states, bases):
    """Single-qubit outcome probabilities; ``bases[i, j]`` is the j-th ket."""
    psi = np.asarray(states, dtype=np.complex128)
    b = np.asarray(bases, dtype=np.complex128)
    amps = np.einsum("nmd,nd->nm", b.conj(), psi)
    return amps.real**2 + amps.imag**2
