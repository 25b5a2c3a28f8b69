import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpass.analysis.bounds import lock_residuals
from qpass.primitives import (
    BELL_VECTORS,
    KET0,
    ParameterError,
    ProtocolParams,
    QuantumError,
    alpha_ket,
    apply_lock,
    apply_unlock,
    bell_verify,
    build_lock_unitary,
    c_ket,
    decoy_arrays,
    decoy_bit,
    decoy_class,
    decoy_encode,
    decoy_measure,
    fixed_row,
    gram_schmidt_completion,
    make_alpha_ket,
    make_bell,
    make_R,
    password_kets,
    states_equivalent,
    u_relation_residuals,
    xi_ket,
)
from qpass.qcore import DensityMatrix, RngStream, StateVector, partial_trace, purity

PLUS = BELL_VECTORS[0]


@pytest.mark.parametrize(
    "kw",
    [dict(alpha=0.0), dict(alpha=1.0), dict(alpha=-0.1), dict(delta=0.0), dict(delta=math.pi / 2)],
)
def test_params_reject_out_of_range(kw):
    with pytest.raises(ParameterError):
        ProtocolParams(**kw)


def test_params_derived_quantities(half):
    assert half.xi == pytest.approx(0.5)
    assert half.eta == pytest.approx(math.sqrt(3) / 2)
    assert half.beta == pytest.approx(math.sqrt(3) / 2)
    assert half.d == pytest.approx(math.sqrt(15) / 4)
    with pytest.raises(ParameterError):
        ProtocolParams.from_xi(0.5, 1.0)


def test_bell_states_orthonormal_and_aliases():
    assert np.allclose(BELL_VECTORS @ BELL_VECTORS.conj().T, np.eye(4))
    assert make_bell("−").equiv(make_bell("-"))
    with pytest.raises(QuantumError):
        make_bell("x")


def test_alpha_ket_and_password_kets(half):
    assert make_alpha_ket(half).equiv(StateVector([0.5, math.sqrt(3) / 2]))
    k = password_kets([0, 1, 1, 0], half)
    assert np.allclose(k[0], KET0) and np.allclose(k[1], alpha_ket(half))


def test_R_maps_plus_to_xi(half):
    assert np.allclose(np.kron(make_R(half), np.eye(2)) @ PLUS, xi_ket(half), atol=1e-15)


def test_xi_is_maximally_entangled(half):
    for v in (PLUS, xi_ket(half)):
        assert partial_trace(StateVector(v), [0]).allclose(np.eye(2) / 2, atol=1e-12)
        assert partial_trace(StateVector(v), [1]).allclose(np.eye(2) / 2, atol=1e-12)


def test_lock_unitary_properties_over_grid(param_grid):
    for p in param_grid:
        res = lock_residuals(p)
        assert max(res.values()) <= 1e-12, (p, res)


def test_eq3_holds_with_exact_phase(half):
    lock = build_lock_unitary(half)
    out = lock.matrix @ np.kron(alpha_ket(half), xi_ket(half))
    assert np.abs(out - np.kron(c_ket(half), PLUS)).max() < 1e-15


def test_fixed_row_is_unit(param_grid):
    for p in param_grid:
        assert np.linalg.norm(fixed_row(p)) == pytest.approx(1.0, abs=1e-14)


def test_gram_schmidt_skips_dependent_candidates():
    v = np.array([1.0, 0, 0], dtype=complex)
    m = gram_schmidt_completion(v)
    assert np.allclose(m, np.eye(3))
    v = np.array([0, 0, 1.0], dtype=complex)
    m = gram_schmidt_completion(v)
    assert np.allclose(m @ m.conj().T, np.eye(3), atol=1e-14)


def test_user_completion_and_invariants(half):
    base = build_lock_unitary(half)
    theta = 0.7
    mix = np.array([[math.cos(theta), 1j * math.sin(theta)], [1j * math.sin(theta), math.cos(theta)]])
    other = build_lock_unitary(half, completion=mix @ base.completion)
    assert not np.allclose(other.matrix, base.matrix)
    assert u_relation_residuals(other).max() < 1e-12
    assert max(lock_residuals(half, other).values()) < 1e-12
    with pytest.raises(ParameterError):
        build_lock_unitary(half, completion=np.ones((2, 3)))
    with pytest.raises(ParameterError):
        build_lock_unitary(half, completion=np.ones((3, 3)))


def test_u_accessor_and_json(half):
    lock = build_lock_unitary(half)
    assert lock.u(1, 1) == lock.completion[0, 0]
    js = lock.to_json()
    m = np.array(js["matrix"])
    assert np.allclose(m[..., 0] + 1j * m[..., 1], lock.matrix)


def test_lock_is_cached_and_read_only(half):
    assert build_lock_unitary(half) is build_lock_unitary(ProtocolParams.from_xi(0.5, 0.5))
    with pytest.raises(ValueError):
        build_lock_unitary(half).matrix[0, 0] = 2


def test_apply_unlock_roundtrip(half):
    lock = build_lock_unitary(half)
    g = np.random.default_rng(0)
    z = g.normal(size=8) + 1j * g.normal(size=8)
    s = StateVector(z / np.linalg.norm(z))
    assert apply_lock(lock, apply_unlock(lock, s)).equiv(s)
    rho = apply_unlock(lock, s.to_density())
    assert isinstance(rho, DensityMatrix)
    with pytest.raises(QuantumError):
        apply_unlock(lock, StateVector.basis("00"))
    with pytest.raises(TypeError):
        apply_unlock(lock, np.zeros(8))


def test_honest_password_qubit_stays_pure(param_grid):
    for p in param_grid:
        u = build_lock_unitary(p).matrix
        for v in (np.kron(KET0, PLUS), np.kron(alpha_ket(p), xi_ket(p))):
            assert purity(partial_trace(StateVector(u @ v), [0])) == pytest.approx(1.0, abs=1e-12)


def test_bell_verify_acceptance_probability():
    rng = RngStream(1)
    assert all(bell_verify(StateVector(PLUS), rng.child(i))[0] for i in range(50))
    assert not any(bell_verify(StateVector(BELL_VECTORS[2]), rng.child(i))[0] for i in range(50))
    rho = DensityMatrix(np.eye(4) / 4)
    acc = np.mean([bell_verify(rho, rng.child(100 + i))[0] for i in range(4000)])
    assert abs(acc - 0.25) < 4 * math.sqrt(0.25 * 0.75 / 4000)
    with pytest.raises(QuantumError):
        bell_verify(StateVector.basis("0"), rng)


def test_decoy_encoding():
    assert [decoy_class(s) for s in (2, 3, 4, 5)] == ["Z", "Z", "X", "X"]
    assert [decoy_bit(s) for s in (2, 3, 4, 5)] == [0, 1, 0, 1]
    with pytest.raises(ValueError):
        decoy_class(6)
    rng = RngStream(2)
    for s in (2, 3, 4, 5):
        for i in range(20):
            assert decoy_measure(decoy_encode(s), decoy_class(s), rng.child(10 * s + i)) == decoy_bit(s)


def test_decoy_arrays_consistent():
    kets, bases, expected = decoy_arrays([2, 3, 4, 5, 5])
    for k, b, e in zip(kets, bases, expected):
        assert abs(np.vdot(b[e], k)) == pytest.approx(1.0)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.01, 0.99), x=st.floats(0.01, 0.99))
def test_lock_properties_hold_anywhere(a, x):
    p = ProtocolParams.from_xi(a, x)
    assert max(lock_residuals(p).values()) <= 1e-12


def test_states_equivalent_is_phase_blind():
    a = np.array([[1, 0], [0.6, 0.8]], dtype=complex)
    b = a * np.exp(1j * np.array([[0.3], [2.0]]))
    assert states_equivalent(a, b).all()
    assert not states_equivalent(a, a[::-1]).any()


def test_from_xi_keeps_exact_value():
    p = ProtocolParams.from_xi(0.5, 0.5)
    assert p.xi == 0.5 and p.eta == math.sqrt(0.75)
    assert math.cos(p.delta) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ParameterError):
        ProtocolParams(0.5, 1.0, exact_xi=0.5)
