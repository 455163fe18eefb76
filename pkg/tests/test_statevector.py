import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from z2higgs.statevector import (
    CapacityError,
    StateVector,
    apply_cnot,
    apply_letter,
    apply_rx,
    apply_rz,
    apply_zz_phase,
    check_capacity,
)
from tests.test_pauli import MATS, dense

N = 4


def random_state(seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=2**N) + 1j * rng.normal(size=2**N)
    return psi / np.linalg.norm(psi)


def cnot_dense(c, t):
    U = np.zeros((2**N, 2**N))
    for b in range(2**N):
        U[b ^ (((b >> c) & 1) << t), b] = 1
    return U


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, N - 1), st.floats(-7, 7))
def test_rotations_match_expm(seed, q, theta):
    psi = random_state(seed)
    for kind, letter in (("rz", "Z"), ("rx", "X")):
        ref = expm(-0.5j * theta * dense({q: letter})) @ psi
        out = psi.copy()
        (apply_rz if kind == "rz" else apply_rx)(out, q, theta)
        assert np.allclose(out, ref, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.permutations(range(N)), st.floats(-3, 3))
def test_two_qubit_kernels(seed, perm, theta):
    c, t = perm[0], perm[1]
    psi = random_state(seed)
    out = psi.copy()
    apply_cnot(out, c, t)
    assert np.allclose(out, cnot_dense(c, t) @ psi)
    out = psi.copy()
    apply_zz_phase(out, c, t, theta)
    assert np.allclose(out, expm(-0.5j * theta * dense({c: "Z", t: "Z"})) @ psi)


@pytest.mark.parametrize("letter", "XYZ")
def test_letters(letter):
    psi = random_state(3)
    out = psi.copy()
    apply_letter(out, 2, letter)
    assert np.allclose(out, dense({2: letter}) @ psi)


def test_basis_and_bit_order():
    s = StateVector.basis(3, 0b100)
    assert s.amplitudes[4] == 1 and s.n_qubits == 3
    apply_letter(s.amplitudes, 0, "X")
    assert s.amplitudes[5] == 1


def test_validation():
    with pytest.raises(ValueError):
        StateVector(np.ones(3))
    with pytest.raises(ValueError):
        StateVector(np.ones(4))
    with pytest.raises(CapacityError):
        StateVector.basis(23)
    with pytest.raises(CapacityError):
        check_capacity(30)
    check_capacity(30, cap=30)


def test_fidelity_and_copy():
    a = StateVector(random_state(1))
    b = a.copy()
    b.amplitudes *= np.exp(0.3j)
    assert a.fidelity(b) == pytest.approx(1.0)
    assert np.isclose(a.probabilities().sum(), 1.0)
    assert MATS["I"].shape == (2, 2)
