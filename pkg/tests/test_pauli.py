import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from z2higgs.pauli import PauliString

N = 4
MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0 + 0j, -1.0]),
}


def dense(letters, n=N, phase=1):
    # little-endian: qubit 0 is the rightmost kron factor
    out = np.eye(1, dtype=complex)
    for q in reversed(range(n)):
        out = np.kron(out, MATS[letters.get(q, "I")])
    return phase * out


words = st.dictionaries(st.integers(0, N - 1), st.sampled_from("XYZ"), max_size=N)


def test_labels():
    assert PauliString.from_label("Z3").letters == {3: "Z"}
    P = PauliString.from_label("-X1 X4 X2")
    assert P.sign == -1 and P.letters == {1: "X", 2: "X", 4: "X"}
    assert PauliString.from_label("I") == PauliString.identity()
    assert P.to_label() == "-X1 X2 X4"
    with pytest.raises(ValueError):
        PauliString.from_label("Q2")
    with pytest.raises(ValueError):
        PauliString.from_label("Z1 X1")


def test_single_products():
    X, Y, Z = (PauliString.single(c, 0) for c in "XYZ")
    assert X * Y == Z.times_i()
    assert Y * X == Z.times_i(3)
    assert Z * X == Y.times_i()
    assert X * X == PauliString.identity()


@settings(max_examples=200, deadline=None)
@given(words, words)
def test_product_matches_dense(a, b):
    A, B = PauliString.from_letters(a), PauliString.from_letters(b)
    assert np.allclose((A * B).to_matrix(N), dense(a) @ dense(b))


@settings(max_examples=200, deadline=None)
@given(words, words)
def test_commutation_matches_dense(a, b):
    A, B = dense(a), dense(b)
    commute = np.allclose(A @ B, B @ A)
    assert PauliString.from_letters(a).commutes(PauliString.from_letters(b)) == commute
    c = PauliString.from_letters(a).commutator(PauliString.from_letters(b))
    assert (c is None) == commute


@settings(max_examples=100, deadline=None)
@given(words, st.sampled_from([1, -1]))
def test_hermitian_involution(a, sign):
    P = PauliString.from_letters(a, sign=sign)
    assert P * P == PauliString.identity()
    assert P.is_hermitian
    assert P.adjoint() == P


@settings(max_examples=100, deadline=None)
@given(words, st.integers(0, 3))
def test_label_round_trip(a, phase):
    P = PauliString.from_letters(a).times_i(phase)
    assert PauliString.from_label(P.to_label()) == P


@settings(max_examples=100, deadline=None)
@given(words, st.integers(0, 2**32 - 1))
def test_apply_and_expectation_match_dense(a, seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=2**N) + 1j * rng.normal(size=2**N)
    psi /= np.linalg.norm(psi)
    P = PauliString.from_letters(a)
    assert np.allclose(P.apply(psi), dense(a) @ psi)
    val = P.expectation(psi)
    assert abs(val.imag) < 1e-12
    assert val.real == pytest.approx(np.vdot(psi, dense(a) @ psi).real, abs=1e-12)


def test_diagonal_values():
    P = PauliString.from_label("-Z0 Z2")
    idx = np.arange(8)
    assert list(P.diagonal_values(idx)) == [-1, 1, -1, 1, 1, -1, 1, -1]
    with pytest.raises(ValueError):
        PauliString.from_label("X0").diagonal_values(idx)


def test_register_check():
    with pytest.raises(ValueError):
        PauliString.single("Z", 5).apply(np.ones(4, dtype=complex) / 2)


def test_properties():
    P = PauliString.from_label("X0 Y3 Z5")
    assert P.weight == 3 and P.support == [0, 3, 5] and P.max_qubit == 5
    assert not P.is_diagonal
    assert PauliString.from_label("Z1 Z2").is_diagonal
    with pytest.raises(ValueError):
        P.times_i().sign
