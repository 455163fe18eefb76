import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from z2higgs.analytics import glassy_amplitude, m0_electric_field, m0_gap
from z2higgs.lattice import LatticeError, build_chain, build_flake
from z2higgs.model import (
    BasisConfig,
    ConvergenceError,
    build_hamiltonian,
    exact_diagonal_series,
    exact_evolve,
    exact_evolve_series,
    expectation,
    gap_physical_sector,
    gauss_generators,
    physical_basis,
    prepare_string_state,
    syndromes,
)
from z2higgs.pauli import PauliString
from z2higgs.statevector import CapacityError, StateVector


def dense_h(lat, m, g, lam):
    # independent assembly from Kronecker products
    n = lat.n_qubits
    H = np.zeros((2**n, 2**n), dtype=complex)
    for c, P in build_hamiltonian(lat, m, g, lam).terms:
        H += c * P.to_matrix(n)
    return H


def test_term_counts(flake0):
    H = build_hamiltonian(flake0, 1.0, 2.0, 3.0)
    assert len(H.terms) == 18
    coeffs = sorted({c for c, _ in H.terms})
    assert coeffs == [-3.0, -2.0, -1.0]


def test_term_signs_and_shapes(flake0):
    H = build_hamiltonian(flake0, 0.7, 0.2, 1.3)
    for c, P in H.terms:
        if P.is_diagonal:
            assert P.weight == 1 and c in (-0.7, -0.2)
        else:
            assert set(P.letters.values()) == {"X"} and P.weight == 3 and c == -1.3


def test_lambda_zero_is_diagonal(flake0):
    H = build_hamiltonian(flake0, 1.0, 0.5, 0.0)
    assert all(P.is_diagonal for c, P in H.terms if c != 0)


def test_generators_commute_with_terms(flake0):
    H = build_hamiltonian(flake0, 1.0, 1.0, 1.0)
    for G in gauss_generators(flake0):
        assert all(G.commutes(P) for _, P in H.terms)


def test_json_dump(flake0):
    rows = json.loads(build_hamiltonian(flake0, 1, 2, 3).to_json())
    assert len(rows) == 18
    assert {"coeff", "pauli"} <= set(rows[0])
    assert any(r["pauli"].count("X") == 3 for r in rows)


def test_expectation_basics():
    vac = StateVector.basis(5)
    assert expectation(vac, PauliString.single("Z", 3)) == 1.0
    assert expectation(vac, PauliString.single("X", 3)) == 0.0
    with pytest.raises(ValueError):
        expectation(vac, PauliString.single("Z", 7))


def test_physical_basis_size_and_gauss(flake0):
    basis = physical_basis(flake0)
    assert basis.shape[0] == 2**flake0.n_edges
    assert np.all(syndromes(flake0, basis) == 0)
    # brute force over the whole register
    allidx = np.arange(2**flake0.n_qubits)
    assert np.array_equal(np.sort(allidx[syndromes(flake0, allidx) == 0]), basis)


def test_exact_evolve_matches_dense_expm():
    lat = build_chain(4)
    H = build_hamiltonian(lat, 0.7, 0.4, 1.1)
    psi = prepare_string_state(lat, [1, 2, 3]).to_state()
    ref = expm(-1j * 1.7 * dense_h(lat, 0.7, 0.4, 1.1)) @ psi.amplitudes
    out = exact_evolve(psi, H, 1.7)
    assert np.allclose(out.amplitudes, ref, atol=1e-9)


def test_exact_evolve_superposition_across_sectors():
    lat = build_chain(3)
    H = build_hamiltonian(lat, 0.3, 0.9, 1.0)
    rng = np.random.default_rng(4)
    v = rng.normal(size=2**lat.n_qubits) + 1j * rng.normal(size=2**lat.n_qubits)
    v /= np.linalg.norm(v)
    ref = expm(-1j * 0.8 * dense_h(lat, 0.3, 0.9, 1.0)) @ v
    assert np.allclose(exact_evolve(StateVector(v), H, 0.8).amplitudes, ref, atol=1e-9)


def test_t_zero_unchanged(flake0):
    psi = prepare_string_state(flake0, [0, 1]).to_state()
    out = exact_evolve(psi, build_hamiltonian(flake0, 1, 1, 1), 0.0)
    assert np.allclose(out.amplitudes, psi.amplitudes)


def test_lambda_zero_occupations_constant(flake0):
    H = build_hamiltonian(flake0, 1.0, 0.5, 0.0)
    psi = prepare_string_state(flake0, [0, 1, 3]).to_state()
    zs = [PauliString.single("Z", q) for q in range(flake0.n_qubits)]
    series = exact_diagonal_series(psi, H, [0.0, 0.5, 3.0], zs)
    assert np.allclose(series, series[0])


def test_m0_string_follows_glassy_amplitude(flake0):
    # <tau^z_n(t)> = a(t)^{d_n} <tau^z_n(0)>
    H = build_hamiltonian(flake0, 0.0, 0.6, 1.0)
    init = prepare_string_state(flake0, [0, 1])
    times = np.linspace(0, 5, 11)
    zs = [PauliString.single("Z", flake0.qubit_of_node(n)) for n in flake0.nodes]
    series = exact_diagonal_series(init.to_state(), H, times, zs)
    for k, t in enumerate(times):
        a = glassy_amplitude(0.6, 1.0, t)
        z0 = [1 - 2 * init.bits[n] for n in flake0.nodes]
        expect = [a ** flake0.degree(n) * z0[n] for n in flake0.nodes]
        assert np.allclose(series[k], expect, atol=1e-8)


def test_m0_link_field_follows_glassy_amplitude(flake0):
    # <sigma^z(t)> = a(t) <sigma^z(0)>
    H = build_hamiltonian(flake0, 0.0, 0.4, 1.0)
    init = prepare_string_state(flake0, [0, 1])
    e = flake0.edge_index(0, 1)
    times = [0.3, 1.1, 2.5]
    out = exact_evolve_series(init.to_state(), H, times)
    for t, psi in zip(times, out):
        val = expectation(psi, PauliString.single("Z", flake0.qubit_of_edge(e)))
        assert val == pytest.approx(-glassy_amplitude(0.4, 1.0, t), abs=1e-9)


def test_norm_and_energy_conservation(flake0):
    H = build_hamiltonian(flake0, 1.3, 0.7, 1.0)
    psi = prepare_string_state(flake0, [0, 1, 3]).to_state()
    e0 = H.energy(psi)
    for t in (1.0, 4.0, 10.0):
        out = exact_evolve(psi, H, t)
        assert abs(out.norm() - 1) < 1e-10
        assert H.energy(out) == pytest.approx(e0, abs=1e-8)


def test_capacity_error():
    lat = build_flake(1)
    with pytest.raises(CapacityError):
        StateVector.basis(lat.n_qubits, cap=22)


def test_convergence_error_type():
    assert issubclass(ConvergenceError, RuntimeError)


def test_gap_substitutions():
    assert m0_gap(3, 4) == 10
    assert m0_gap(1, 0) == 2


def test_gap_small_lambda_limit(flake0):
    gap = gap_physical_sector(build_hamiltonian(flake0, 0.0, 1.0, 1e-4))
    assert gap == pytest.approx(2.0, abs=1e-6)


def test_gap_degenerate_reported():
    lat = build_flake(0)
    res = gap_physical_sector(build_hamiltonian(lat, 0.0, 0.0, 0.0), details=True)
    assert res.gap == 0.0 and res.multiplicity > 1


@pytest.mark.parametrize("g,lam", [(0.5, 1.0), (1.0, 1.0), (2.0, 0.3)])
def test_m0_ground_state_field(flake0, g, lam):
    # exact ground state vs the product ansatz
    H = build_hamiltonian(flake0, 0.0, g, lam)
    basis = physical_basis(flake0)
    w, v = np.linalg.eigh(H.sector_matrix(basis).toarray())
    psi = np.zeros(2**flake0.n_qubits, dtype=complex)
    psi[basis] = v[:, 0]
    z = expectation(psi, PauliString.single("Z", flake0.qubit_of_edge(0)))
    assert z == pytest.approx(m0_electric_field(g, lam), abs=1e-9)


def test_m0_field_crossover(flake0):
    # the field reaches 0.5 at g = lam / sqrt(3); at g = lam it is 1/sqrt(2)
    assert m0_electric_field(1 / math.sqrt(3), 1.0) == pytest.approx(0.5)
    assert m0_electric_field(1.0, 1.0) == pytest.approx(1 / math.sqrt(2))


def test_string_states(flake0):
    vac = prepare_string_state(flake0, [])
    assert vac.index == 0 and vac.is_physical
    one = prepare_string_state(flake0, [0, 1])
    assert sum(one.bits) == 3 and one.is_physical and one.charges == [0, 1]
    lat = build_flake(1)
    centre = next(n for n in lat.nodes if lat.degree(n) == 3)
    star = prepare_string_state(lat, [[centre, b] for b in lat.neighbors(centre)])
    assert len(star.charges) == 4 and star.is_physical


def test_string_state_errors(flake0):
    with pytest.raises(LatticeError):
        prepare_string_state(flake0, [0, 5])  # not adjacent
    with pytest.raises(LatticeError):
        prepare_string_state(flake0, [0, 1, 0])
    with pytest.raises(LatticeError):
        prepare_string_state(flake0, [[0, 1], [1, 0]])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 29), max_size=12))
def test_interaction_flips_stay_physical(edges):
    lat = build_flake(1)
    bits = np.array(prepare_string_state(lat, []).bits)
    for e in edges:
        u, v = lat.edges[e]
        for q in (lat.qubit_of_node(u), lat.qubit_of_edge(e), lat.qubit_of_node(v)):
            bits[q] ^= 1
        assert BasisConfig(lat, tuple(int(b) for b in bits)).is_physical
