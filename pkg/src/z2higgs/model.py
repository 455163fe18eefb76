"""Hamiltonian assembly, Gauss sectors and the exact evolution oracle."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, expm_multiply

from .lattice import LatticeError, LatticeGraph, gauge_generator, gauge_masks
from .pauli import PauliString
from .statevector import DEFAULT_QUBIT_CAP, StateVector, as_amplitudes, check_capacity

DENSE_LIMIT = 4096


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """``H = -m sum Z_n - g sum Z_e - lam sum X_u X_e X_v``."""

    lattice: LatticeGraph
    m: float
    g: float
    lam: float
    terms: tuple[tuple[float, PauliString], ...]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_qubits(self) -> int:
        return self.lattice.n_qubits

    def to_json(self) -> str:
        rows = [{"coeff": c, "pauli": p.to_label()} for c, p in self.terms]
        return json.dumps(rows, sort_keys=True)

    def sector_matrix(self, basis: np.ndarray) -> sp.csr_matrix:
        """Restriction of H to the span of the sorted basis indices."""
        basis = np.asarray(basis, dtype=np.int64)
        dim = basis.shape[0]
        diag = np.zeros(dim)
        rows, cols, vals = [], [], []
        col = np.arange(dim)
        for c, p in self.terms:
            f = c * p._column_factors(basis)
            if p.x == 0:
                diag += f.real
                continue
            img = basis ^ p.x
            pos = np.searchsorted(basis, img)
            pos = np.minimum(pos, dim - 1)
            if not np.array_equal(basis[pos], img):
                raise ValueError("basis is not closed under the Hamiltonian")
            rows.append(pos)
            cols.append(col)
            vals.append(f)
        rows.append(col)
        cols.append(col)
        vals.append(diag.astype(complex))
        mat = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
        )
        if not np.any(np.concatenate(vals).imag):
            mat = mat.real.tocsr()
        return mat

    def to_sparse(self) -> sp.csr_matrix:
        check_capacity(self.n_qubits)
        return self.sector_matrix(np.arange(1 << self.n_qubits))

    def energy(self, state) -> float:
        psi = as_amplitudes(state)
        total = 0.0
        for c, p in self.terms:
            total += c * p.expectation(psi).real
        return float(total)


def build_hamiltonian(lat: LatticeGraph, m: float, g: float, lam: float) -> Hamiltonian:
    for name, v in (("m", m), ("g", g), ("lam", lam)):
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite")
    terms: list[tuple[float, PauliString]] = []
    for n in lat.nodes:
        terms.append((-float(m), PauliString.single("Z", lat.qubit_of_node(n))))
    for e in range(lat.n_edges):
        terms.append((-float(g), PauliString.single("Z", lat.qubit_of_edge(e))))
    for e, (u, v) in enumerate(lat.edges):
        xxx = {lat.qubit_of_node(u): "X", lat.qubit_of_edge(e): "X", lat.qubit_of_node(v): "X"}
        terms.append((-float(lam), PauliString.from_letters(xxx)))
    return Hamiltonian(lat, float(m), float(g), float(lam), tuple(terms))


def expectation(state, obs: PauliString) -> float:
    psi = as_amplitudes(state)
    dim = psi.shape[0]
    if dim & (dim - 1) or obs.max_qubit >= dim.bit_length() - 1:
        raise ValueError("observable acts outside the register")
    val = obs.expectation(psi)
    if obs.is_hermitian and abs(val.imag) > 1e-12:
        raise ValueError("non-real expectation value of a Hermitian string")
    return float(val.real)


# Gauss sectors


def syndromes(lat: LatticeGraph, idx: np.ndarray) -> np.ndarray:
    """Bit ``n`` of the result is set where ``G_n = -1`` on that basis index."""
    idx = np.asarray(idx, dtype=np.int64)
    out = np.zeros(idx.shape, dtype=np.int64)
    for n, mask in enumerate(gauge_masks(lat)):
        out |= (np.bitwise_count(idx & mask).astype(np.int64) & 1) << n
    return out


def physical_basis(lat: LatticeGraph) -> np.ndarray:
    """Sorted indices of all Gauss-law-satisfying basis states (2**N_e of them)."""
    check_capacity(lat.n_edges, 62, "edge register")
    subsets = np.arange(1 << lat.n_edges, dtype=np.int64)
    idx = subsets << lat.n_nodes
    for n in lat.nodes:
        inc = sum(1 << e for e in lat.incident_edges(n))
        idx |= (np.bitwise_count(subsets & inc).astype(np.int64) & 1) << lat.qubit_of_node(n)
    return np.sort(idx)


def sector_basis(lat: LatticeGraph, syndrome: int) -> np.ndarray:
    rep = 0
    for n in lat.nodes:
        if (syndrome >> n) & 1:
            rep |= 1 << lat.qubit_of_node(n)
    return np.sort(physical_basis(lat) ^ rep)


def _sector_eig(H: Hamiltonian, syndrome: int, basis: np.ndarray):
    key = ("eig", syndrome)
    if key not in H._cache:
        mat = H.sector_matrix(basis).toarray()
        H._cache[key] = np.linalg.eigh(mat)
    return H._cache[key]


def _evolve_sector(H: Hamiltonian, syndrome: int, basis: np.ndarray, vec: np.ndarray, times: Sequence[float]):
    """Yield the evolved sector vector for each time, in order."""
    if basis.shape[0] <= DENSE_LIMIT:
        w, V = _sector_eig(H, syndrome, basis)
        if np.iscomplexobj(V):
            c = V.conj().T @ vec
            for t in times:
                yield V @ (np.exp(-1j * w * t) * c)
            return
        # real symmetric case: keep the products real, batch the times
        c = V.T @ vec.real + 1j * (V.T @ vec.imag)
        times = np.asarray(times, dtype=float)
        for lo in range(0, times.shape[0], 128):
            coef = np.exp(-1j * np.outer(times[lo:lo + 128], w)) * c
            block = coef.real @ V.T + 1j * (coef.imag @ V.T)
            yield from block
        return
    key = ("mat", syndrome)
    if key not in H._cache:
        H._cache[key] = H.sector_matrix(basis).tocsc().astype(complex)
    A = H._cache[key]
    cur, t_prev = vec, 0.0
    for t in times:
        if t != t_prev:
            cur = expm_multiply(-1j * (t - t_prev) * A, cur)
        yield cur
        t_prev = t


def exact_evolve_series(state, H: Hamiltonian, times: Sequence[float], tol: float = 1e-10, cap: int | None = None) -> list[StateVector]:
    """``exp(-iHt)|psi>`` for each time, evolving each Gauss sector separately."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    psi = as_amplitudes(state)
    n = psi.shape[0].bit_length() - 1
    if (1 << n) != psi.shape[0] or n != H.n_qubits:
        raise ValueError(f"state has {psi.shape[0]} amplitudes, Hamiltonian needs 2**{H.n_qubits}")
    check_capacity(n, DEFAULT_QUBIT_CAP if cap is None else cap)
    times = [float(t) for t in times]
    if not all(math.isfinite(t) for t in times):
        raise ValueError("times must be finite")
    order = np.argsort(times, kind="stable")
    sorted_times = [times[i] for i in order]
    nz = np.nonzero(psi)[0]
    syn_nz = syndromes(H.lattice, nz)
    outs = [np.zeros_like(psi) for _ in times]
    for s in np.unique(syn_nz):
        basis = sector_basis(H.lattice, int(s))
        vec = psi[basis]
        evolved = _evolve_sector(H, int(s), basis, vec, sorted_times)
        for k, v in zip(order, evolved):
            outs[k][basis] = v
    norm0 = np.linalg.norm(psi)
    result = []
    for out in outs:
        drift = abs(np.linalg.norm(out) - norm0)
        if drift > max(tol, 1e-10):
            raise ConvergenceError(f"norm drift {drift:.3e} exceeds tolerance")
        result.append(StateVector(out, n, cap=n, check_norm=False))
    return result


def exact_diagonal_series(state, H: Hamiltonian, times: Sequence[float], observables: Sequence[PauliString], cap: int | None = None) -> np.ndarray:
    """``<O(t)>`` for diagonal Pauli strings, shape ``(len(times), len(observables))``.

    Full states are never assembled, so long time grids stay cheap.
    """
    psi = as_amplitudes(state)
    n = psi.shape[0].bit_length() - 1
    if n != H.n_qubits:
        raise ValueError("state and Hamiltonian registers differ")
    check_capacity(n, DEFAULT_QUBIT_CAP if cap is None else cap)
    times = [float(t) for t in times]
    out = np.zeros((len(times), len(observables)))
    nz = np.nonzero(psi)[0]
    for s in np.unique(syndromes(H.lattice, nz)):
        basis = sector_basis(H.lattice, int(s))
        diag = np.stack([o.diagonal_values(basis) for o in observables], axis=1)
        for k, v in enumerate(_evolve_sector(H, int(s), basis, psi[basis], times)):
            out[k] += (np.abs(v) ** 2) @ diag
    return out


def exact_evolve(state, H: Hamiltonian, t: float, tol: float = 1e-10, cap: int | None = None) -> StateVector:
    return exact_evolve_series(state, H, [t], tol=tol, cap=cap)[0]


@dataclass(frozen=True)
class GapResult:
    gap: float
    multiplicity: int
    e0: float
    e1: float


def physical_spectrum(H: Hamiltonian, k: int = 6) -> np.ndarray:
    basis = physical_basis(H.lattice)
    mat = H.sector_matrix(basis)
    if basis.shape[0] <= DENSE_LIMIT:
        return np.linalg.eigvalsh(mat.toarray())[:k]
    vals = eigsh(mat, k=min(k, basis.shape[0] - 2), which="SA", return_eigenvectors=False, tol=1e-12)
    return np.sort(vals)


def gap_physical_sector(H: Hamiltonian, details: bool = False):
    """``E_1 - E_0`` inside the physical sector.

    A degenerate ground state gives gap 0; ``details=True`` returns the
    multiplicity alongside.
    """
    vals = physical_spectrum(H, k=8)
    e0 = float(vals[0])
    scale = max(1.0, abs(e0))
    mult = int(np.sum(np.abs(vals - e0) <= 1e-11 * scale))
    gap = 0.0 if mult > 1 else float(vals[1] - vals[0])
    if details:
        return GapResult(gap, mult, e0, float(vals[1]))
    return gap


# basis configurations


@dataclass(frozen=True, eq=False)
class BasisConfig:
    """Computational basis state; bit ``q`` is qubit ``q`` (0 means Z = +1)."""

    lattice: LatticeGraph
    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) != self.lattice.n_qubits:
            raise ValueError("bitstring length differs from the qubit count")

    @property
    def index(self) -> int:
        return sum(b << q for q, b in enumerate(self.bits))

    @property
    def is_physical(self) -> bool:
        return int(syndromes(self.lattice, np.array([self.index]))[0]) == 0

    @property
    def charges(self) -> list[int]:
        return [n for n in self.lattice.nodes if self.bits[self.lattice.qubit_of_node(n)]]

    def to_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    def to_state(self, cap: int | None = None) -> StateVector:
        return StateVector.basis(self.lattice.n_qubits, self.index, cap=cap)

    def __eq__(self, other) -> bool:
        return isinstance(other, BasisConfig) and self.bits == other.bits


def prepare_string_state(lat: LatticeGraph, paths) -> BasisConfig:
    """Electric strings along node paths, with matter charges where an odd number of strings end.

    ``paths`` is a single list of nodes or a list of such lists. Paths must be
    simple, connected and mutually edge-disjoint.
    """
    if len(paths) and not isinstance(paths[0], (list, tuple)):
        paths = [paths]
    bits = [0] * lat.n_qubits
    used: set[int] = set()
    for path in paths:
        path = [int(p) for p in path]
        if len(path) == 0:
            continue
        for p in path:
            lat.qubit_of_node(p)
        if len(set(path)) != len(path):
            raise LatticeError(f"path {path} is self-intersecting")
        if len(path) == 1:
            raise LatticeError(f"path {path} has no links")
        for a, b in zip(path, path[1:]):
            try:
                e = lat.edge_index(a, b)
            except LatticeError as exc:
                raise LatticeError(f"path {path} is disconnected between {a} and {b}") from exc
            if e in used:
                raise LatticeError(f"link ({a}, {b}) is used by two strings")
            used.add(e)
            bits[lat.qubit_of_edge(e)] = 1
    for n in lat.nodes:
        parity = sum(bits[lat.qubit_of_edge(e)] for e in lat.incident_edges(n)) & 1
        bits[lat.qubit_of_node(n)] = parity
    return BasisConfig(lat, tuple(bits))


def gauss_generators(lat: LatticeGraph) -> list[PauliString]:
    return [gauge_generator(lat, n) for n in lat.nodes]
