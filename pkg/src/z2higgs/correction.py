"""Gauss sector correction: syndromes, matching decoder, post-selection and fault propagation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import networkx as nx
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .compiler import Circuit, conjugate
from .lattice import LatticeGraph, gauge_masks
from .pauli import PauliString
from .simulator import ShotTable

EXHAUSTIVE_LIMIT = 16


@dataclass(frozen=True)
class Syndrome:
    defects: frozenset[int]

    @property
    def is_trivial(self) -> bool:
        return not self.defects

    def mask(self) -> int:
        return sum(1 << n for n in self.defects)


@dataclass(frozen=True)
class Correction:
    matter_flips: frozenset[int] = frozenset()
    gauge_flips: frozenset[int] = frozenset()
    exact: bool = True

    @property
    def weight(self) -> int:
        return len(self.matter_flips) + len(self.gauge_flips)

    def qubits(self, lat: LatticeGraph) -> list[int]:
        return sorted([lat.qubit_of_node(n) for n in self.matter_flips] + [lat.qubit_of_edge(e) for e in self.gauge_flips])

    def to_dict(self) -> dict:
        return {"matter_flips": sorted(self.matter_flips), "gauge_flips": sorted(self.gauge_flips), "weight": self.weight, "exact": self.exact}


def _as_bits(bitstring, n: int) -> np.ndarray:
    if isinstance(bitstring, str):
        bits = np.array([c == "1" for c in bitstring], dtype=np.uint8)
    elif hasattr(bitstring, "bits"):
        bits = np.asarray(bitstring.bits, dtype=np.uint8)
    else:
        bits = np.asarray(bitstring, dtype=np.uint8).reshape(-1)
    if bits.shape[0] != n:
        raise ValueError(f"bitstring has length {bits.shape[0]}, lattice has {n} qubits")
    return bits


def _supports(lat: LatticeGraph) -> list[list[int]]:
    return [[q for q in range(lat.n_qubits) if (m >> q) & 1] for m in gauge_masks(lat)]


def compute_syndrome(bitstring, lat: LatticeGraph) -> Syndrome:
    """Nodes whose Gauss product over the measured bits is odd."""
    bits = _as_bits(bitstring, lat.n_qubits)
    defects = frozenset(n for n, sup in enumerate(_supports(lat)) if int(bits[sup].sum()) & 1)
    return Syndrome(defects)


def syndrome_matrix(bits: np.ndarray, lat: LatticeGraph) -> np.ndarray:
    """Boolean ``(shots, nodes)`` defect matrix."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 2 or bits.shape[1] != lat.n_qubits:
        raise ValueError("bit matrix does not match the lattice")
    return np.stack([(bits[:, sup].sum(axis=1) & 1).astype(bool) for sup in _supports(lat)], axis=1)


class _Decoder:
    """Boundary-augmented minimum-weight matching on one lattice, memoised by syndrome."""

    def __init__(self, lat: LatticeGraph):
        self.lat = lat
        self.dist = np.stack([lat.distances_from(n) for n in lat.nodes])
        self.memo: dict[int, Correction] = {}

    def decode(self, defects: frozenset[int]) -> Correction:
        key = sum(1 << n for n in defects)
        if key not in self.memo:
            self.memo[key] = self._solve(sorted(defects))
        return self.memo[key]

    def _pair_cost(self, a: int, b: int) -> tuple[int, int]:
        d = int(self.dist[a, b])
        # second entry breaks ties toward matter flips
        return (d, d) if d > 0 else (10**9, 0)

    def _solve(self, D: list[int]) -> Correction:
        if not D:
            return Correction()
        if len(D) <= EXHAUSTIVE_LIMIT:
            pairs, singles = self._exhaustive(D)
            exact = True
        else:
            pairs, singles = self._blossom(D)
            exact = True
        gauge: set[int] = set()
        for a, b in pairs:
            path = self.lat.shortest_path(a, b)
            for x, y in zip(path, path[1:]):
                gauge ^= {self.lat.edge_index(x, y)}
        return Correction(frozenset(singles), frozenset(gauge), exact)

    def _exhaustive(self, D: list[int]):
        k = len(D)

        @lru_cache(maxsize=None)
        def best(mask: int):
            if mask == 0:
                return (0, 0), ()
            i = (mask & -mask).bit_length() - 1
            rest = mask & ~(1 << i)
            sub, plan = best(rest)
            cand = ((sub[0] + 1, sub[1]), plan + ((i,),))
            j_mask = rest
            while j_mask:
                j = (j_mask & -j_mask).bit_length() - 1
                j_mask &= j_mask - 1
                c = self._pair_cost(D[i], D[j])
                sub, plan = best(rest & ~(1 << j))
                tot = (sub[0] + c[0], sub[1] + c[1])
                if tot < cand[0]:
                    cand = (tot, plan + ((i, j),))
            return cand

        _, plan = best((1 << k) - 1)
        pairs = [(D[p[0]], D[p[1]]) for p in plan if len(p) == 2]
        singles = [D[p[0]] for p in plan if len(p) == 1]
        return pairs, singles

    def _blossom(self, D: list[int]):
        G = nx.Graph()
        big = 4 * (len(D) + 1) * (int(self.dist.max()) + 2)
        for a, b in itertools.combinations(D, 2):
            d = int(self.dist[a, b])
            # weight (d, d) encoded with the tie-break as a small secondary term
            G.add_edge(("d", a), ("d", b), weight=big * big - (d * big + d))
        for a in D:
            G.add_edge(("d", a), ("b", a), weight=big * big - big)
        for a, b in itertools.combinations(D, 2):
            G.add_edge(("b", a), ("b", b), weight=big * big)
        M = nx.max_weight_matching(G, maxcardinality=True)
        pairs, singles = [], []
        for x, y in M:
            if x[0] == "d" and y[0] == "d":
                pairs.append((x[1], y[1]))
            elif x[0] != y[0]:
                singles.append(x[1] if x[0] == "d" else y[1])
        return pairs, singles


_DECODERS: dict[int, _Decoder] = {}


def _decoder(lat: LatticeGraph) -> _Decoder:
    key = id(lat)
    dec = _DECODERS.get(key)
    if dec is None or dec.lat is not lat:
        dec = _Decoder(lat)
        _DECODERS[key] = dec
    return dec


def decode(syndrome: Syndrome, lat: LatticeGraph) -> Correction:
    """Minimum-weight correction: matter flips cost 1, gauge paths cost their length.

    Ties between a length-2 path and two matter flips go to the matter flips.
    """
    for n in syndrome.defects:
        lat.qubit_of_node(n)
    return _decoder(lat).decode(frozenset(syndrome.defects))


def apply_correction(bitstring, correction: Correction, lat: LatticeGraph) -> np.ndarray:
    bits = _as_bits(bitstring, lat.n_qubits).copy()
    for q in correction.qubits(lat):
        bits[q] ^= 1
    return bits


def decode_bits(bits: np.ndarray, lat: LatticeGraph) -> tuple[np.ndarray, np.ndarray]:
    """Decode every row; returns corrected bits and per-shot flip counts."""
    bits = np.asarray(bits, dtype=np.uint8)
    syn = syndrome_matrix(bits, lat)
    keys = syn.astype(np.int64) @ (np.int64(1) << np.arange(lat.n_nodes, dtype=np.int64))
    out = bits.copy()
    flips = np.zeros(bits.shape[0], dtype=np.int64)
    dec = _decoder(lat)
    uniq, inverse = np.unique(keys, return_inverse=True)
    for u, key in enumerate(uniq.tolist()):
        if key == 0:
            continue
        corr = dec.decode(frozenset(n for n in lat.nodes if (key >> n) & 1))
        rows = np.nonzero(inverse == u)[0]
        qs = corr.qubits(lat)
        out[np.ix_(rows, qs)] ^= 1
        flips[rows] = corr.weight
    return out, flips


def decode_table(table: ShotTable, lat: LatticeGraph) -> ShotTable:
    """Corrected shot table with the decoder flip counts filled in."""
    bits, flips = decode_bits(table.bits, lat)
    out = table.with_bits(bits, flips)
    out.metadata["decoded"] = True
    return out


def decoder_report(table: ShotTable, lat: LatticeGraph) -> dict:
    syn = syndrome_matrix(table.bits, lat)
    _, flips = decode_bits(table.bits, lat)
    shots = []
    for s in range(table.n_shots):
        defects = [int(n) for n in np.nonzero(syn[s])[0]]
        corr = decode(Syndrome(frozenset(defects)), lat)
        shots.append({"defects": defects, "flips": corr.to_dict(), "weight": corr.weight})
    hist = {int(k): int(v) for k, v in zip(*np.unique(flips, return_counts=True))}
    return {"shots": shots, "histogram": hist, "mean_flips": float(flips.mean()) if len(flips) else 0.0}


def flip_threshold(flips: np.ndarray, min_keep: int) -> int:
    """Smallest flip count whose cumulative class size reaches ``min_keep``."""
    flips = np.asarray(flips)
    if min_keep > flips.shape[0]:
        raise ValueError(f"min_keep={min_keep} exceeds the {flips.shape[0]} available shots")
    if np.any(flips < 0):
        raise ValueError("decoder flip counts are not filled in")
    vals, cnt = np.unique(flips, return_counts=True)
    cum = np.cumsum(cnt)
    k = int(np.searchsorted(cum, min_keep))
    return int(vals[min(k, len(vals) - 1)])


def postselect(table: ShotTable, min_keep: int) -> ShotTable:
    """Keep whole flip-count classes, fewest flips first, until ``min_keep`` shots are kept."""
    thr = flip_threshold(table.flips, min_keep)
    out = table.select(table.flips <= thr)
    out.metadata["flip_threshold"] = thr
    return out


# code distance


class Distance(int):
    """Integer distance; ``lower_bound`` marks an unfinished search."""

    lower_bound: bool = False

    def __new__(cls, value: int, lower_bound: bool = False):
        obj = super().__new__(cls, value)
        obj.lower_bound = lower_bound
        return obj


def qubit_syndrome_masks(lat: LatticeGraph) -> list[int]:
    out = [1 << n for n in lat.nodes]
    out += [(1 << u) | (1 << v) for u, v in lat.edges]
    return out


def code_distance(lat: LatticeGraph, max_weight: int = 4) -> Distance:
    """Smallest weight of a nonzero X pattern with an empty syndrome."""
    masks = qubit_syndrome_masks(lat)
    for w in range(1, max_weight + 1):
        for combo in itertools.combinations(range(lat.n_qubits), w):
            acc = 0
            for q in combo:
                acc ^= masks[q]
            if acc == 0:
                return Distance(w)
    return Distance(max_weight + 1, lower_bound=True)


def brute_force_min_weight(lat: LatticeGraph) -> dict[int, int]:
    """Minimum correction weight for every reachable syndrome (exhaustive; small lattices only)."""
    if lat.n_qubits > 20:
        raise ValueError("exhaustive enumeration is limited to 20 qubits")
    masks = np.array(qubit_syndrome_masks(lat), dtype=np.int64)
    pats = np.arange(1 << lat.n_qubits, dtype=np.int64)
    syn = np.zeros_like(pats)
    for q, m in enumerate(masks):
        syn ^= ((pats >> q) & 1) * m
    w = np.bitwise_count(pats).astype(np.int64)
    best: dict[int, int] = {}
    order = np.lexsort((w, syn))
    s_sorted = syn[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = s_sorted[1:] != s_sorted[:-1]
    for i in np.nonzero(first)[0]:
        best[int(s_sorted[i])] = int(w[order[i]])
    return best


# fault propagation


@dataclass
class FaultReport:
    category: str
    terminal: PauliString
    x_weight: int
    events: list[tuple[int, str]] = field(default_factory=list)
    syndrome: frozenset[int] | None = None


def propagate_fault(circuit: Circuit, location: int, letter: str, qubit: int, lat: LatticeGraph | None = None) -> FaultReport:
    """Push a single-qubit Pauli inserted before gate ``location`` to the end of the circuit.

    Clifford gates conjugate it exactly. At a non-Clifford rotation the Pauli
    passes unchanged; if it anticommutes with the generator the rotation
    acquires a sign error, which is recorded as an event with the gate role.

    Categories: ``measurement_flip`` (single X-type flip that never touches a
    rotation), ``correctable_x`` (single X-type flip), ``x_burst`` (weight
    2 or 3), ``x_multi`` (heavier), ``gauge_invariant_rotation`` (pure Z that
    mis-rotated an interaction core) and ``harmless``.
    """
    if not 0 <= location <= len(circuit.gates):
        raise ValueError(f"location {location} outside [0, {len(circuit.gates)}]")
    if not 0 <= qubit < circuit.n_qubits:
        raise ValueError("qubit outside the register")
    P = PauliString.single(letter, qubit)
    events: list[tuple[int, str]] = []
    for i in range(location, len(circuit.gates)):
        g = circuit.gates[i]
        if g.kind == "measure":
            break
        img = conjugate(g, P)
        if img is None:
            gen = PauliString.single("Z" if g.kind == "rz" else "X", g.qubits[0])
            if not P.commutes(gen):
                events.append((i, g.role))
        else:
            P = img
    xw = bin(P.x).count("1")
    syn = None
    if lat is not None:
        masks = qubit_syndrome_masks(lat)
        acc = 0
        for q in range(circuit.n_qubits):
            if (P.x >> q) & 1:
                acc ^= masks[q]
        syn = frozenset(n for n in lat.nodes if (acc >> n) & 1)
    if xw == 0:
        cat = "gauge_invariant_rotation" if any(r == "core" for _, r in events) else "harmless"
    elif xw == 1:
        cat = "measurement_flip" if not events else "correctable_x"
    elif xw <= 3:
        cat = "x_burst"
    else:
        cat = "x_multi"
    return FaultReport(cat, P, xw, events, syn)


# estimator


class GaussSectorCorrector(TransformerMixin, BaseEstimator):
    """Decode, correct and post-select measured bitstrings.

    ``fit`` learns the flip-count threshold that keeps at least ``min_keep``
    shots (or ``keep_fraction`` of them); ``transform`` returns the corrected
    rows whose flip count is within the threshold.

    Parameters
    ----------
    lattice : LatticeGraph
    min_keep : int, optional
    keep_fraction : float, optional
        Used when ``min_keep`` is None; defaults to keeping everything.
    """

    def __init__(self, lattice: LatticeGraph | None = None, min_keep: int | None = None, keep_fraction: float | None = None):
        self.lattice = lattice
        self.min_keep = min_keep
        self.keep_fraction = keep_fraction

    def _check(self, X) -> np.ndarray:
        if self.lattice is None:
            raise ValueError("GaussSectorCorrector needs a lattice")
        X = check_array(X, dtype=np.uint8)
        if X.shape[1] != self.lattice.n_qubits:
            raise ValueError(f"expected {self.lattice.n_qubits} bit columns, got {X.shape[1]}")
        if X.max(initial=0) > 1:
            raise ValueError("bits must be 0 or 1")
        return X

    def _target(self, n: int) -> int:
        if self.min_keep is not None:
            return int(self.min_keep)
        frac = 1.0 if self.keep_fraction is None else float(self.keep_fraction)
        if not 0 < frac <= 1:
            raise ValueError("keep_fraction must lie in (0, 1]")
        return max(1, int(np.ceil(frac * n)))

    def fit(self, X, y=None):
        X = self._check(X)
        _, flips = decode_bits(X, self.lattice)
        self.threshold_ = flip_threshold(flips, self._target(X.shape[0]))
        self.n_features_in_ = X.shape[1]
        return self

    def decode(self, X) -> tuple[np.ndarray, np.ndarray]:
        return decode_bits(self._check(X), self.lattice)

    def transform(self, X):
        check_is_fitted(self, "threshold_")
        bits, flips = self.decode(X)
        return bits[flips <= self.threshold_]

    def keep_mask(self, X) -> np.ndarray:
        check_is_fitted(self, "threshold_")
        _, flips = self.decode(X)
        return flips <= self.threshold_
