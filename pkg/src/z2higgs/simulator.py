"""Statevector execution, Pauli-noise trajectories and a density-matrix oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .compiler import Circuit, Gate
from .pauli import PauliString
from .statevector import (
    DEFAULT_QUBIT_CAP,
    StateVector,
    apply_cnot,
    apply_letter,
    apply_rx,
    apply_rz,
    apply_zz_phase,
    as_amplitudes,
    check_capacity,
)

ORACLE_CAP = 10
FUSE_CAP = 14
CACHE_BYTES = 256 * 2**20
_LETTERS = "IXYZ"
PAIRS_15 = tuple((a, b) for a in _LETTERS for b in _LETTERS if a + b != "II")


@dataclass(frozen=True)
class NoiseModel:
    """Stochastic Pauli noise plus an optional coherent ZZ over-rotation.

    Parameters
    ----------
    p1 : float
        Error probability after each noisy single-qubit gate.
    p1_weights : tuple of 3 floats
        Relative weights of X, Y, Z.
    p2 : float
        Error probability after each CNOT.
    p2_weights : tuple of 15 floats
        Relative weights of the non-identity pairs in ``PAIRS_15`` order
        (first letter on the control).
    p_meas : float
        Readout flip probability per bit.
    coherent_zz : float
        Angle ``eps`` of ``exp(-i eps/2 Z_c Z_t)`` applied after each CNOT.
    virtual_z : bool
        RotZ gates are error free when True.
    terminal : tuple of (weight, PauliString)
        Pauli channel applied just before readout.
    """

    p1: float = 0.0
    p1_weights: tuple[float, ...] = (1.0, 1.0, 1.0)
    p2: float = 0.0
    p2_weights: tuple[float, ...] = (1.0,) * 15
    p_meas: float = 0.0
    coherent_zz: float = 0.0
    virtual_z: bool = True
    terminal: tuple = ()

    def __post_init__(self):
        for name in ("p1", "p2", "p_meas"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if len(self.p1_weights) != 3 or len(self.p2_weights) != 15:
            raise ValueError("p1_weights needs 3 entries and p2_weights 15")
        for w in (self.p1_weights, self.p2_weights):
            if min(w) < 0 or sum(w) <= 0:
                raise ValueError("letter weights must be non-negative with a positive sum")
        if not math.isfinite(self.coherent_zz):
            raise ValueError("coherent_zz must be finite")
        tw = [w for w, _ in self.terminal]
        if any(w < 0 for w in tw) or sum(tw) > 1 + 1e-12:
            raise ValueError("terminal channel weights must be non-negative and sum to at most 1")

    @property
    def is_noiseless(self) -> bool:
        return self.p1 == 0 and self.p2 == 0 and self.p_meas == 0 and self.coherent_zz == 0 and not self.terminal

    def scaled(self, s: float) -> "NoiseModel":
        return replace(
            self,
            p1=min(1.0, self.p1 * s),
            p2=min(1.0, self.p2 * s),
            p_meas=min(1.0, self.p_meas * s),
            coherent_zz=self.coherent_zz * s,
            terminal=tuple((min(1.0, w * s), p) for w, p in self.terminal),
        )

    def gate_error_rate(self, gate: Gate) -> float:
        if gate.kind == "cx":
            return self.p2
        if gate.kind == "rx" or (gate.kind == "rz" and not self.virtual_z):
            return self.p1
        return 0.0

    def to_dict(self) -> dict:
        return {
            "p1": self.p1,
            "p1_weights": list(self.p1_weights),
            "p2": self.p2,
            "p2_weights": list(self.p2_weights),
            "p_meas": self.p_meas,
            "coherent_zz": self.coherent_zz,
            "virtual_z": self.virtual_z,
            "terminal": [[w, p.to_label()] for w, p in self.terminal],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        d = dict(d)
        if "terminal" in d:
            d["terminal"] = tuple((float(w), PauliString.from_label(p)) for w, p in d["terminal"])
        for k in ("p1_weights", "p2_weights"):
            if k in d:
                d[k] = tuple(float(x) for x in d[k])
        return cls(**d)


# noiseless execution


def apply_gate(psi: np.ndarray, gate: Gate) -> None:
    if gate.kind == "rz":
        apply_rz(psi, gate.qubits[0], gate.angle)
    elif gate.kind == "rx":
        apply_rx(psi, gate.qubits[0], gate.angle)
    elif gate.kind == "cx":
        apply_cnot(psi, *gate.qubits)
    elif gate.kind == "pauli":
        apply_letter(psi, gate.qubits[0], gate.letter)


def _initial_state(circuit: Circuit, state) -> np.ndarray:
    if state is None:
        check_capacity(circuit.n_qubits)
        psi = np.zeros(1 << circuit.n_qubits, dtype=complex)
        psi[circuit.metadata.get("initial", 0)] = 1.0
        return psi
    psi = as_amplitudes(state).copy()
    if psi.shape[0] != 1 << circuit.n_qubits:
        raise ValueError(f"state has {psi.shape[0]} amplitudes, circuit needs 2**{circuit.n_qubits}")
    return psi


def apply_circuit(state, circuit: Circuit, cap: int | None = None) -> StateVector:
    """Noiseless gate-by-gate evolution. ``state=None`` starts from the circuit's initial bitstring."""
    check_capacity(circuit.n_qubits, cap)
    psi = _initial_state(circuit, state)
    for g in circuit.gates:
        apply_gate(psi, g)
    return StateVector(psi, circuit.n_qubits, cap=cap, check_norm=False)


def layer_snapshots(state, circuit: Circuit, every: int = 1, cap: int | None = None) -> list[StateVector]:
    """States after layers ``every, 2*every, ...`` (plus the input state first)."""
    check_capacity(circuit.n_qubits, cap)
    psi = _initial_state(circuit, state)
    out = [StateVector(psi.copy(), check_norm=False, cap=cap)]
    gates = circuit.gates
    for i, g in enumerate(gates):
        apply_gate(psi, g)
        end = i + 1 == len(gates) or gates[i + 1].layer != g.layer
        if end and g.layer >= 0 and (g.layer + 1) % every == 0:
            out.append(StateVector(psi.copy(), check_norm=False, cap=cap))
    return out


# moment programs


def schedule_moments(gates: Sequence[Gate]) -> list[int]:
    """ASAP moment index of each gate; gates in one moment act on disjoint qubits."""
    last: dict[int, int] = {}
    out = []
    for g in gates:
        m = max((last.get(q, -1) for q in g.qubits), default=-1) + 1
        for q in g.qubits:
            last[q] = m
        out.append(m)
    return out


class _Monomial:
    """``psi'[b] = w[b] * psi[p[b]]``; ``p is None`` means diagonal."""

    __slots__ = ("p", "w")

    def __init__(self, dim: int):
        self.p = None
        self.w = np.ones(dim, dtype=complex)

    def then(self, p, w) -> None:
        # compose a new factor on the left
        if p is None:
            self.w = w * self.w
        else:
            self.w = w * self.w[p]
            self.p = p if self.p is None else self.p[p]

    def apply(self, psi: np.ndarray) -> np.ndarray:
        if self.p is None:
            psi *= self.w
            return psi
        return self.w * psi[self.p]


def _gate_monomial(gate: Gate, idx: np.ndarray, zz: float):
    if gate.kind == "rz":
        q = gate.qubits[0]
        bit = (idx >> q) & 1
        return None, np.exp(-0.5j * gate.angle * (1 - 2 * bit))
    if gate.kind == "cx":
        c, t = gate.qubits
        p = idx ^ (((idx >> c) & 1) << t)
        if zz:
            par = ((idx >> c) ^ (idx >> t)) & 1
            return p, np.exp(-0.5j * zz * (1 - 2 * par))
        return p, np.ones(idx.shape[0], dtype=complex)
    if gate.kind == "pauli":
        P = PauliString.single(gate.letter, gate.qubits[0])
        p = idx ^ P.x
        return p, P._column_factors(p)
    raise ValueError(gate.kind)


class _Program:
    def __init__(self, circuit: Circuit, noise: NoiseModel):
        self.n = circuit.n_qubits
        self.dim = 1 << self.n
        self.gates = circuit.gates
        self.noise = noise
        moment_of = schedule_moments(self.gates)
        n_mom = max(moment_of, default=-1) + 1
        self.moments: list[list[Gate]] = [[] for _ in range(n_mom)]
        for g, m in zip(self.gates, moment_of):
            if g.kind != "measure":
                self.moments[m].append(g)
        slots = []
        for g, m in zip(self.gates, moment_of):
            p = noise.gate_error_rate(g)
            if p > 0:
                slots.append((m, g.qubits, p))
        self.slot_moment = np.array([s[0] for s in slots], dtype=np.int64)
        self.slot_qubits = [s[1] for s in slots]
        self.slot_p = np.array([s[2] for s in slots])
        self.fused = self.n <= FUSE_CAP
        self.ops: list = []
        if self.fused:
            idx = np.arange(self.dim, dtype=np.int64)
            # gates in one moment act on disjoint qubits, so the monomial part
            # and the remaining rotations can be applied in either order
            for gates in self.moments:
                mono = None
                rest = []
                for g in gates:
                    if g.kind in ("rz", "cx", "pauli"):
                        mono = mono or _Monomial(self.dim)
                        mono.then(*_gate_monomial(g, idx, noise.coherent_zz))
                    else:
                        rest.append(g)
                self.ops.append((mono, rest))
        w1 = np.asarray(noise.p1_weights, float)
        w2 = np.asarray(noise.p2_weights, float)
        self.cdf1 = np.cumsum(w1 / w1.sum())
        self.cdf2 = np.cumsum(w2 / w2.sum())
        tw = [w for w, _ in noise.terminal]
        self.term_cdf = np.cumsum(tw) if tw else None
        self._cache: list[np.ndarray] | None = None
        self._final: np.ndarray | None = None
        self._cdf: np.ndarray | None = None

    def run_moment(self, psi: np.ndarray, m: int) -> np.ndarray:
        if self.fused:
            mono, rest = self.ops[m]
            if mono is not None:
                psi = mono.apply(psi)
            for g in rest:
                apply_gate(psi, g)
            return psi
        zz = self.noise.coherent_zz
        for g in self.moments[m]:
            apply_gate(psi, g)
            if zz and g.kind == "cx":
                apply_zz_phase(psi, g.qubits[0], g.qubits[1], zz)
        return psi

    def baseline(self, psi0: np.ndarray) -> None:
        """Error-free trajectory (coherent error included), cached per moment when small."""
        keep = self.dim * 16 * (len(self.moments) + 1) <= CACHE_BYTES
        cache = [psi0.copy()] if keep else None
        psi = psi0.copy()
        for m in range(len(self.moments)):
            psi = self.run_moment(psi, m)
            if keep:
                cache.append(psi.copy())
        self._cache = cache
        self._psi0 = psi0
        self._final = psi
        self._cdf = _cdf(psi)

    def trajectory(self, hits: list[tuple[int, tuple[int, ...], str]], terminal: PauliString | None) -> np.ndarray:
        if not hits and terminal is None:
            return self._final
        if hits:
            hits = sorted(hits, key=lambda h: h[0])
            first = hits[0][0]
            if self._cache is not None:
                psi, start = self._cache[first + 1].copy(), first + 1
            else:
                psi, start = self._psi0.copy(), 0
                for m in range(first + 1):
                    psi = self.run_moment(psi, m)
                start = first + 1
            k = 0
            while k < len(hits) and hits[k][0] == first:
                _apply_letters(psi, hits[k][1], hits[k][2])
                k += 1
            for m in range(start, len(self.moments)):
                psi = self.run_moment(psi, m)
                while k < len(hits) and hits[k][0] == m:
                    _apply_letters(psi, hits[k][1], hits[k][2])
                    k += 1
        else:
            psi = self._final.copy()
        if terminal is not None:
            psi = terminal.apply(psi)
        return psi


def _apply_letters(psi: np.ndarray, qubits: tuple[int, ...], letters: str) -> None:
    for q, c in zip(qubits, letters):
        apply_letter(psi, q, c)


def _cdf(psi: np.ndarray) -> np.ndarray:
    c = np.cumsum(np.abs(psi) ** 2)
    return c / c[-1]


# shots


@dataclass
class ShotTable:
    """Measured bitstrings with per-shot provenance.

    ``bits[s, q]`` is the outcome of qubit ``q`` in shot ``s``.
    """

    bits: np.ndarray
    traj_seed: np.ndarray
    twirl_index: np.ndarray
    flips: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2:
            raise ValueError("bits must be a 2-D array")
        n = self.bits.shape[0]
        self.traj_seed = np.asarray(self.traj_seed, dtype=np.int64).reshape(n)
        self.twirl_index = np.asarray(self.twirl_index, dtype=np.int64).reshape(n)
        self.flips = np.asarray(self.flips, dtype=np.int64).reshape(n)
        if self.bits.size and self.bits.max() > 1:
            raise ValueError("bits must be 0 or 1")

    @property
    def n_shots(self) -> int:
        return self.bits.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.bits.shape[1]

    def __len__(self) -> int:
        return self.n_shots

    def indices(self) -> np.ndarray:
        if self.n_qubits > 62:
            raise ValueError("register too wide for integer indices")
        w = (np.int64(1) << np.arange(self.n_qubits, dtype=np.int64))
        return self.bits.astype(np.int64) @ w

    def counts(self) -> dict[str, int]:
        rows, cnt = np.unique(self.bits, axis=0, return_counts=True)
        return {"".join(map(str, r)): int(c) for r, c in zip(rows, cnt)}

    def parities(self, obs: PauliString) -> np.ndarray:
        """Per-shot eigenvalue ``+-1`` of a diagonal Pauli string."""
        if not obs.is_diagonal:
            raise ValueError("only diagonal observables can be read from Z-basis shots")
        if obs.max_qubit >= self.n_qubits:
            raise ValueError("observable acts outside the register")
        sup = obs.support
        par = self.bits[:, sup].sum(axis=1) & 1 if sup else np.zeros(self.n_shots, dtype=np.int64)
        return obs.sign * (1 - 2 * par.astype(np.int64))

    def select(self, mask) -> "ShotTable":
        mask = np.asarray(mask)
        return ShotTable(self.bits[mask], self.traj_seed[mask], self.twirl_index[mask], self.flips[mask], dict(self.metadata))

    def with_bits(self, bits: np.ndarray, flips: np.ndarray | None = None) -> "ShotTable":
        return ShotTable(bits, self.traj_seed, self.twirl_index, self.flips if flips is None else flips, dict(self.metadata))

    @staticmethod
    def concat(tables: Sequence["ShotTable"]) -> "ShotTable":
        if not tables:
            raise ValueError("nothing to concatenate")
        meta = dict(tables[0].metadata)
        meta["parts"] = [t.metadata for t in tables]
        return ShotTable(
            np.concatenate([t.bits for t in tables]),
            np.concatenate([t.traj_seed for t in tables]),
            np.concatenate([t.twirl_index for t in tables]),
            np.concatenate([t.flips for t in tables]),
            meta,
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ShotTable)
            and np.array_equal(self.bits, other.bits)
            and np.array_equal(self.traj_seed, other.traj_seed)
            and np.array_equal(self.twirl_index, other.twirl_index)
            and np.array_equal(self.flips, other.flips)
        )

    # text format
    def to_text(self) -> str:
        h = self.metadata
        head = (
            f"# shots Q={self.n_qubits} shots={self.n_shots} hash={h.get('circuit_hash', '-')} "
            f"seed={h.get('master_seed', '-')} order=little-endian(char q is qubit q)"
        )
        lines = [head, "# bitstring traj_seed twirl_index flips"]
        for s in range(self.n_shots):
            lines.append(
                f"{''.join('1' if b else '0' for b in self.bits[s])} {self.traj_seed[s]} {self.twirl_index[s]} {self.flips[s]}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, metadata: dict | None = None) -> "ShotTable":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# shots"):
            raise ValueError("missing shot table header")
        head = dict(tok.split("=", 1) for tok in lines[0].split()[2:] if "=" in tok)
        Q, n = int(head["Q"]), int(head["shots"])
        rows = [ln.split() for ln in lines[1:] if ln and not ln.startswith("#")]
        if len(rows) != n:
            raise ValueError(f"header announces {n} shots, found {len(rows)}")
        bits = np.array([[c == "1" for c in r[0]] for r in rows], dtype=np.uint8).reshape(n, Q)
        meta = dict(metadata or {})
        meta.setdefault("circuit_hash", head.get("hash"))
        seed = head.get("seed")
        meta.setdefault("master_seed", None if seed in (None, "-", "None") else int(seed))
        return cls(
            bits,
            [int(r[1]) for r in rows],
            [int(r[2]) for r in rows],
            [int(r[3]) for r in rows],
            meta,
        )


def shot_rng(master_seed: int, shot: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(shot),)))


def _bits_of(idx: int, n: int) -> np.ndarray:
    return ((idx >> np.arange(n)) & 1).astype(np.uint8)


def run_trajectories(
    circuit: Circuit,
    noise: NoiseModel | None,
    n_shots: int,
    master_seed: int,
    initial=None,
    twirl_index: int = 0,
    shot_offset: int = 0,
    cap: int | None = None,
) -> ShotTable:
    """Sample ``n_shots`` noisy executions ending in a Z-basis measurement.

    Shot ``i`` draws all its randomness from ``(master_seed, shot_offset + i)``.
    """
    if n_shots < 1:
        raise ValueError("n_shots must be at least 1")
    check_capacity(circuit.n_qubits, DEFAULT_QUBIT_CAP if cap is None else cap)
    noise = noise or NoiseModel()
    prog = _Program(circuit, noise)
    prog.baseline(_initial_state(circuit, initial))
    n = circuit.n_qubits
    bits = np.zeros((n_shots, n), dtype=np.uint8)
    for i in range(n_shots):
        rng = shot_rng(master_seed, shot_offset + i)
        u = rng.random(prog.slot_p.shape[0])
        hit_slots = np.nonzero(u < prog.slot_p)[0]
        hits = []
        if hit_slots.size:
            r = rng.random(hit_slots.size)
            for s, x in zip(hit_slots.tolist(), r.tolist()):
                qs = prog.slot_qubits[s]
                if len(qs) == 1:
                    letters = "XYZ"[int(np.searchsorted(prog.cdf1, x, side="right"))]
                else:
                    a, b = PAIRS_15[min(int(np.searchsorted(prog.cdf2, x, side="right")), 14)]
                    letters = a + b
                hits.append((int(prog.slot_moment[s]), qs, letters))
        terminal = None
        if prog.term_cdf is not None:
            x = rng.random()
            k = int(np.searchsorted(prog.term_cdf, x, side="right"))
            if k < len(noise.terminal):
                terminal = noise.terminal[k][1]
        flips = rng.random(n) < noise.p_meas if noise.p_meas > 0 else None
        x = rng.random()
        if hits or terminal is not None:
            cdf = _cdf(prog.trajectory(hits, terminal))
        else:
            cdf = prog._cdf
        idx = min(int(np.searchsorted(cdf, x, side="right")), prog.dim - 1)
        row = _bits_of(idx, n)
        if flips is not None:
            row ^= flips.astype(np.uint8)
        bits[i] = row
    meta = {
        "n_qubits": n,
        "circuit_hash": circuit.content_hash(),
        "master_seed": int(master_seed),
        "shot_offset": int(shot_offset),
        "noise": noise.to_dict(),
    }
    return ShotTable(
        bits,
        np.arange(shot_offset, shot_offset + n_shots),
        np.full(n_shots, twirl_index),
        np.full(n_shots, -1),
        meta,
    )


# density-matrix oracle


class _Density:
    """``rho`` stored as a vector over 2n qubits: row qubit q is bit q+n, column qubit q is bit q."""

    def __init__(self, n: int, index: int):
        self.n = n
        self.v = np.zeros(1 << (2 * n), dtype=complex)
        self.v[(index << n) + index] = 1.0

    def unitary(self, g: Gate, zz: float) -> None:
        n, v = self.n, self.v
        q = g.qubits
        if g.kind == "rz":
            apply_rz(v, q[0] + n, g.angle)
            apply_rz(v, q[0], -g.angle)
        elif g.kind == "rx":
            apply_rx(v, q[0] + n, g.angle)
            apply_rx(v, q[0], -g.angle)
        elif g.kind == "cx":
            apply_cnot(v, q[0] + n, q[1] + n)
            apply_cnot(v, q[0], q[1])
            if zz:
                apply_zz_phase(v, q[0] + n, q[1] + n, zz)
                apply_zz_phase(v, q[0], q[1], -zz)
        elif g.kind == "pauli":
            self._pauli_inplace(v, {q[0]: g.letter})

    def _pauli_inplace(self, v: np.ndarray, letters: dict[int, str]) -> None:
        for q, c in letters.items():
            apply_letter(v, q + self.n, c)
            apply_letter(v, q, c)
            if c == "Y":
                v *= -1

    def channel(self, p: float, terms: list[tuple[float, dict[int, str]]]) -> None:
        if p == 0:
            return
        qs = sorted({q for _, letters in terms for q in letters})
        if len(qs) <= 3:
            self._local_channel(p, terms, qs)
            return
        acc = (1 - p) * self.v
        for w, letters in terms:
            if w == 0:
                continue
            tmp = self.v.copy()
            self._pauli_inplace(tmp, letters)
            acc += p * w * tmp
        self.v = acc

    def _local_channel(self, p: float, terms, qs: list[int]) -> None:
        # superoperator on the row and column bits of qs, contracted in one pass
        k, n = len(qs), self.n
        pos = {q: i for i, q in enumerate(qs)}
        d = 1 << k
        S = (1 - p) * np.eye(d * d, dtype=complex)
        for w, letters in terms:
            if w:
                P = PauliString.from_letters({pos[q]: c for q, c in letters.items()}).to_matrix(k)
                S += p * w * np.kron(P, P.conj())
        # S acts on (row, col) with local little-endian indices; split into bit axes
        bits = [qs[k - 1 - j] + n for j in range(k)] + [qs[k - 1 - j] for j in range(k)]
        axes = [2 * n - 1 - b for b in bits]
        St = S.reshape((2,) * (4 * k))
        V = self.v.reshape((2,) * (2 * n))
        out = np.tensordot(St, V, axes=(list(range(2 * k, 4 * k)), axes))
        self.v = np.moveaxis(out, list(range(2 * k)), axes).reshape(-1)

    def expectation(self, obs: PauliString) -> float:
        n = self.n
        dim = 1 << n
        r = np.arange(dim)
        # tr(O rho) = sum_r f(r) rho[r, r ^ x] with O|r> = f(r)|r ^ x>
        vals = obs._column_factors(r) * self.v[(r << n) + (r ^ obs.x)]
        return float(np.sum(vals).real)


def exact_channel_expectation(circuit: Circuit, noise: NoiseModel | None, obs, initial: int | None = None):
    """``tr(rho_f O)`` from exact density-matrix evolution (at most 10 qubits)."""
    n = circuit.n_qubits
    if n > ORACLE_CAP:
        raise ValueError(f"density-matrix oracle is limited to {ORACLE_CAP} qubits, got {n}")
    noise = noise or NoiseModel()
    init = circuit.metadata.get("initial", 0) if initial is None else initial
    rho = _Density(n, init)
    w1 = np.asarray(noise.p1_weights, float) / sum(noise.p1_weights)
    w2 = np.asarray(noise.p2_weights, float) / sum(noise.p2_weights)
    for g in circuit.gates:
        if g.kind == "measure":
            continue
        rho.unitary(g, noise.coherent_zz)
        p = noise.gate_error_rate(g)
        if p > 0:
            if g.kind == "cx":
                c, t = g.qubits
                terms = [(w, {q: l for q, l in ((c, a), (t, b)) if l != "I"}) for w, (a, b) in zip(w2, PAIRS_15)]
            else:
                terms = [(w, {g.qubits[0]: l}) for w, l in zip(w1, "XYZ")]
            rho.channel(p, terms)
    tot = sum(w for w, _ in noise.terminal)
    if tot > 0:
        rho.channel(tot, [(w / tot, P.letters) for w, P in noise.terminal])
    for q in range(n):
        rho.channel(noise.p_meas, [(1.0, {q: "X"})])
    if isinstance(obs, PauliString):
        return rho.expectation(obs)
    return np.array([rho.expectation(o) for o in obs])
