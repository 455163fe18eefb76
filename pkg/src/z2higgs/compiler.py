"""Second-order Trotter circuits with GDD, Pauli twirling and calibration partners.

One layer is ``U1(dt/2) C [RotX cores, GDD slots] C U1(dt/2)`` where ``C`` is
the product of all gauge-to-matter CNOTs, scheduled in three steps. Since
``C X_e C = X_u X_e X_v`` and ``C Z_n C = G_n``, the cores implement the
interaction and matter RotZ gates between the blocks implement GDD phases.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .analytics import QuenchParams
from .lattice import LatticeGraph, edge_colouring, matter_bipartition
from .pauli import PauliString

ROTATIONS = ("rz", "rx")
KINDS = ("rz", "rx", "cx", "pauli", "measure")
_LETTERS = "IXYZ"
HALF_PI = math.pi / 2


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None
    letter: str | None = None
    layer: int = -1
    role: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind in ROTATIONS and (self.angle is None or not math.isfinite(self.angle)):
            raise ValueError("rotation angle must be finite")
        if self.kind == "cx" and (len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]):
            raise ValueError("CNOT needs two distinct qubits")
        if self.kind == "pauli" and self.letter not in ("X", "Y", "Z"):
            raise ValueError("Pauli insertion needs a letter X, Y or Z")

    def inverse(self) -> "Gate":
        if self.kind in ROTATIONS:
            return replace(self, angle=-self.angle)
        return self

    def is_clifford(self) -> bool:
        if self.kind in ROTATIONS:
            return _is_multiple(self.angle, HALF_PI)
        return True

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "qubits": list(self.qubits), "layer": self.layer, "role": self.role}
        if self.angle is not None:
            d["angle"] = self.angle
        if self.letter is not None:
            d["letter"] = self.letter
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Gate":
        return cls(
            kind=d["kind"],
            qubits=tuple(int(q) for q in d["qubits"]),
            angle=None if d.get("angle") is None else float(d["angle"]),
            letter=d.get("letter"),
            layer=int(d.get("layer", -1)),
            role=d.get("role", ""),
        )


def _is_multiple(angle: float, unit: float, tol: float = 1e-12) -> bool:
    k = angle / unit
    return abs(k - round(k)) < tol


@dataclass(frozen=True, eq=False)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        seen_measure = False
        for g in self.gates:
            if any(not 0 <= q < self.n_qubits for q in g.qubits):
                raise ValueError(f"gate {g} acts outside the register")
            if g.kind == "measure":
                seen_measure = True
            elif seen_measure:
                raise ValueError("measurements must come last")

    def __len__(self) -> int:
        return len(self.gates)

    @property
    def n_layers(self) -> int:
        return int(self.metadata.get("L", 0))

    @property
    def cnot_count(self) -> int:
        return sum(1 for g in self.gates if g.kind == "cx")

    def two_qubit_depth(self) -> int:
        return two_qubit_depth(self.gates)

    def layer_two_qubit_depths(self) -> list[int]:
        layers: dict[int, list[Gate]] = {}
        for g in self.gates:
            layers.setdefault(g.layer, []).append(g)
        return [two_qubit_depth(layers[k]) for k in sorted(layers) if k >= 0]

    def with_metadata(self, **kw) -> "Circuit":
        meta = dict(self.metadata)
        meta.update(kw)
        return Circuit(self.n_qubits, self.gates, meta)

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "metadata": self.metadata,
            "gates": [g.to_dict() for g in self.gates],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Circuit":
        return cls(int(d["n_qubits"]), tuple(Gate.from_dict(g) for g in d["gates"]), dict(d.get("metadata", {})))

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        return cls.from_dict(json.loads(text))

    def content_hash(self) -> str:
        body = json.dumps(
            {"n_qubits": self.n_qubits, "gates": [g.to_dict() for g in self.gates], "initial": self.metadata.get("initial", 0)},
            sort_keys=True,
        )
        return hashlib.sha256(body.encode()).hexdigest()[:16]


def two_qubit_depth(gates) -> int:
    level: dict[int, int] = {}
    depth = 0
    for g in gates:
        if g.kind != "cx":
            continue
        d = max(level.get(q, 0) for q in g.qubits) + 1
        for q in g.qubits:
            level[q] = d
        depth = max(depth, d)
    return depth


def n_layers(t: float, dt: float) -> int:
    """``ceil(t/dt)`` rounded up to the next even number."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t < 0:
        raise ValueError("t must be non-negative")
    L = math.ceil(t / dt - 1e-9)
    return L + (L % 2)


def pauli_gadget(lat: LatticeGraph, edge: int, angle: float, layer: int = -1) -> list[Gate]:
    """Gates for ``exp(+i angle X_u X_e X_v)`` on one link."""
    u, v = lat.edges[edge]
    qe = lat.qubit_of_edge(edge)
    cx = [Gate("cx", (qe, lat.qubit_of_node(u)), layer=layer, role="cnot"),
          Gate("cx", (qe, lat.qubit_of_node(v)), layer=layer, role="cnot")]
    core = Gate("rx", (qe,), angle=-2.0 * angle, layer=layer, role="core")
    return cx + [core] + cx[::-1]


def cnot_schedule(lat: LatticeGraph) -> list[list[tuple[int, int]]]:
    """Three CNOT steps covering every (gauge, matter) incidence once.

    Edge ``e`` with colour ``c`` targets its A-side node at step ``c`` and its
    B-side node at step ``c + 1 (mod 3)``. Distinct colours at a node keep
    both matter targets and gauge controls busy at most once per step.
    """
    A, _ = matter_bipartition(lat)
    colour = edge_colouring(lat)
    if max(colour, default=0) > 2:
        raise ValueError("lattice needs more than three edge colours")
    steps: list[list[tuple[int, int]]] = [[], [], []]
    for e, (u, v) in enumerate(lat.edges):
        a, b = (u, v) if u in A else (v, u)
        qe = lat.qubit_of_edge(e)
        steps[colour[e]].append((qe, lat.qubit_of_node(a)))
        steps[(colour[e] + 1) % 3].append((qe, lat.qubit_of_node(b)))
    return steps


def _layer(lat: LatticeGraph, steps, k: int, m: float, g: float, lam: float, dtt: float) -> list[Gate]:
    u1 = [Gate("rz", (lat.qubit_of_node(n),), angle=-m * dtt, layer=k, role="mass") for n in lat.nodes]
    u1 += [Gate("rz", (lat.qubit_of_edge(e),), angle=-g * dtt, layer=k, role="electric") for e in range(lat.n_edges)]
    block = [Gate("cx", cq, layer=k, role="cnot") for step in steps for cq in step]
    block_rev = [Gate("cx", cq, layer=k, role="cnot") for step in steps[::-1] for cq in step]
    cores = [Gate("rx", (lat.qubit_of_edge(e),), angle=-2.0 * lam * dtt, layer=k, role="core") for e in range(lat.n_edges)]
    return u1 + block + cores + block_rev + u1


def trotter_circuit(
    lat: LatticeGraph,
    params: QuenchParams,
    gdd: bool = False,
    twirl_seed: int | None = None,
    phase_seed: int | None = None,
    initial: int = 0,
) -> Circuit:
    """Compile ``exp(-iHt)`` into ``L`` symmetric second-order layers."""
    L = n_layers(params.t, params.dt)
    dtt = params.t / L if L else 0.0
    steps = cnot_schedule(lat)
    gates: list[Gate] = []
    for k in range(L):
        gates += _layer(lat, steps, k, params.m, params.g, params.lam, dtt)
    meta = {
        "kind": "trotter",
        "L": L,
        "dt_tilde": dtt,
        "t": params.t,
        "dt": params.dt,
        "m": params.m,
        "g": params.g,
        "lam": params.lam,
        "initial": int(initial),
        "n_matter": lat.n_nodes,
        "n_gauge": lat.n_edges,
        "matter_qubits": [lat.qubit_of_node(n) for n in lat.nodes],
        "lattice": lat.metadata(),
        "gdd": False,
        "gdd_phases": None,
        "phase_seed": None,
        "twirl_seed": None,
        "cnot_count": sum(1 for x in gates if x.kind == "cx"),
        "two_qubit_depth": 6 * L,
        "gauge_slot_depth": 6 * lat.n_edges * L,
    }
    circ = Circuit(lat.n_qubits, tuple(gates), meta)
    if gdd:
        circ = insert_gdd(circ, phase_seed)
    if twirl_seed is not None:
        circ = twirl(circ, twirl_seed)
    return circ


def sample_gdd_phases(L: int, n_nodes: int, seed) -> np.ndarray:
    """Uniform phases in ``[-pi, pi]`` with zero column sums mod ``2 pi``."""
    rng = np.random.default_rng(seed)
    raw = np.zeros((L, n_nodes))
    if L:
        # free rows stay independent and uniform; subtracting a mean would bias them
        raw[:-1] = rng.uniform(-math.pi, math.pi, size=(L - 1, n_nodes))
        raw[-1] = -raw[:-1].sum(axis=0)
    return np.mod(raw + math.pi, 2 * math.pi) - math.pi


def insert_gdd(circuit: Circuit, phase_seed) -> Circuit:
    """Add ``exp(-i phi_{k,n} G_n)`` to every layer as matter RotZ between the CNOT blocks."""
    meta = circuit.metadata
    L = circuit.n_layers
    matter = meta["matter_qubits"]
    phases = sample_gdd_phases(L, len(matter), phase_seed)
    out: list[Gate] = []
    gates = circuit.gates
    for i, g in enumerate(gates):
        out.append(g)
        nxt = gates[i + 1] if i + 1 < len(gates) else None
        last_core = g.role == "core" and (nxt is None or nxt.role != "core" or nxt.layer != g.layer)
        if last_core:
            k = g.layer
            out += [Gate("rz", (q,), angle=2.0 * phases[k, j], layer=k, role="gdd") for j, q in enumerate(matter)]
    new_meta = dict(meta)
    new_meta.update(gdd=True, gdd_phases=phases.tolist(), phase_seed=phase_seed)
    return Circuit(circuit.n_qubits, tuple(out), new_meta)


# Clifford conjugation


def _letter_image(gate: Gate, q: int, letter: str) -> PauliString:
    """``gate * P_q * gate^dagger`` for a single X or Z on qubit ``q``."""
    p = PauliString.single(letter, q)
    if q not in gate.qubits:
        return p
    if gate.kind == "cx":
        c, t = gate.qubits
        if letter == "X" and q == c:
            return PauliString.from_letters({c: "X", t: "X"})
        if letter == "Z" and q == t:
            return PauliString.from_letters({c: "Z", t: "Z"})
        return p
    if gate.kind == "pauli":
        return p if letter == gate.letter else -p
    if gate.kind in ROTATIONS:
        gen = "Z" if gate.kind == "rz" else "X"
        if letter == gen:
            return p
        k = int(round(gate.angle / HALF_PI)) % 4
        # R P R^dag = exp(-i angle G) P for P anticommuting with G
        g_op = PauliString.single(gen, q)
        factor = [PauliString(), g_op.times_i(-1), -PauliString(), g_op.times_i(1)][k]
        return factor * p
    return p


def conjugate(gate: Gate, pauli: PauliString) -> PauliString | None:
    """``gate P gate^dagger``, or ``None`` if the gate is a non-Clifford rotation."""
    if not gate.is_clifford():
        return None
    if gate.kind == "measure" or not any(((pauli.x | pauli.z) >> q) & 1 for q in gate.qubits):
        return pauli
    # P = i^(phase + |x&z|) X^x Z^z
    out = PauliString(0, 0, pauli.phase + bin(pauli.x & pauli.z).count("1"))
    for q, c in sorted(pauli.letters.items()):
        if c in "XY":
            out = out * _letter_image(gate, q, "X")
    for q, c in sorted(pauli.letters.items()):
        if c in "ZY":
            out = out * _letter_image(gate, q, "Z")
    return out


def heisenberg(circuit: Circuit, obs: PauliString) -> PauliString:
    """``U^dagger O U`` for an all-Clifford circuit."""
    op = obs
    for g in reversed(circuit.gates):
        img = conjugate(g.inverse(), op)
        if img is None:
            raise ValueError("circuit is not Clifford")
        op = img
    return op


def stabilizer_expectation(circuit: Circuit, obs: PauliString, initial: int | None = None) -> float:
    """Ideal ``<b| U^dagger O U |b>`` of a Clifford circuit on a basis state."""
    b = circuit.metadata.get("initial", 0) if initial is None else initial
    op = heisenberg(circuit, obs)
    if op.x:
        return 0.0
    return float(op.sign * (-1) ** (bin(op.z & b).count("1") % 2))


# twirling and calibration partners


def sample_twirl_pairs(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` draws from the 16 two-qubit Paulis, encoded as ``4*a + b``."""
    return rng.integers(0, 16, size=n)


def twirl(circuit: Circuit, seed) -> Circuit:
    """Wrap each CNOT in a random Pauli pair and its CNOT-conjugated compensation."""
    rng = np.random.default_rng(seed)
    cx_idx = [i for i, g in enumerate(circuit.gates) if g.kind == "cx"]
    draws = sample_twirl_pairs(rng, len(cx_idx))
    pick = dict(zip(cx_idx, draws.tolist()))
    out: list[Gate] = []
    for i, g in enumerate(circuit.gates):
        if i not in pick:
            out.append(g)
            continue
        c, t = g.qubits
        a, b = _LETTERS[pick[i] // 4], _LETTERS[pick[i] % 4]
        before = PauliString.from_letters({c: a, t: b})
        after = conjugate(g, before)
        for q, letter in ((c, a), (t, b)):
            if letter != "I":
                out.append(Gate("pauli", (q,), letter=letter, layer=g.layer, role="twirl"))
        out.append(g)
        for q, letter in sorted(after.letters.items()):
            out.append(Gate("pauli", (q,), letter=letter, layer=g.layer, role="twirl"))
    meta = dict(circuit.metadata)
    meta["twirl_seed"] = seed
    return Circuit(circuit.n_qubits, tuple(out), meta)


def inverse_circuit(circuit: Circuit) -> Circuit:
    return Circuit(circuit.n_qubits, tuple(g.inverse() for g in reversed(circuit.gates)), dict(circuit.metadata))


def mirror_calibration(circuit: Circuit) -> Circuit:
    """First ``L/2`` layers followed by their exact inverse."""
    L = circuit.n_layers
    if L % 2:
        raise ValueError("mirror calibration needs an even number of layers")
    half = [g for g in circuit.gates if 0 <= g.layer < L // 2]
    back = [replace(g.inverse(), layer=L - 1 - g.layer) for g in reversed(half)]
    meta = dict(circuit.metadata)
    meta.update(kind="mirror", source_kind=circuit.metadata.get("kind"))
    return Circuit(circuit.n_qubits, tuple(half + back), meta)


def snap_angle(angle: float) -> float:
    """Nearest multiple of ``pi/2``, ties toward zero."""
    x = angle / HALF_PI
    k = math.copysign(math.ceil(abs(x) - 0.5), x)
    return k * HALF_PI + 0.0


def cliffordize(circuit: Circuit) -> Circuit:
    gates = tuple(replace(g, angle=snap_angle(g.angle)) if g.kind in ROTATIONS else g for g in circuit.gates)
    meta = dict(circuit.metadata)
    meta.update(kind="clifford", source_kind=circuit.metadata.get("kind"))
    return Circuit(circuit.n_qubits, gates, meta)


def calibration_circuit(circuit: Circuit, mode: str) -> Circuit:
    if mode == "mirror":
        return mirror_calibration(circuit)
    if mode == "clifford":
        return cliffordize(circuit)
    raise ValueError(f"unknown calibration mode {mode!r}")


def gadget_unitary(gates: list[Gate], qubits: list[int]) -> np.ndarray:
    """Dense unitary of a gate list restricted to ``qubits`` (little-endian in that order)."""
    from .statevector import apply_cnot, apply_letter, apply_rx, apply_rz

    pos = {q: i for i, q in enumerate(qubits)}
    n = len(qubits)
    U = np.zeros((1 << n, 1 << n), dtype=complex)
    for col in range(1 << n):
        psi = np.zeros(1 << n, dtype=complex)
        psi[col] = 1.0
        for g in gates:
            qs = [pos[q] for q in g.qubits]
            if g.kind == "rz":
                apply_rz(psi, qs[0], g.angle)
            elif g.kind == "rx":
                apply_rx(psi, qs[0], g.angle)
            elif g.kind == "cx":
                apply_cnot(psi, qs[0], qs[1])
            elif g.kind == "pauli":
                apply_letter(psi, qs[0], g.letter)
        U[:, col] = psi
    return U
