"""Honeycomb lattices for the Z2-Higgs model.

Matter lives on nodes, gauge fields on edges. Qubits are numbered matter
first (row-major in the node coordinates), then gauge qubits in sorted
endpoint order.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .pauli import PauliString


class LatticeError(ValueError):
    pass


class BipartitionError(LatticeError):
    """Raised when the matter nodes admit no proper two-colouring."""

    def __init__(self, conflicts: list[tuple[int, int]]):
        self.conflicts = conflicts
        nodes = sorted({n for pair in conflicts for n in pair})
        super().__init__(f"no valid matter bipartition; conflicting nodes {nodes}")


@dataclass(frozen=True)
class GaugeGeneratorSupport:
    node: int
    qubits: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class LatticeGraph:
    """Immutable matter/gauge lattice.

    Parameters
    ----------
    coords : tuple of (x, y)
        Node coordinates, only used for export and plotting.
    edges : tuple of (u, v)
        Gauge links with ``u < v``, sorted.
    kind : str
        ``"flake"``, ``"brick"`` or ``"chain"``.
    params : dict
        Construction parameters.
    """

    coords: tuple[tuple[float, float], ...]
    edges: tuple[tuple[int, int], ...]
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.coords)
        adj: list[list[int]] = [[] for _ in range(n)]
        inc: list[list[int]] = [[] for _ in range(n)]
        for e, (u, v) in enumerate(self.edges):
            if not (0 <= u < v < n):
                raise LatticeError(f"bad edge {(u, v)}")
            adj[u].append(v)
            adj[v].append(u)
            inc[u].append(e)
            inc[v].append(e)
        if len(set(self.edges)) != len(self.edges):
            raise LatticeError("duplicate edge")
        object.__setattr__(self, "_adj", tuple(tuple(a) for a in adj))
        object.__setattr__(self, "_inc", tuple(tuple(i) for i in inc))
        object.__setattr__(self, "_edge_index", {uv: e for e, uv in enumerate(self.edges)})

    def __eq__(self, other) -> bool:
        if not isinstance(other, LatticeGraph):
            return NotImplemented
        return (self.coords, self.edges, self.kind, self.params) == (other.coords, other.edges, other.kind, other.params)

    def __hash__(self) -> int:
        return hash((self.coords, self.edges, self.kind))

    # sizes
    @property
    def n_nodes(self) -> int:
        return len(self.coords)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_qubits(self) -> int:
        return self.n_nodes + self.n_edges

    @property
    def nodes(self) -> range:
        return range(self.n_nodes)

    def degree(self, node: int) -> int:
        return len(self._inc[self._check_node(node)])

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(i) for i in self._inc], dtype=int)

    def count_degree(self, d: int) -> int:
        return int(np.sum(self.degrees == d))

    def neighbors(self, node: int) -> tuple[int, ...]:
        return self._adj[self._check_node(node)]

    def incident_edges(self, node: int) -> tuple[int, ...]:
        return self._inc[self._check_node(node)]

    def edge_index(self, u: int, v: int) -> int:
        key = (min(u, v), max(u, v))
        if key not in self._edge_index:
            raise LatticeError(f"nodes {u} and {v} are not adjacent")
        return self._edge_index[key]

    def qubit_of_node(self, node: int) -> int:
        return self._check_node(node)

    def qubit_of_edge(self, edge: int) -> int:
        if not 0 <= edge < self.n_edges:
            raise LatticeError(f"unknown edge id {edge}")
        return self.n_nodes + edge

    @property
    def matter_qubits(self) -> list[int]:
        return list(range(self.n_nodes))

    @property
    def gauge_qubits(self) -> list[int]:
        return list(range(self.n_nodes, self.n_qubits))

    def _check_node(self, node: int) -> int:
        if not isinstance(node, (int, np.integer)) or not 0 <= node < self.n_nodes:
            raise LatticeError(f"unknown node id {node!r}")
        return int(node)

    def is_connected(self) -> bool:
        if self.n_nodes == 0:
            return False
        seen = {0}
        todo = [0]
        while todo:
            for w in self._adj[todo.pop()]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return len(seen) == self.n_nodes

    def distances_from(self, node: int) -> np.ndarray:
        """BFS graph distances from ``node`` (``-1`` if unreachable)."""
        dist = np.full(self.n_nodes, -1, dtype=int)
        dist[node] = 0
        queue = deque([node])
        while queue:
            a = queue.popleft()
            for b in self._adj[a]:
                if dist[b] < 0:
                    dist[b] = dist[a] + 1
                    queue.append(b)
        return dist

    def shortest_path(self, a: int, b: int) -> list[int]:
        prev = {a: None}
        queue = deque([a])
        while queue:
            x = queue.popleft()
            if x == b:
                break
            for y in self._adj[x]:
                if y not in prev:
                    prev[y] = x
                    queue.append(y)
        if b not in prev:
            raise LatticeError(f"no path between {a} and {b}")
        path = [b]
        while path[-1] != a:
            path.append(prev[path[-1]])
        return path[::-1]

    @property
    def n_hexagons(self) -> int:
        """Independent cycles, which equals the hexagon count for planar flakes and bricks."""
        return self.n_edges - self.n_nodes + 1

    def metadata(self) -> dict:
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "n_nodes": self.n_nodes,
            "n_edges": self.n_edges,
            "n_qubits": self.n_qubits,
            "n_deg2": self.count_degree(2),
            "n_deg3": self.count_degree(3),
            "n_hexagons": self.n_hexagons,
        }

    # export
    def to_text(self) -> str:
        lines = [f"# lattice {self.kind} {json.dumps(self.params, sort_keys=True)}"]
        for i, (x, y) in enumerate(self.coords):
            lines.append(f"node {i} {x!r} {y!r}")
        for e, (u, v) in enumerate(self.edges):
            lines.append(f"edge {e} {u} {v}")
        for i in self.nodes:
            lines.append(f"qubit node {i} {self.qubit_of_node(i)}")
        for e in range(self.n_edges):
            lines.append(f"qubit edge {e} {self.qubit_of_edge(e)}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "nodes": [{"id": i, "x": x, "y": y} for i, (x, y) in enumerate(self.coords)],
            "edges": [{"id": e, "u": u, "v": v} for e, (u, v) in enumerate(self.edges)],
            "qubit_of_node": [self.qubit_of_node(i) for i in self.nodes],
            "qubit_of_edge": [self.qubit_of_edge(e) for e in range(self.n_edges)],
            "metadata": self.metadata(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LatticeGraph":
        nodes = sorted(data["nodes"], key=lambda d: d["id"])
        edges = sorted(data["edges"], key=lambda d: d["id"])
        lat = cls(
            coords=tuple((float(d["x"]), float(d["y"])) for d in nodes),
            edges=tuple((int(d["u"]), int(d["v"])) for d in edges),
            kind=data["kind"],
            params=dict(data.get("params", {})),
        )
        _check_qubit_map(lat, data.get("qubit_of_node"), data.get("qubit_of_edge"))
        return lat

    @classmethod
    def from_text(cls, text: str) -> "LatticeGraph":
        kind, params = "custom", {}
        nodes: dict[int, tuple[float, float]] = {}
        edges: dict[int, tuple[int, int]] = {}
        qn: dict[int, int] = {}
        qe: dict[int, int] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split(None, 2)
                if len(parts) >= 2 and parts[0] == "lattice":
                    kind = parts[1]
                    if len(parts) == 3:
                        params = json.loads(parts[2])
                continue
            tok = line.split()
            try:
                if tok[0] == "node":
                    nodes[int(tok[1])] = (float(tok[2]), float(tok[3]))
                elif tok[0] == "edge":
                    edges[int(tok[1])] = (int(tok[2]), int(tok[3]))
                elif tok[0] == "qubit":
                    (qn if tok[1] == "node" else qe)[int(tok[2])] = int(tok[3])
                else:
                    raise LatticeError(f"line {lineno}: unknown record {tok[0]!r}")
            except (IndexError, ValueError) as exc:
                raise LatticeError(f"line {lineno}: malformed record: {raw!r}") from exc
        lat = cls(
            coords=tuple(nodes[i] for i in sorted(nodes)),
            edges=tuple(edges[i] for i in sorted(edges)),
            kind=kind,
            params=params,
        )
        _check_qubit_map(
            lat,
            [qn[i] for i in sorted(qn)] if qn else None,
            [qe[i] for i in sorted(qe)] if qe else None,
        )
        return lat


def _check_qubit_map(lat: LatticeGraph, qn, qe) -> None:
    if qn is not None and list(qn) != [lat.qubit_of_node(i) for i in lat.nodes]:
        raise LatticeError("qubit map for nodes differs from the canonical numbering")
    if qe is not None and list(qe) != [lat.qubit_of_edge(e) for e in range(lat.n_edges)]:
        raise LatticeError("qubit map for edges differs from the canonical numbering")


def _from_points(points: Iterable[tuple[float, float]], links: Iterable[tuple[int, int]], kind: str, params: dict) -> LatticeGraph:
    points = list(points)
    # row-major: bottom row first, then left to right
    order = sorted(range(len(points)), key=lambda i: (round(points[i][1], 6), round(points[i][0], 6)))
    relabel = {old: new for new, old in enumerate(order)}
    coords = tuple((round(points[i][0], 9) + 0.0, round(points[i][1], 9) + 0.0) for i in order)
    edges = sorted({(min(relabel[a], relabel[b]), max(relabel[a], relabel[b])) for a, b in links})
    return LatticeGraph(coords=coords, edges=tuple(edges), kind=kind, params=params)


def _hexagon_graph(centres: list[tuple[float, float]], kind: str, params: dict) -> LatticeGraph:
    # pointy-top unit hexagons; shared corners are merged by rounded position
    index: dict[tuple[float, float], int] = {}
    points: list[tuple[float, float]] = []
    links: set[tuple[int, int]] = set()
    for cx, cy in centres:
        ring = []
        for k in range(6):
            ang = math.pi / 6 + k * math.pi / 3
            p = (cx + math.cos(ang), cy + math.sin(ang))
            key = (round(p[0], 6) + 0.0, round(p[1], 6) + 0.0)
            if key not in index:
                index[key] = len(points)
                points.append(p)
            ring.append(index[key])
        for k in range(6):
            a, b = ring[k], ring[(k + 1) % 6]
            links.add((min(a, b), max(a, b)))
    return _from_points(points, links, kind, params)


def build_flake(R: int) -> LatticeGraph:
    """Hexagonal flake with ``3R^2 + 3R + 1`` plaquettes around a central one."""
    if int(R) != R or R < 0:
        raise LatticeError(f"R must be a non-negative integer, got {R!r}")
    R = int(R)
    centres = []
    for q in range(-R, R + 1):
        for r in range(-R, R + 1):
            if abs(q + r) <= R:
                centres.append((math.sqrt(3) * (q + r / 2), 1.5 * r))
    return _hexagon_graph(centres, "flake", {"R": R})


def build_brick(rows: int, cols: int) -> LatticeGraph:
    """``rows`` rows of ``cols`` hexagons, odd rows shifted by half a hexagon."""
    if int(rows) != rows or int(cols) != cols or rows < 1 or cols < 1:
        raise LatticeError(f"rows and cols must be positive integers, got {(rows, cols)!r}")
    rows, cols = int(rows), int(cols)
    centres = [
        (math.sqrt(3) * (i + 0.5 * (j % 2)), 1.5 * j)
        for j in range(rows)
        for i in range(cols)
    ]
    return _hexagon_graph(centres, "brick", {"rows": rows, "cols": cols})


def build_ladder() -> LatticeGraph:
    """Two hexagons sharing one link (10 nodes, 11 edges, 21 qubits)."""
    lat = build_brick(1, 2)
    return LatticeGraph(lat.coords, lat.edges, "ladder", {"rows": 1, "cols": 2})


def build_chain(n_sites: int) -> LatticeGraph:
    """Open (1+1)-D chain: ``n_sites`` matter sites and ``n_sites - 1`` links."""
    if int(n_sites) != n_sites or n_sites < 2:
        raise LatticeError(f"a chain needs at least 2 sites, got {n_sites!r}")
    n = int(n_sites)
    return _from_points([(float(i), 0.0) for i in range(n)], [(i, i + 1) for i in range(n - 1)], "chain", {"n_sites": n})


def build_lattice(spec: dict) -> LatticeGraph:
    """Build a lattice from a ``{"kind": ..., ...}`` mapping."""
    kind = spec.get("kind")
    if kind == "flake":
        return build_flake(spec["R"])
    if kind == "brick":
        return build_brick(spec["rows"], spec["cols"])
    if kind == "ladder":
        return build_ladder()
    if kind == "chain":
        return build_chain(spec["n_sites"])
    raise LatticeError(f"unknown lattice kind {kind!r}")


def validate_lattice(lat: LatticeGraph) -> None:
    """Check the structural invariants; raise ``LatticeError`` on failure."""
    if not lat.is_connected():
        raise LatticeError("lattice is not connected")
    deg = lat.degrees
    lo = 1 if lat.kind == "chain" else 2
    if deg.min() < lo or deg.max() > 3:
        raise LatticeError(f"node degrees outside [{lo}, 3]: {sorted(set(deg.tolist()))}")
    if int(deg.sum()) != 2 * lat.n_edges:
        raise LatticeError("handshake lemma violated")
    if lat.kind == "flake":
        R = lat.params["R"]
        if lat.n_hexagons != 3 * R * R + 3 * R + 1:
            raise LatticeError("Euler count does not match the flake size")


def gauge_generator_support(lat: LatticeGraph, node: int) -> GaugeGeneratorSupport:
    qubits = (lat.qubit_of_node(node),) + tuple(lat.qubit_of_edge(e) for e in lat.incident_edges(node))
    return GaugeGeneratorSupport(node=int(node), qubits=qubits)


def gauge_generator(lat: LatticeGraph, node: int) -> PauliString:
    """``G_n``: Z on the matter qubit and on every incident gauge qubit."""
    return PauliString.from_letters({q: "Z" for q in gauge_generator_support(lat, node).qubits})


def gauge_masks(lat: LatticeGraph) -> list[int]:
    """Bit masks of the Gauss-check supports, one per node."""
    return [sum(1 << q for q in gauge_generator_support(lat, n).qubits) for n in lat.nodes]


def matter_bipartition(lat: LatticeGraph) -> tuple[frozenset[int], frozenset[int]]:
    """Proper two-colouring of the matter nodes.

    Adjacent nodes share a gauge qubit, so each colour class can receive its
    CNOTs from distinct gauge controls in the same step.
    """
    colour = [-1] * lat.n_nodes
    conflicts = []
    for start in lat.nodes:
        if colour[start] >= 0:
            continue
        colour[start] = 0
        queue = deque([start])
        while queue:
            a = queue.popleft()
            for b in lat.neighbors(a):
                if colour[b] < 0:
                    colour[b] = 1 - colour[a]
                    queue.append(b)
                elif colour[b] == colour[a] and a < b:
                    conflicts.append((a, b))
    if conflicts:
        raise BipartitionError(conflicts)
    A = frozenset(n for n in lat.nodes if colour[n] == 0)
    B = frozenset(n for n in lat.nodes if colour[n] == 1)
    return A, B


def edge_colouring(lat: LatticeGraph) -> list[int]:
    """Proper edge colouring with ``max degree`` colours (Konig), via Kempe chains."""
    ncol = max(int(lat.degrees.max()), 1)
    colour = [-1] * lat.n_edges
    # used[node][c] -> edge id using colour c at node
    used: list[dict[int, int]] = [dict() for _ in lat.nodes]
    for e, (u, v) in enumerate(lat.edges):
        free_u = next(c for c in range(ncol) if c not in used[u])
        free_v = next(c for c in range(ncol) if c not in used[v])
        if free_u != free_v and free_u in used[v]:
            # swap colours free_u <-> free_v along the alternating path from v
            a, b = free_u, free_v
            path = []
            x, c = v, a
            while c in used[x]:
                f = used[x][c]
                path.append(f)
                p, q = lat.edges[f]
                x = q if p == x else p
                c = b if c == a else a
            for f in path:
                p, q = lat.edges[f]
                del used[p][colour[f]]
                del used[q][colour[f]]
            for f in path:
                p, q = lat.edges[f]
                colour[f] = b if colour[f] == a else a
                used[p][colour[f]] = f
                used[q][colour[f]] = f
        c = free_u
        colour[e] = c
        used[u][c] = e
        used[v][c] = e
    for n in lat.nodes:
        cs = [colour[e] for e in lat.incident_edges(n)]
        if len(set(cs)) != len(cs):
            raise LatticeError("edge colouring failed")
    return colour
