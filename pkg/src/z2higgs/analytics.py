"""Closed-form oracles: the m=0 solution, quench frequencies and the Trotter error bound."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .lattice import LatticeGraph
from .pauli import PauliString


@dataclass(frozen=True)
class QuenchParams:
    m: float
    g: float
    lam: float
    t: float
    dt: float

    def __post_init__(self):
        for name in ("m", "g", "lam", "t", "dt"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.t < 0:
            raise ValueError("t must be non-negative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


def glassy_amplitude(g: float, lam: float, t: float) -> float:
    """Per-link amplitude ``a(t)`` of the m=0 quench."""
    w2 = lam * lam + g * g
    if w2 == 0.0:
        return 1.0
    return 1.0 - 2.0 * lam * lam / w2 * math.sin(t * math.sqrt(w2)) ** 2


def m0_ansatz_angle(g: float, lam: float) -> float:
    """Ground-state rotation angle ``arctan(lam/g)/2`` of each link at m=0."""
    if g == 0 and lam == 0:
        raise ValueError("g and lam cannot both vanish")
    return 0.5 * math.atan2(abs(lam), abs(g))


def m0_gap(g: float, lam: float) -> float:
    return 2.0 * math.sqrt(g * g + lam * lam)


def m0_electric_field(g: float, lam: float) -> float:
    """Ground-state ``<Z_e>`` at m=0, i.e. ``cos 2 theta``."""
    return abs(g) / math.sqrt(g * g + lam * lam)


def yoyo_frequency(g: float) -> float:
    return 2.0 * abs(g)


def bending_frequency(m: float, g: float, lam: float) -> float:
    if g == 0:
        raise ValueError("bending frequency needs g != 0")
    if 2 * m + g == 0:
        raise ValueError("bending frequency needs 2m + g != 0")
    return lam * lam / g - lam * lam / (2 * m + g)


def period(omega: float) -> float:
    return 2.0 * math.pi / omega


def effective_plaquette(m: float, lam: float, gamma: float = 0.25) -> float:
    if m == 0:
        raise ValueError("effective plaquette coupling needs m != 0")
    return gamma * lam**6 / m**5


def fit_plaquette_gamma(ms, gaps, lam: float = 1.0) -> float:
    """Estimate ``gamma`` from single-hexagon gaps ``2 gamma lam^6 m^-5`` at large ``m``.

    Fits ``gap m^5 / (2 lam^6) = gamma + c / m^2`` by least squares and
    returns the intercept.
    """
    ms = np.asarray(ms, dtype=float)
    y = np.asarray(gaps, dtype=float) * ms**5 / (2 * lam**6)
    A = np.stack([np.ones_like(ms), ms**-2], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0])


# Trotter error bound


def trotter_error_terms_from_counts(
    n_edges: int, n_deg2: int, n_deg3: int, m: float, g: float, lam: float, t: float, dt: float
) -> dict[str, float]:
    """Hand-expanded bound, split by coupling monomial."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    a = t * dt * dt / 12.0
    b = t * dt * dt / 24.0
    return {
        "g*lam^2": a * 4 * n_edges * abs(g * lam * lam),
        "m*lam^2": a * (16 * n_deg2 + 36 * n_deg3) * abs(m * lam * lam),
        "m^2*lam": b * (8 * n_edges * abs(m * m * lam) + n_edges * 8 * abs(m * m * lam)),
        "m*g*lam": b * 16 * n_edges * abs(m * g * lam),
        "g^2*lam": b * n_edges * 4 * abs(g * g * lam),
    }


def trotter_error_bound_from_counts(
    n_edges: int, n_deg2: int, n_deg3: int, m: float, g: float, lam: float, t: float, dt: float
) -> float:
    a = t * dt * dt / 12.0
    b = t * dt * dt / 24.0
    if dt <= 0:
        raise ValueError("dt must be positive")
    first = 4 * n_edges * abs(g * lam * lam) + (16 * n_deg2 + 36 * n_deg3) * abs(m * lam * lam)
    second = (
        8 * n_edges * abs(m * m * lam)
        + 16 * n_edges * abs(m * g * lam)
        + n_edges * abs(4 * g * g * lam + 8 * m * m * lam)
    )
    return a * first + b * second


def trotter_error_bound(lat: LatticeGraph, m: float, g: float, lam: float, t: float, dt: float) -> float:
    """Upper bound on the second-order Trotter state error after time ``t``."""
    return trotter_error_bound_from_counts(
        lat.n_edges, lat.count_degree(2), lat.count_degree(3), m, g, lam, t, dt
    )


def commutator_error_terms(lat: LatticeGraph, m: float, g: float, lam: float, t: float, dt: float) -> dict[str, float]:
    """Term-wise triangle-inequality bound built from symbolic nested commutators.

    For ``H = A + B`` with ``A`` the field part and ``B`` the interaction, the
    step error is at most ``dt^3/12 ||[B,[B,A]]|| + dt^3/24 ||[A,[A,B]]||``.
    Each non-vanishing nested commutator of three Pauli terms has norm
    ``4 |c c' c''|``. Contributions are grouped by coupling monomial.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    mass = [("m", -m, PauliString.single("Z", lat.qubit_of_node(n))) for n in lat.nodes]
    elec = [("g", -g, PauliString.single("Z", lat.qubit_of_edge(e))) for e in range(lat.n_edges)]
    inter = []
    for e, (u, v) in enumerate(lat.edges):
        p = PauliString.from_letters(
            {lat.qubit_of_node(u): "X", lat.qubit_of_edge(e): "X", lat.qubit_of_node(v): "X"}
        )
        inter.append(("lam", -lam, p))
    field = mass + elec
    n_steps = t / dt
    out: dict[str, float] = defaultdict(float)

    def nested(outer, middle, inner, weight):
        for s1, c1, p1 in outer:
            for s2, c2, p2 in middle:
                for s3, c3, p3 in inner:
                    if p2.commutes(p3):
                        continue
                    if p1.commutes(p2 * p3):
                        continue
                    key = _monomial((s1, s2, s3))
                    out[key] += weight * 4 * abs(c1 * c2 * c3)

    nested(inter, inter, field, n_steps * dt**3 / 12.0)
    nested(field, field, inter, n_steps * dt**3 / 24.0)
    return dict(out)


def _monomial(symbols: tuple[str, ...]) -> str:
    counts = {s: symbols.count(s) for s in ("m", "g", "lam")}
    parts = []
    for s in ("m", "g", "lam"):
        if counts[s] == 1:
            parts.append(s)
        elif counts[s] > 1:
            parts.append(f"{s}^{counts[s]}")
    return "*".join(parts)
