"""End-to-end quench experiments: compile, execute, correct, mitigate, estimate."""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import __version__
from .analytics import QuenchParams
from .compiler import Circuit, calibration_circuit, cliffordize, insert_gdd, stabilizer_expectation, trotter_circuit, twirl
from .correction import decode_table, postselect
from .lattice import LatticeGraph, build_lattice
from .mitigation import (
    DEFAULT_B,
    DEFAULT_LEVEL,
    REFUSAL_THRESHOLD,
    Estimate,
    MitigationRefused,
    bootstrap,
    odr_estimate,
    projector_expansion,
)
from .model import prepare_string_state
from .pauli import PauliString
from .simulator import NoiseModel, ShotTable, apply_circuit, run_trajectories
from .statevector import DEFAULT_QUBIT_CAP, StateVector, check_capacity


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, reason: str):
        self.field = field_name
        self.reason = reason
        super().__init__(f"{field_name}: {reason}")


class ExperimentError(RuntimeError):
    def __init__(self, t: float, exc: Exception):
        self.t = t
        self.cause = exc
        super().__init__(f"at t={t}: {exc}")


@dataclass(frozen=True)
class Toggles:
    twirl: bool = False
    gdd: bool = False
    gsc: bool = False
    odr: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    lattice: dict
    m: float
    g: float
    lam: float
    dt: float
    times: tuple[float, ...]
    initial: tuple = ()
    observables: tuple[str, ...] = ("occupation:*",)
    noise: NoiseModel | None = None
    shots: int = 10_000
    seed: int = 0
    toggles: Toggles = Toggles()
    n_twirls: int = 8
    calibration: str = "mirror"
    min_keep: int | None = None
    keep_fraction: float = 0.5
    refusal_threshold: float = REFUSAL_THRESHOLD
    bootstrap_B: int = DEFAULT_B
    bootstrap_level: float = DEFAULT_LEVEL
    exact: bool = False
    qubit_cap: int = DEFAULT_QUBIT_CAP

    def __post_init__(self):
        for name in ("m", "g", "lam", "dt"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(name, "must be a finite number")
        if self.dt <= 0:
            raise ConfigError("dt", "must be positive")
        ts = tuple(float(t) for t in self.times)
        if not ts:
            raise ConfigError("times", "at least one time point is required")
        if any(t < 0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
            raise ConfigError("times", "must be non-negative and strictly increasing")
        object.__setattr__(self, "times", ts)
        if not isinstance(self.shots, int) or self.shots < 1:
            raise ConfigError("shots", "must be a positive integer")
        if self.n_twirls < 1:
            raise ConfigError("n_twirls", "must be at least 1")
        if self.calibration not in ("mirror", "clifford"):
            raise ConfigError("calibration", "must be 'mirror' or 'clifford'")
        if not 0 < self.keep_fraction <= 1:
            raise ConfigError("keep_fraction", "must lie in (0, 1]")
        if self.min_keep is not None and not 1 <= self.min_keep <= self.shots:
            raise ConfigError("min_keep", "must lie between 1 and shots")
        if self.bootstrap_B < 100:
            raise ConfigError("bootstrap.B", "must be at least 100")
        if not 0 < self.bootstrap_level < 1:
            raise ConfigError("bootstrap.level", "must lie in (0, 1)")
        if self.exact and self.noise is not None and not self.noise.is_noiseless:
            raise ConfigError("exact", "exact expectations need a noiseless run")

    def params(self, t: float) -> QuenchParams:
        return QuenchParams(self.m, self.g, self.lam, t, self.dt)

    def to_dict(self) -> dict:
        d = {
            "lattice": dict(self.lattice),
            "params": {"m": self.m, "g": self.g, "lam": self.lam, "dt": self.dt},
            "times": list(self.times),
            "initial": [list(p) if isinstance(p, (list, tuple)) else p for p in self.initial],
            "observables": list(self.observables),
            "noise": None if self.noise is None else self.noise.to_dict(),
            "shots": self.shots,
            "seed": self.seed,
            "mitigation": {
                **asdict(self.toggles),
                "n_twirls": self.n_twirls,
                "calibration": self.calibration,
                "min_keep": self.min_keep,
                "keep_fraction": self.keep_fraction,
                "refusal_threshold": self.refusal_threshold,
            },
            "bootstrap": {"B": self.bootstrap_B, "level": self.bootstrap_level},
            "exact": self.exact,
            "qubit_cap": self.qubit_cap,
        }
        return d

    def config_hash(self) -> str:
        body = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(body.encode()).hexdigest()[:16]

    def with_toggles(self, **kw) -> "ExperimentConfig":
        return replace(self, toggles=replace(self.toggles, **kw))


# observables


def observable_terms(spec: str, lat: LatticeGraph) -> list[tuple[str, list[tuple[float, PauliString]]]]:
    """Expand an observable spec into named Z-string expansions.

    ``occupation:<n>``  (1 - Z_n)/2, ``occupation:*`` for all nodes;
    ``field:<e>``       Z on gauge link ``e``, ``field:*`` for all links;
    ``string:<a>,<b>,..`` product of occupations;
    ``z:<q>,<q>,..``    a raw Z string on qubits.
    """
    kind, _, arg = spec.partition(":")
    if not arg:
        raise ConfigError("observables", f"malformed observable {spec!r}")
    try:
        if kind == "occupation":
            nodes = list(lat.nodes) if arg == "*" else [int(arg)]
            return [(f"occupation:{n}", projector_expansion([lat.qubit_of_node(n)])) for n in nodes]
        if kind == "field":
            edges = range(lat.n_edges) if arg == "*" else [int(arg)]
            return [(f"field:{e}", [(1.0, PauliString.single("Z", lat.qubit_of_edge(e)))]) for e in edges]
        if kind == "string":
            nodes = [int(x) for x in arg.split(",")]
            return [(spec, projector_expansion([lat.qubit_of_node(n) for n in nodes]))]
        if kind == "z":
            qs = [int(x) for x in arg.split(",")]
            if any(not 0 <= q < lat.n_qubits for q in qs):
                raise ValueError("qubit outside the register")
            return [(spec, [(1.0, PauliString.from_letters({q: "Z" for q in qs}))])]
    except ValueError as exc:
        raise ConfigError("observables", f"{spec!r}: {exc}") from exc
    raise ConfigError("observables", f"unknown observable kind {kind!r}")


def expand_observables(specs: Sequence[str], lat: LatticeGraph) -> list[tuple[str, list[tuple[float, PauliString]]]]:
    out = []
    for s in specs:
        out += observable_terms(s, lat)
    return out


def string_correlator(source, sites: Sequence[int], lat: LatticeGraph, B: int = DEFAULT_B, level: float = DEFAULT_LEVEL, seed=None) -> Estimate:
    """``<prod_n (1 - Z_n)/2>`` over matter sites, from a state (exact) or shots (bootstrap)."""
    for n in sites:
        if not isinstance(n, (int, np.integer)) or not 0 <= n < lat.n_nodes:
            raise ValueError(f"site {n!r} is not a matter site")
    qubits = [lat.qubit_of_node(n) for n in sites]
    if isinstance(source, ShotTable):
        vals = np.all(source.bits[:, qubits] == 1, axis=1).astype(float)
        return bootstrap(vals, B=B, level=level, seed=seed)
    psi = source.amplitudes if isinstance(source, StateVector) else np.asarray(source)
    idx = np.arange(psi.shape[0])
    mask = sum(1 << q for q in qubits)
    val = float(np.sum(np.abs(psi[(idx & mask) == mask]) ** 2))
    return Estimate.exact(val)


# time series


@dataclass
class TimeSeries:
    times: list[float]
    observables: list[str]
    estimates: dict[str, list[Estimate]]
    provenance: dict = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")
        for o in self.observables:
            if len(self.estimates[o]) != len(self.times):
                raise ValueError(f"observable {o} needs one estimate per time")

    def means(self, obs: str) -> np.ndarray:
        return np.array([e.mean for e in self.estimates[obs]])

    def matrix(self) -> np.ndarray:
        return np.stack([self.means(o) for o in self.observables], axis=1)

    def same_data(self, other: "TimeSeries") -> bool:
        return (
            self.times == other.times
            and self.observables == other.observables
            and all([e.to_dict() for e in self.estimates[o]] == [e.to_dict() for e in other.estimates[o]] for o in self.observables)
            and self.provenance == other.provenance
        )


def derive_seed(master: int, *keys: int) -> int:
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


# seed roles
_SIM, _CAL, _GDD, _TWIRL_SIM, _TWIRL_CAL, _BOOT = range(6)


def _split(n: int, parts: int) -> list[int]:
    base, rem = divmod(n, parts)
    return [base + (1 if j < rem else 0) for j in range(parts)]


def _run_tables(circuits: list[Circuit], noise, shots: int, master: int, cap: int) -> ShotTable:
    tables, offset = [], 0
    for j, (c, n) in enumerate(zip(circuits, _split(shots, len(circuits)))):
        if n == 0:
            continue
        tables.append(run_trajectories(c, noise, n, master, twirl_index=j, shot_offset=offset, cap=cap))
        offset += n
    return ShotTable.concat(tables) if len(tables) > 1 else tables[0]


def _ideal_values(cal: Circuit, terms: list[PauliString], mode: str, initial: int) -> np.ndarray:
    if mode == "mirror":
        return np.array([float(p.diagonal_values(np.array([initial]))[0]) for p in terms])
    return np.array([stabilizer_expectation(cal, p, initial) for p in terms])


def run_quench(config: ExperimentConfig, lattice: LatticeGraph | None = None) -> TimeSeries:
    """Run every time point of the configured quench and collect estimates."""
    lat = lattice or build_lattice(config.lattice)
    check_capacity(lat.n_qubits, config.qubit_cap)
    init = prepare_string_state(lat, list(config.initial))
    obs = expand_observables(config.observables, lat)
    names = [name for name, _ in obs]
    estimates: dict[str, list[Estimate]] = {n: [] for n in names}
    shot_log = []
    refusals = []
    tog = config.toggles
    start = time.time()
    for i, t in enumerate(config.times):
        try:
            entry = _time_point(config, lat, init.index, obs, i, t, estimates, refusals)
        except (MitigationRefused, ConfigError):
            raise
        except Exception as exc:  # noqa: BLE001 - add time context
            raise ExperimentError(t, exc) from exc
        shot_log.append(entry)
    provenance = {
        "config_hash": config.config_hash(),
        "version": f"z2higgs-{__version__}",
        "lattice": lat.metadata(),
        "stand_in": "desk-scale lattice in place of the 35-144 qubit hardware lattices",
        "toggles": asdict(tog),
        "calibration": config.calibration,
        "bit_order": "little-endian: qubit q is bit q",
        "energy_units": "lambda" if config.lam != 0 else "absolute",
    }
    manifest = {
        "config_hash": provenance["config_hash"],
        "versions": {"z2higgs": __version__},
        "seeds": {"master": config.seed},
        "wall_clock_s": time.time() - start,
        "shots": shot_log,
        "refusals": refusals,
    }
    return TimeSeries(list(config.times), names, estimates, provenance, manifest)


def _time_point(config, lat, init_index, obs, i, t, estimates, refusals) -> dict:
    tog = config.toggles
    base = trotter_circuit(lat, config.params(t), initial=init_index)
    if config.exact:
        psi = apply_circuit(None, base, cap=config.qubit_cap)
        for name, terms in obs:
            val = sum(c * _diag_expect(psi, p) for c, p in terms)
            estimates[name].append(Estimate.exact(val))
        return {"t": t, "generated": 0, "post_selected": 0, "used": 0, "L": base.n_layers}
    n_inst = config.n_twirls if (tog.twirl or tog.gdd) else 1
    sims, cals = [], []
    for j in range(n_inst):
        c = insert_gdd(base, derive_seed(config.seed, i, _GDD, j)) if tog.gdd else base
        cal = calibration_circuit(c if config.calibration == "mirror" else base, config.calibration) if tog.odr else None
        if tog.twirl:
            c = twirl(c, derive_seed(config.seed, i, _TWIRL_SIM, j))
            if cal is not None:
                cal = twirl(cal, derive_seed(config.seed, i, _TWIRL_CAL, j))
        sims.append(c)
        if cal is not None:
            cals.append(cal)
    sim_table = _run_tables(sims, config.noise, config.shots, derive_seed(config.seed, i, _SIM), config.qubit_cap)
    cal_table = _run_tables(cals, config.noise, config.shots, derive_seed(config.seed, i, _CAL), config.qubit_cap) if cals else None
    generated = sim_table.n_shots
    if tog.gsc:
        keep = config.min_keep if config.min_keep is not None else max(1, math.ceil(config.keep_fraction * config.shots))
        sim_table = postselect(decode_table(sim_table, lat), keep)
        if cal_table is not None:
            cal_table = postselect(decode_table(cal_table, lat), keep)
    boot_seed = derive_seed(config.seed, i, _BOOT)
    cal_ref = cliffordize(base) if config.calibration == "clifford" else None
    for k, (name, terms) in enumerate(obs):
        coeffs = np.array([c for c, _ in terms])
        paulis = [p for _, p in terms]
        sim_cols = np.stack([sim_table.parities(p) for p in paulis], axis=1)
        kw = dict(B=config.bootstrap_B, level=config.bootstrap_level, seed=np.random.default_rng([boot_seed, k]))
        if cal_table is not None:
            cal_cols = np.stack([cal_table.parities(p) for p in paulis], axis=1)
            ideals = _ideal_values(cal_ref if cal_ref is not None else cals[0], paulis, config.calibration, init_index)
            try:
                est = odr_estimate(sim_cols, coeffs, cal_cols, ideals, threshold=config.refusal_threshold, **kw)
            except MitigationRefused as exc:
                est = odr_estimate(sim_cols, coeffs, **kw)
                est.mitigation = {"factor": exc.factor, "refused": True}
                refusals.append({"t": t, "observable": name, "factor": exc.factor})
        else:
            est = odr_estimate(sim_cols, coeffs, **kw)
        estimates[name].append(est)
    return {
        "t": t,
        "L": base.n_layers,
        "generated": generated,
        "post_selected": sim_table.n_shots,
        "used": sim_table.n_shots,
        "calibration_generated": 0 if cal_table is None else config.shots,
        "calibration_used": 0 if cal_table is None else cal_table.n_shots,
        "flip_threshold": sim_table.metadata.get("flip_threshold"),
    }


def _diag_expect(psi: StateVector, p: PauliString) -> float:
    probs = psi.probabilities()
    return float(probs @ p.diagonal_values(np.arange(probs.shape[0])))


# sweeps

SWEEP_KEYS = ("m", "g", "lam", "dt", "noise_scale", "twirl", "gdd", "gsc", "odr", "calibration", "toggles")


def _apply_point(config: ExperimentConfig, base_noise: NoiseModel | None, point: dict) -> ExperimentConfig:
    cfg = config
    for key, val in point.items():
        if key in ("m", "g", "lam", "dt"):
            cfg = replace(cfg, **{key: float(val)})
        elif key == "noise_scale":
            cfg = replace(cfg, noise=None if base_noise is None else base_noise.scaled(float(val)))
        elif key in ("twirl", "gdd", "gsc", "odr"):
            cfg = cfg.with_toggles(**{key: bool(val)})
        elif key == "calibration":
            cfg = replace(cfg, calibration=str(val))
        elif key == "toggles":
            cfg = replace(cfg, toggles=Toggles(**val))
    return cfg


def sweep(config: ExperimentConfig, grid: dict | None = None) -> list[tuple[dict, TimeSeries]]:
    """Independent runs over the Cartesian product of ``grid``; seeds are shared across points."""
    grid = grid or {}
    for key in grid:
        if key not in SWEEP_KEYS:
            raise ConfigError(f"grid.{key}", f"cannot sweep over {key!r}")
    if not grid:
        return [({}, run_quench(config))]
    keys = list(grid)
    lat = build_lattice(config.lattice)
    out = []
    for values in itertools.product(*(grid[k] for k in keys)):
        point = dict(zip(keys, values))
        ts = run_quench(_apply_point(config, config.noise, point), lattice=lat)
        ts.provenance["sweep_hash"] = config.config_hash()
        ts.provenance["sweep_point"] = point
        out.append((point, ts))
    return out


def mean_abs_deviation(series: TimeSeries, reference: dict[str, np.ndarray]) -> float:
    devs = [np.abs(series.means(o) - np.asarray(reference[o])) for o in series.observables if o in reference]
    return float(np.mean(np.concatenate(devs)))
