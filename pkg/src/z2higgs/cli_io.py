"""Configuration loading, provenance stamping and the on-disk formats."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .experiments import ConfigError, ExperimentConfig, TimeSeries, Toggles
from .lattice import build_lattice
from .mitigation import DEFAULT_B, DEFAULT_LEVEL, Estimate
from .simulator import NoiseModel, ShotTable

BIT_ORDER = "little-endian: character q of a bitstring is qubit q"
ENV_SEED = "Z2HIGGS_SEED"
ENV_OUTPUT = "Z2HIGGS_OUTPUT_DIR"
DEFAULT_SHOTS = 10_000
DEFAULT_T_MAX = 4.0


class ConfigParseError(ValueError):
    def __init__(self, line: int | None, column: int | None, reason: str):
        self.line = line
        self.column = column
        self.reason = reason
        where = f"line {line}, column {column}" if line is not None else "unknown position"
        super().__init__(f"{where}: {reason}")


class HashMismatchError(ValueError):
    pass


# schema: section -> allowed keys (None means free-form)
_TOP = {
    "lattice", "params", "times", "time_grid", "initial", "observables", "noise",
    "shots", "seed", "mitigation", "bootstrap", "exact", "qubit_cap",
}
_SECTIONS = {
    "params": {"m", "g", "lam", "dt"},
    "time_grid": {"t_max", "step"},
    "noise": {"p1", "p1_weights", "p2", "p2_weights", "p_meas", "coherent_zz", "virtual_z", "terminal", "scale"},
    "mitigation": {"twirl", "gdd", "gsc", "odr", "n_twirls", "calibration", "min_keep", "keep_fraction", "refusal_threshold"},
    "bootstrap": {"B", "level"},
    "lattice": {"kind", "R", "rows", "cols", "n_sites"},
}


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    for key in d:
        if key not in allowed:
            raise ConfigError(f"{where}{key}", f"unknown key {key!r}")


def _section(d: dict, name: str) -> dict:
    sec = d.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(name, "must be a mapping")
    _reject_unknown(sec, _SECTIONS[name], f"{name}.")
    return sec


def _number(sec: dict, key: str, where: str) -> float:
    if key not in sec:
        raise ConfigError(f"{where}.{key}", "is required (no default for physics parameters)")
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}", "must be a number")
    return float(v)


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(where, "must be an integer")
    return v


def default_times(dt: float, t_max: float = DEFAULT_T_MAX, step: float | None = None) -> tuple[float, ...]:
    """Time points from 0 to ``t_max``; the default step is two Trotter steps."""
    step = 2 * dt if step is None else step
    if step <= 0 or t_max < 0:
        raise ConfigError("time_grid", "step must be positive and t_max non-negative")
    n = int(math.floor(t_max / step + 1e-9))
    return tuple(round(k * step, 12) for k in range(n + 1))


def config_from_dict(d: dict, env: dict | None = None) -> ExperimentConfig:
    """Validate a parsed config mapping and apply defaults."""
    if not isinstance(d, dict):
        raise ConfigError("<root>", "config must be a mapping")
    _reject_unknown(d, _TOP, "")
    if "lattice" not in d:
        raise ConfigError("lattice", "is required")
    lattice = _section(d, "lattice")
    if "kind" not in lattice:
        raise ConfigError("lattice.kind", "is required")
    try:
        build_lattice(lattice)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("lattice", f"cannot build lattice: {exc}") from exc
    if "params" not in d:
        raise ConfigError("params", "is required")
    params = _section(d, "params")
    m, g, lam, dt = (_number(params, k, "params") for k in ("m", "g", "lam", "dt"))
    if dt <= 0:
        raise ConfigError("params.dt", "must be positive")
    if "times" in d and "time_grid" in d:
        raise ConfigError("times", "give either times or time_grid, not both")
    if "times" in d:
        times = d["times"]
        if not isinstance(times, list) or not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in times):
            raise ConfigError("times", "must be a list of numbers")
        times = tuple(float(t) for t in times)
    else:
        grid = _section(d, "time_grid")
        times = default_times(dt, float(grid.get("t_max", DEFAULT_T_MAX)), grid.get("step"))
    noise = None
    if d.get("noise") is not None:
        nsec = dict(_section(d, "noise"))
        scale = nsec.pop("scale", 1.0)
        try:
            noise = NoiseModel.from_dict(nsec)
        except (ValueError, TypeError) as exc:
            raise ConfigError("noise", str(exc)) from exc
        if scale != 1.0:
            noise = noise.scaled(float(scale))
    mit = _section(d, "mitigation")
    boot = _section(d, "bootstrap")
    for k in ("twirl", "gdd", "gsc", "odr", "exact"):
        v = (d if k == "exact" else mit).get(k, False)
        if not isinstance(v, bool):
            raise ConfigError(k if k == "exact" else f"mitigation.{k}", "must be true or false")
    seed = d.get("seed", 0)
    env = os.environ if env is None else env
    if env.get(ENV_SEED):
        try:
            seed = int(env[ENV_SEED])
        except ValueError as exc:
            raise ConfigError(ENV_SEED, "must be an integer") from exc
    initial = d.get("initial") or []
    if not isinstance(initial, list) or not all(isinstance(p, list) for p in initial):
        raise ConfigError("initial", "must be a list of node paths")
    observables = d.get("observables", ["occupation:*"])
    if not isinstance(observables, list) or not all(isinstance(o, str) for o in observables):
        raise ConfigError("observables", "must be a list of strings")
    return ExperimentConfig(
        lattice=dict(lattice),
        m=m,
        g=g,
        lam=lam,
        dt=dt,
        times=times,
        initial=tuple(tuple(int(n) for n in p) for p in initial),
        observables=tuple(observables),
        noise=noise,
        shots=_int(d.get("shots", DEFAULT_SHOTS), "shots"),
        seed=_int(seed, "seed"),
        toggles=Toggles(mit.get("twirl", False), mit.get("gdd", False), mit.get("gsc", False), mit.get("odr", False)),
        n_twirls=_int(mit.get("n_twirls", 8), "mitigation.n_twirls"),
        calibration=mit.get("calibration", "mirror"),
        min_keep=None if mit.get("min_keep") is None else _int(mit["min_keep"], "mitigation.min_keep"),
        keep_fraction=float(mit.get("keep_fraction", 0.5)),
        refusal_threshold=float(mit.get("refusal_threshold", 0.05)),
        bootstrap_B=_int(boot.get("B", DEFAULT_B), "bootstrap.B"),
        bootstrap_level=float(boot.get("level", DEFAULT_LEVEL)),
        exact=d.get("exact", False),
        qubit_cap=_int(d.get("qubit_cap", 22), "qubit_cap"),
    )


def parse_yaml(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = None if mark is None else mark.line + 1
        col = None if mark is None else mark.column + 1
        raise ConfigParseError(line, col, exc.problem or str(exc)) from exc
    except yaml.YAMLError as exc:
        raise ConfigParseError(None, None, str(exc)) from exc


def load_config(path, env: dict | None = None) -> ExperimentConfig:
    text = Path(path).read_text()
    return config_from_dict(parse_yaml(text) or {}, env=env)


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=True)


def output_dir(default, config_hash: str | None = None, env: dict | None = None) -> Path:
    """Output directory, overridable by environment; runs go to a per-hash subdirectory."""
    env = os.environ if env is None else env
    base = Path(env.get(ENV_OUTPUT) or default)
    return base / config_hash if config_hash else base


# bit-stable JSON


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = f"{x:.17g}"
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, floats at 17 significant digits."""
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(f"{json.dumps(k)}:{dumps(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# manifest


@dataclass
class RunManifest:
    config_hash: str
    versions: dict = field(default_factory=lambda: {"z2higgs": __version__})
    seeds: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0
    shots: list = field(default_factory=list)
    refusals: list = field(default_factory=list)

    def __post_init__(self):
        for row in self.shots:
            if not row.get("used", 0) <= row.get("post_selected", 0) <= row.get("generated", 0):
                raise ValueError(f"shot accounting violates used <= post-selected <= generated: {row}")

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "versions": self.versions,
            "seeds": self.seeds,
            "wall_clock_s": self.wall_clock_s,
            "shots": self.shots,
            "refusals": self.refusals,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(d["config_hash"], d.get("versions", {}), d.get("seeds", {}), float(d.get("wall_clock_s", 0.0)), d.get("shots", []), d.get("refusals", []))


# time series formats


def timeseries_to_jsonl(ts: TimeSeries) -> str:
    head = {
        "type": "header",
        "bit_order": BIT_ORDER,
        "config_hash": ts.provenance.get("config_hash"),
        "observables": ts.observables,
        "provenance": ts.provenance,
        "manifest": ts.manifest,
    }
    lines = [dumps(head)]
    for i, t in enumerate(ts.times):
        for o in ts.observables:
            lines.append(dumps({"type": "estimate", "t": t, "observable": o, **ts.estimates[o][i].to_dict()}))
    return "\n".join(lines) + "\n"


def timeseries_from_jsonl(text: str) -> TimeSeries:
    rows = [json.loads(ln) for ln in text.splitlines() if ln.strip()]
    if not rows or rows[0].get("type") != "header":
        raise ValueError("missing time series header")
    head, body = rows[0], rows[1:]
    obs = list(head["observables"])
    times = sorted({r["t"] for r in body})
    est = {o: [None] * len(times) for o in obs}
    pos = {t: i for i, t in enumerate(times)}
    for r in body:
        est[r["observable"]][pos[r["t"]]] = Estimate.from_dict(r)
    return TimeSeries(times, obs, est, head.get("provenance", {}), head.get("manifest", {}))


def timeseries_to_csv(ts: TimeSeries) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={ts.provenance.get('config_hash')} manifest=sidecar {BIT_ORDER}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", *ts.observables])
    for i, t in enumerate(ts.times):
        w.writerow([_fmt_float(t), *(_fmt_float(ts.estimates[o][i].mean) for o in ts.observables)])
    return buf.getvalue()


def csv_matrix(text: str) -> tuple[list[float], list[str], np.ndarray, dict]:
    lines = text.splitlines()
    meta = {}
    if lines and lines[0].startswith("#"):
        meta = dict(tok.split("=", 1) for tok in lines[0][1:].split() if "=" in tok)
        lines = lines[1:]
    rows = list(csv.reader(lines))
    names = rows[0][1:]
    data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, len(names) + 1)
    return list(data[:, 0]), names, data[:, 1:], meta


def emit(obj, path, fmt: str | None = None, config_hash: str | None = None) -> list[Path]:
    """Write ``obj`` deterministically; returns the files written (data first)."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".") or "json"
    written = [path]
    if isinstance(obj, TimeSeries):
        if fmt == "jsonl":
            body = timeseries_to_jsonl(obj)
        elif fmt == "csv":
            body = timeseries_to_csv(obj)
            side = path.with_name(path.name + ".manifest.json")
            side.write_text(dumps({"config_hash": obj.provenance.get("config_hash"), "manifest": obj.manifest, "provenance": obj.provenance}) + "\n")
            written.append(side)
        else:
            raise ValueError(f"time series format must be jsonl or csv, not {fmt!r}")
    elif isinstance(obj, ShotTable):
        if fmt not in ("txt", "shots", "text"):
            raise ValueError(f"shot tables are written as text, not {fmt!r}")
        body = obj.to_text()
        if config_hash:
            body = body.replace("\n", f"\n# config_hash={config_hash}\n", 1)
    elif isinstance(obj, (dict, list)):
        payload = obj if config_hash is None else {"config_hash": config_hash, "bit_order": BIT_ORDER, "data": obj}
        body = dumps(payload) + "\n"
    else:
        raise TypeError(f"cannot emit {type(obj).__name__}")
    path.write_text(body)
    return written


def load_timeseries(path) -> TimeSeries:
    return timeseries_from_jsonl(Path(path).read_text())


def load_shots(path) -> ShotTable:
    return ShotTable.from_text(Path(path).read_text())


def aggregate(paths) -> dict:
    """Combine sweep outputs; refuses files produced from different sweeps."""
    series = [load_timeseries(p) for p in paths]
    if not series:
        raise ValueError("nothing to aggregate")
    keys = {s.provenance.get("sweep_hash", s.provenance.get("config_hash")) for s in series}
    if len(keys) != 1:
        raise HashMismatchError(f"refusing to compare outputs with different config hashes: {sorted(map(str, keys))}")
    points = []
    for p, s in zip(paths, series):
        points.append({"file": str(p), "point": s.provenance.get("sweep_point", {}), "times": s.times, "means": {o: list(s.means(o)) for o in s.observables}})
    points.sort(key=lambda r: dumps(r["point"]))
    return {"sweep_hash": keys.pop(), "points": points}
