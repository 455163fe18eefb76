"""Command-line entry point.

Exit codes: 0 success, 1 other failure, 2 configuration error,
3 capacity error, 4 mitigation refusal.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analytics
from .cli_io import (
    BIT_ORDER,
    ConfigParseError,
    HashMismatchError,
    aggregate,
    dumps,
    emit,
    load_config,
    load_shots,
    output_dir,
    parse_yaml,
)
from .compiler import Circuit, insert_gdd, trotter_circuit, twirl
from .correction import decode_table, decoder_report, postselect
from .experiments import ConfigError, ExperimentError, run_quench, sweep
from .lattice import LatticeError, LatticeGraph, build_lattice
from .mitigation import MitigationRefused, odr_estimate
from .model import build_hamiltonian, gap_physical_sector, prepare_string_state
from .pauli import PauliString
from .simulator import NoiseModel, run_trajectories
from .statevector import CapacityError

EXIT_OTHER, EXIT_CONFIG, EXIT_CAPACITY, EXIT_REFUSED = 1, 2, 3, 4


def _add_lattice_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lattice", type=Path, help="lattice text file (overrides --kind)")
    p.add_argument("--kind", choices=["flake", "brick", "ladder", "chain"])
    p.add_argument("--R", type=int, default=0)
    p.add_argument("--rows", type=int, default=2)
    p.add_argument("--cols", type=int, default=2)
    p.add_argument("--n-sites", type=int, default=4)


def _lattice(args) -> LatticeGraph:
    if args.lattice is not None:
        return LatticeGraph.from_text(args.lattice.read_text())
    if args.kind is None:
        raise ConfigError("lattice", "give --lattice FILE or --kind")
    spec = {"kind": args.kind}
    if args.kind == "flake":
        spec["R"] = args.R
    elif args.kind == "brick":
        spec.update(rows=args.rows, cols=args.cols)
    elif args.kind == "chain":
        spec["n_sites"] = args.n_sites
    return build_lattice(spec)


def _write(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _load_noise(path: Path | None) -> NoiseModel | None:
    if path is None:
        return None
    d = parse_yaml(path.read_text()) or {}
    try:
        return NoiseModel.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise ConfigError("noise", str(exc)) from exc


# subcommands


def cmd_lattice_build(args) -> int:
    lat = _lattice(args)
    _write(dumps(lat.to_dict()) + "\n" if args.format == "json" else lat.to_text(), args.out)
    return 0


def cmd_compile(args) -> int:
    lat = _lattice(args)
    paths = json.loads(args.initial) if args.initial else []
    init = prepare_string_state(lat, paths)
    params = analytics.QuenchParams(args.m, args.g, args.lam, args.t, args.dt)
    circ = trotter_circuit(lat, params, initial=init.index)
    if args.gdd_seed is not None:
        circ = insert_gdd(circ, args.gdd_seed)
    if args.twirl_seed is not None:
        circ = twirl(circ, args.twirl_seed)
    _write(circ.to_json() + "\n", args.out)
    return 0


def cmd_simulate(args) -> int:
    circ = Circuit.from_json(args.circuit.read_text())
    table = run_trajectories(circ, _load_noise(args.noise), args.shots, args.seed, cap=args.qubit_cap)
    emit(table, args.out, "txt") if args.out else sys.stdout.write(table.to_text())
    return 0


def cmd_decode(args) -> int:
    lat = _lattice(args)
    table = load_shots(args.shots)
    if table.n_qubits != lat.n_qubits:
        raise ConfigError("shots", f"table has {table.n_qubits} qubits, lattice has {lat.n_qubits}")
    if args.report:
        emit(decoder_report(table, lat), args.report, "json")
    fixed = decode_table(table, lat)
    if args.min_keep:
        fixed = postselect(fixed, args.min_keep)
    emit(fixed, args.out, "txt") if args.out else sys.stdout.write(fixed.to_text())
    return 0


def cmd_mitigate(args) -> int:
    sim = load_shots(args.shots)
    obs = [PauliString.from_label(o) for o in args.observable]
    coeffs = np.ones(len(obs))
    sim_cols = np.stack([sim.parities(p) for p in obs], axis=1)
    results = {}
    if args.calibration is not None:
        if args.ideal is None or len(args.ideal) != len(obs):
            raise ConfigError("ideal", "one ideal value per observable is required with --calibration")
        cal = load_shots(args.calibration)
        cal_cols = np.stack([cal.parities(p) for p in obs], axis=1)
        for k, label in enumerate(args.observable):
            est = odr_estimate(sim_cols[:, [k]], coeffs[[k]], cal_cols[:, [k]], np.array([args.ideal[k]]), B=args.B, level=args.level, seed=args.seed, threshold=args.threshold)
            results[label] = est.to_dict()
    else:
        for k, label in enumerate(args.observable):
            results[label] = odr_estimate(sim_cols[:, [k]], coeffs[[k]], B=args.B, level=args.level, seed=args.seed).to_dict()
    body = {"bit_order": BIT_ORDER, "estimates": results}
    _write(dumps(body) + "\n", args.out)
    return 0


def _series_outputs(ts, out: Path, stem: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    emit(ts, out / f"{stem}.jsonl", "jsonl")
    emit(ts, out / f"{stem}.csv", "csv")


def cmd_experiment_run(args) -> int:
    cfg = load_config(args.config)
    ts = run_quench(cfg)
    out = output_dir(args.out_dir, cfg.config_hash())
    _series_outputs(ts, out, "timeseries")
    print(out)
    return EXIT_REFUSED if ts.manifest.get("refusals") and args.strict else 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    grid = parse_yaml(args.grid.read_text()) if args.grid else {}
    out = output_dir(args.out_dir, cfg.config_hash())
    files = []
    for k, (point, ts) in enumerate(sweep(cfg, grid or {})):
        _series_outputs(ts, out, f"point{k:03d}")
        files.append(out / f"point{k:03d}.jsonl")
    emit(aggregate(files), out / "aggregate.json", "json", config_hash=cfg.config_hash())
    print(out)
    return 0


def cmd_sweep_aggregate(args) -> int:
    _write(dumps(aggregate(args.files)) + "\n", args.out)
    return 0


def cmd_analytics_eval(args) -> int:
    q = args.quantity
    if q == "gap":
        if args.kind is None and args.lattice is None:
            val = analytics.m0_gap(args.g, args.lam)
        else:
            val = gap_physical_sector(build_hamiltonian(_lattice(args), args.m, args.g, args.lam))
    elif q == "glassy":
        val = analytics.glassy_amplitude(args.g, args.lam, args.t)
    elif q == "yoyo":
        val = analytics.yoyo_frequency(args.g)
    elif q == "bending":
        val = analytics.bending_frequency(args.m, args.g, args.lam)
    elif q == "period":
        val = analytics.period(analytics.bending_frequency(args.m, args.g, args.lam) if args.mode == "bending" else analytics.yoyo_frequency(args.g))
    elif q == "plaquette":
        val = analytics.effective_plaquette(args.m, args.lam)
    elif q == "field":
        val = analytics.m0_electric_field(args.g, args.lam)
    else:
        val = analytics.trotter_error_bound(_lattice(args), args.m, args.g, args.lam, args.t, args.dt)
    print(f"{val:.17g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="z2higgs", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    lat = sub.add_parser("lattice", help="lattice tools").add_subparsers(dest="action", required=True)
    b = lat.add_parser("build", help="build and export a lattice")
    _add_lattice_args(b)
    b.add_argument("--format", choices=["text", "json"], default="text")
    b.add_argument("--out", type=Path)
    b.set_defaults(func=cmd_lattice_build)

    c = sub.add_parser("compile", help="compile a Trotter circuit to JSON")
    _add_lattice_args(c)
    for name in ("m", "g", "lam", "t", "dt"):
        c.add_argument(f"--{name}", type=float, required=True)
    c.add_argument("--initial", help="JSON list of node paths, e.g. '[[0,1,2]]'")
    c.add_argument("--gdd-seed", type=int)
    c.add_argument("--twirl-seed", type=int)
    c.add_argument("--out", type=Path)
    c.set_defaults(func=cmd_compile)

    s = sub.add_parser("simulate", help="sample shots from a compiled circuit")
    s.add_argument("--circuit", type=Path, required=True)
    s.add_argument("--noise", type=Path, help="YAML noise model")
    s.add_argument("--shots", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--qubit-cap", type=int, default=22)
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("decode", help="Gauss-law decoding and post-selection")
    _add_lattice_args(d)
    d.add_argument("--shots", type=Path, required=True)
    d.add_argument("--min-keep", type=int)
    d.add_argument("--report", type=Path)
    d.add_argument("--out", type=Path)
    d.set_defaults(func=cmd_decode)

    mt = sub.add_parser("mitigate", help="bootstrap and calibrate Pauli expectations")
    mt.add_argument("--shots", type=Path, required=True)
    mt.add_argument("--calibration", type=Path)
    mt.add_argument("--observable", action="append", required=True, help="Z-string label such as 'Z0 Z3'")
    mt.add_argument("--ideal", type=float, action="append")
    mt.add_argument("--B", type=int, default=1000)
    mt.add_argument("--level", type=float, default=0.70)
    mt.add_argument("--threshold", type=float, default=0.05)
    mt.add_argument("--seed", type=int, default=0)
    mt.add_argument("--out", type=Path)
    mt.set_defaults(func=cmd_mitigate)

    ex = sub.add_parser("experiment", help="quench experiments").add_subparsers(dest="action", required=True)
    r = ex.add_parser("run", help="run a configured quench")
    r.add_argument("--config", type=Path, required=True)
    r.add_argument("--out-dir", type=Path, default=Path("runs"))
    r.add_argument("--strict", action="store_true", help="fail if any ODR factor was refused")
    r.set_defaults(func=cmd_experiment_run)

    an = sub.add_parser("analytics", help="closed-form quantities").add_subparsers(dest="action", required=True)
    e = an.add_parser("eval", help="evaluate one quantity")
    e.add_argument("quantity", choices=["gap", "glassy", "yoyo", "bending", "period", "plaquette", "field", "trotter-bound"])
    _add_lattice_args(e)
    for name, default in (("m", 0.0), ("g", 0.0), ("lam", 1.0), ("t", 0.0), ("dt", 0.125)):
        e.add_argument(f"--{name}", type=float, default=default)
    e.add_argument("--mode", choices=["yoyo", "bending"], default="yoyo")
    e.set_defaults(func=cmd_analytics_eval)

    sw = sub.add_parser("sweep", help="parameter sweeps")
    sw.add_argument("--config", type=Path)
    sw.add_argument("--grid", type=Path, help="YAML mapping of key -> list of values")
    sw.add_argument("--out-dir", type=Path, default=Path("runs"))
    sw.add_argument("--aggregate", nargs="+", type=Path, dest="files", help="only aggregate existing outputs")
    sw.add_argument("--out", type=Path)
    sw.set_defaults(func=lambda a: cmd_sweep_aggregate(a) if a.files else cmd_sweep(a))
    return p


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ExperimentError):
        exc = exc.cause
    if isinstance(exc, (ConfigError, ConfigParseError, LatticeError, HashMismatchError)):
        return EXIT_CONFIG
    if isinstance(exc, CapacityError):
        return EXIT_CAPACITY
    if isinstance(exc, MitigationRefused):
        return EXIT_REFUSED
    return EXIT_OTHER


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "sweep" and not args.files and args.config is None:
        print("error: sweep needs --config or --aggregate", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
