"""Z2 gauge-Higgs quench simulation toolkit."""

__version__ = "0.1.0"

from .lattice import LatticeGraph, build_brick, build_chain, build_flake, build_ladder, build_lattice  # noqa: E402
from .model import build_hamiltonian, exact_evolve, gap_physical_sector, prepare_string_state  # noqa: E402
from .compiler import Circuit, Gate, trotter_circuit  # noqa: E402
from .simulator import NoiseModel, ShotTable, apply_circuit, run_trajectories  # noqa: E402
from .correction import GaussSectorCorrector, decode  # noqa: E402
from .mitigation import Estimate, ODRMitigator, bootstrap  # noqa: E402
from .experiments import ExperimentConfig, TimeSeries, run_quench, string_correlator, sweep  # noqa: E402

__all__ = [
    "Circuit",
    "Estimate",
    "ExperimentConfig",
    "Gate",
    "GaussSectorCorrector",
    "LatticeGraph",
    "NoiseModel",
    "ODRMitigator",
    "ShotTable",
    "TimeSeries",
    "apply_circuit",
    "bootstrap",
    "build_brick",
    "build_chain",
    "build_flake",
    "build_hamiltonian",
    "build_ladder",
    "build_lattice",
    "decode",
    "exact_evolve",
    "gap_physical_sector",
    "prepare_string_state",
    "run_quench",
    "run_trajectories",
    "string_correlator",
    "sweep",
    "trotter_circuit",
]
