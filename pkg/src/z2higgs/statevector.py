"""Little-endian statevector container and in-place gate kernels."""

from __future__ import annotations

import numpy as np

DEFAULT_QUBIT_CAP = 22


class CapacityError(ValueError):
    """Register exceeds the configured qubit cap."""


def check_capacity(n_qubits: int, cap: int | None = None, what: str = "register") -> None:
    cap = DEFAULT_QUBIT_CAP if cap is None else cap
    if n_qubits > cap:
        raise CapacityError(f"{what} of {n_qubits} qubits exceeds the cap of {cap}")


class StateVector:
    """Normalized amplitudes over ``2**n_qubits`` basis states.

    Basis index ``b`` has qubit ``q`` in state ``(b >> q) & 1``.
    """

    __slots__ = ("amplitudes", "n_qubits")

    def __init__(self, amplitudes, n_qubits: int | None = None, cap: int | None = None, check_norm: bool = True):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        dim = amps.shape[0]
        if dim == 0 or dim & (dim - 1):
            raise ValueError("amplitude count must be a power of two")
        n = dim.bit_length() - 1
        if n_qubits is not None and n_qubits != n:
            raise ValueError(f"{dim} amplitudes do not describe {n_qubits} qubits")
        check_capacity(n, cap)
        if check_norm and abs(np.linalg.norm(amps) - 1.0) > 1e-10:
            raise ValueError("state is not normalized")
        self.amplitudes = amps
        self.n_qubits = n

    @classmethod
    def basis(cls, n_qubits: int, index: int = 0, cap: int | None = None) -> "StateVector":
        check_capacity(n_qubits, cap)
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(amps, n_qubits, cap=cap)

    def copy(self) -> "StateVector":
        out = StateVector.__new__(StateVector)
        out.amplitudes = self.amplitudes.copy()
        out.n_qubits = self.n_qubits
        return out

    def probabilities(self) -> np.ndarray:
        p = np.abs(self.amplitudes) ** 2
        return p / p.sum()

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def fidelity(self, other: "StateVector") -> float:
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)

    def __len__(self) -> int:
        return self.amplitudes.shape[0]


def as_amplitudes(state) -> np.ndarray:
    if isinstance(state, StateVector):
        return state.amplitudes
    return np.asarray(state, dtype=complex).reshape(-1)


# kernels act in place on a flat array of length 2**n


def _split(psi: np.ndarray, q: int) -> np.ndarray:
    return psi.reshape(-1, 2, 1 << q)


def apply_rz(psi: np.ndarray, q: int, theta: float) -> None:
    v = _split(psi, q)
    v[:, 0, :] *= np.exp(-0.5j * theta)
    v[:, 1, :] *= np.exp(0.5j * theta)


def apply_rx(psi: np.ndarray, q: int, theta: float) -> None:
    v = _split(psi, q)
    c, s = np.cos(theta / 2), -1j * np.sin(theta / 2)
    a = v[:, 0, :].copy()
    b = v[:, 1, :]
    v[:, 0, :] = c * a + s * b
    v[:, 1, :] = s * a + c * b


def apply_x(psi: np.ndarray, q: int) -> None:
    v = _split(psi, q)
    v[:] = v[:, ::-1, :].copy()


def apply_z(psi: np.ndarray, q: int) -> None:
    _split(psi, q)[:, 1, :] *= -1


def apply_y(psi: np.ndarray, q: int) -> None:
    # Y = [[0, -i], [i, 0]]
    v = _split(psi, q)
    a = v[:, 0, :].copy()
    v[:, 0, :] = -1j * v[:, 1, :]
    v[:, 1, :] = 1j * a


def apply_letter(psi: np.ndarray, q: int, letter: str) -> None:
    if letter == "X":
        apply_x(psi, q)
    elif letter == "Y":
        apply_y(psi, q)
    elif letter == "Z":
        apply_z(psi, q)
    elif letter != "I":
        raise ValueError(f"bad Pauli letter {letter!r}")


def _view2(psi: np.ndarray, a: int, b: int) -> tuple[np.ndarray, int, int]:
    """5-axis view with axes for qubits a and b; returns (view, axis_a, axis_b)."""
    hi, lo = max(a, b), min(a, b)
    v = psi.reshape(-1, 2, 1 << (hi - lo - 1), 2, 1 << lo)
    return (v, 1, 3) if a == hi else (v, 3, 1)


def _index(ax_a: int, va: int, ax_b: int, vb: int):
    idx = [slice(None)] * 5
    idx[ax_a] = va
    idx[ax_b] = vb
    return tuple(idx)


def apply_cnot(psi: np.ndarray, control: int, target: int) -> None:
    v, ac, at = _view2(psi, control, target)
    i0, i1 = _index(ac, 1, at, 0), _index(ac, 1, at, 1)
    tmp = v[i0].copy()
    v[i0] = v[i1]
    v[i1] = tmp


def apply_zz_phase(psi: np.ndarray, a: int, b: int, theta: float) -> None:
    """``exp(-i theta/2 Z_a Z_b)``."""
    v, aa, ab = _view2(psi, a, b)
    same, diff = np.exp(-0.5j * theta), np.exp(0.5j * theta)
    v[_index(aa, 0, ab, 0)] *= same
    v[_index(aa, 1, ab, 1)] *= same
    v[_index(aa, 0, ab, 1)] *= diff
    v[_index(aa, 1, ab, 0)] *= diff
