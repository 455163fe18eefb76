"""Pauli strings in the symplectic (x, z) bit-mask representation.

A string is stored as ``i**phase * L(x, z)`` where ``L`` is the tensor product
of letters, with X where only x is set, Z where only z is set and Y where
both are. Qubit ``q`` is bit ``q`` of the masks.
"""

from __future__ import annotations

import re

import numpy as np

_LETTER_BITS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_PHASES = {0: "+", 1: "+i", 2: "-", 3: "-i"}
_TOKEN = re.compile(r"^([XYZ])(\d+)$")


def _popcount(v: int) -> int:
    return bin(v).count("1")


class PauliString:
    """Signed tensor product of single-qubit Pauli letters.

    Parameters
    ----------
    x, z : int
        Bit masks.
    phase : int
        Power of ``i`` multiplying the letter product.
    """

    __slots__ = ("x", "z", "phase")

    def __init__(self, x: int = 0, z: int = 0, phase: int = 0):
        if x < 0 or z < 0:
            raise ValueError("masks must be non-negative")
        self.x = int(x)
        self.z = int(z)
        self.phase = int(phase) % 4

    @classmethod
    def identity(cls) -> "PauliString":
        return cls()

    @classmethod
    def from_letters(cls, letters: dict[int, str], sign: int = 1) -> "PauliString":
        x = z = 0
        for q, c in letters.items():
            if c == "I":
                continue
            if c not in _LETTER_BITS or q < 0:
                raise ValueError(f"bad Pauli letter {c!r} on qubit {q!r}")
            bx, bz = _LETTER_BITS[c]
            x |= bx << q
            z |= bz << q
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        return cls(x, z, 0 if sign == 1 else 2)

    @classmethod
    def single(cls, letter: str, qubit: int) -> "PauliString":
        return cls.from_letters({qubit: letter})

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse labels such as ``"Z3"``, ``"-X1 X4 X2"`` or ``"I"``."""
        s = label.strip()
        phase = 0
        for prefix, p in (("+i", 1), ("-i", 3), ("-", 2), ("+", 0)):
            if s.startswith(prefix) and (prefix in ("-", "+") or s[len(prefix):][:1] in (" ", "*")):
                phase = p
                s = s[len(prefix):].lstrip(" *")
                break
        letters: dict[int, str] = {}
        if s not in ("", "I"):
            for tok in s.split():
                m = _TOKEN.match(tok)
                if not m:
                    raise ValueError(f"cannot parse Pauli token {tok!r}")
                q = int(m.group(2))
                if q in letters:
                    raise ValueError(f"qubit {q} appears twice in {label!r}")
                letters[q] = m.group(1)
        out = cls.from_letters(letters)
        out.phase = phase
        return out

    # structure
    @property
    def letters(self) -> dict[int, str]:
        out = {}
        v = self.x | self.z
        q = 0
        while v:
            if v & 1:
                bx, bz = (self.x >> q) & 1, (self.z >> q) & 1
                out[q] = "Y" if bx and bz else ("X" if bx else "Z")
            v >>= 1
            q += 1
        return out

    @property
    def support(self) -> list[int]:
        return sorted(self.letters)

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    @property
    def is_diagonal(self) -> bool:
        return self.x == 0

    @property
    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    @property
    def sign(self) -> int:
        if not self.is_hermitian:
            raise ValueError("string has an imaginary phase")
        return 1 if self.phase == 0 else -1

    @property
    def max_qubit(self) -> int:
        return (self.x | self.z).bit_length() - 1

    def unsigned(self) -> "PauliString":
        return PauliString(self.x, self.z, 0)

    # algebra
    def __mul__(self, other: "PauliString") -> "PauliString":
        if not isinstance(other, PauliString):
            return NotImplemented
        x3, z3 = self.x ^ other.x, self.z ^ other.z
        ph = (
            self.phase
            + other.phase
            + _popcount(self.x & self.z)
            + _popcount(other.x & other.z)
            + 2 * _popcount(self.z & other.x)
            - _popcount(x3 & z3)
        )
        return PauliString(x3, z3, ph)

    def __neg__(self) -> "PauliString":
        return PauliString(self.x, self.z, self.phase + 2)

    def times_i(self, k: int = 1) -> "PauliString":
        return PauliString(self.x, self.z, self.phase + k)

    def adjoint(self) -> "PauliString":
        return PauliString(self.x, self.z, -self.phase)

    def commutes(self, other: "PauliString") -> bool:
        return (_popcount(self.x & other.z) + _popcount(self.z & other.x)) % 2 == 0

    def commutator(self, other: "PauliString") -> "PauliString | None":
        """``[self, other] / 2``: ``None`` if they commute, else ``self * other``."""
        return None if self.commutes(other) else self * other

    def __eq__(self, other) -> bool:
        return isinstance(other, PauliString) and (self.x, self.z, self.phase) == (other.x, other.z, other.phase)

    def __hash__(self) -> int:
        return hash((self.x, self.z, self.phase))

    def to_label(self) -> str:
        body = " ".join(f"{c}{q}" for q, c in sorted(self.letters.items())) or "I"
        prefix = _PHASES[self.phase]
        if prefix == "+":
            return body
        if prefix == "-":
            return "-" + body
        return prefix + " " + body

    def __repr__(self) -> str:
        return f"PauliString({self.to_label()!r})"

    # dense action
    def to_matrix(self, n_qubits: int) -> np.ndarray:
        dim = 1 << n_qubits
        idx = np.arange(dim)
        out = np.zeros((dim, dim), dtype=complex)
        out[idx ^ self.x, idx] = self._column_factors(idx)
        return out

    def _column_factors(self, idx: np.ndarray) -> np.ndarray:
        # L(x,z)|b> = i^{|x&z|} (-1)^{|z&b|} |b^x>
        k = (self.phase + _popcount(self.x & self.z)) % 4
        signs = 1 - 2 * (np.bitwise_count(idx & self.z) & 1).astype(np.int8)
        return (1j ** k) * signs

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Return ``P |psi>`` for a flat amplitude array."""
        idx = np.arange(psi.shape[0])
        self._check_register(psi.shape[0])
        out = np.empty_like(psi)
        out[idx ^ self.x] = self._column_factors(idx) * psi
        return out

    def expectation(self, psi: np.ndarray) -> complex:
        return complex(np.vdot(psi, self.apply(psi)))

    def diagonal_values(self, idx: np.ndarray) -> np.ndarray:
        """Eigenvalues ``+-1`` of a diagonal string on basis indices."""
        if self.x:
            raise ValueError("string is not diagonal")
        return self.sign * (1 - 2 * (np.bitwise_count(np.asarray(idx) & self.z) & 1).astype(np.int64))

    def _check_register(self, dim: int) -> None:
        if dim & (dim - 1) or (self.x | self.z) >= dim:
            raise ValueError("Pauli string acts outside the register")


def pauli_from_bits(xbits, zbits) -> PauliString:
    x = sum(1 << i for i, b in enumerate(xbits) if b)
    z = sum(1 << i for i, b in enumerate(zbits) if b)
    return PauliString(x, z)
