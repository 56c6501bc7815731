"""Pauli label algebra on a grid of qubits.

Labels are the integers 0..3 for I, X, Y, Z. Phases are kept exactly as
powers of ``i`` (an exponent mod 4); nothing here touches floating point
once the lookup tables are built.

The single-qubit and CNOT conjugation tables are derived at import time
from explicit 2x2 / 4x4 complex matrices and then frozen, so they are
correct by construction rather than typed in by hand.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class PauliLabel(enum.IntEnum):
    I = 0
    X = 1
    Y = 2
    Z = 3


PAULI_MATRICES = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

CLIFFORD_MATRICES = {
    "X": PAULI_MATRICES[1],
    "Y": PAULI_MATRICES[2],
    "Z": PAULI_MATRICES[3],
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
}

CLIFFORD_LABELS = tuple(CLIFFORD_MATRICES)

# control is the first (most significant) tensor factor
CNOT_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


@dataclass(frozen=True)
class Phase:
    """An element of {+1, +i, -1, -i}, stored as the exponent of ``i``."""

    k: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "k", self.k % 4)

    @classmethod
    def from_complex(cls, z: complex, tol: float = 1e-9) -> "Phase":
        for k in range(4):
            if abs(z - 1j**k) < tol:
                return cls(k)
        raise ValueError(f"{z!r} is not a fourth root of unity")

    def __mul__(self, other: "Phase") -> "Phase":
        return Phase(self.k + other.k)

    def __pow__(self, e: int) -> "Phase":
        return Phase(self.k * e)

    def conjugate(self) -> "Phase":
        return Phase(-self.k)

    @property
    def value(self) -> complex:
        return (1, 1j, -1, -1j)[self.k]

    @property
    def sign(self) -> int:
        """The real value of a +1/-1 phase; raises for +-i."""
        if self.k == 0:
            return 1
        if self.k == 2:
            return -1
        raise ValueError("phase is imaginary")

    def __repr__(self) -> str:
        return ("+1", "+i", "-1", "-i")[self.k]


ONE = Phase(0)


def _decompose(mat: np.ndarray, n_qubits: int) -> tuple[tuple[int, ...], Phase]:
    """Identify ``mat`` as phase * (tensor product of Paulis)."""
    dim = 2**n_qubits
    for labels in itertools.product(range(4), repeat=n_qubits):
        p = PAULI_MATRICES[labels[0]]
        for lab in labels[1:]:
            p = np.kron(p, PAULI_MATRICES[lab])
        overlap = np.trace(p.conj().T @ mat) / dim
        if abs(abs(overlap) - 1) < 1e-9:
            return labels, Phase.from_complex(overlap)
    raise ValueError("matrix is not a scaled Pauli operator")


def _build_tables():
    single = {}
    for g, gm in CLIFFORD_MATRICES.items():
        for a in range(4):
            (b,), ph = _decompose(gm @ PAULI_MATRICES[a] @ gm.conj().T, 1)
            single[g, a] = (PauliLabel(b), ph)
    cnot = {}
    for a, b in itertools.product(range(4), repeat=2):
        m = CNOT_MATRIX @ np.kron(PAULI_MATRICES[a], PAULI_MATRICES[b]) @ CNOT_MATRIX
        (c, d), ph = _decompose(m, 2)
        cnot[a, b] = (PauliLabel(c), PauliLabel(d), ph)
    mult = {}
    for a, b in itertools.product(range(4), repeat=2):
        (c,), ph = _decompose(PAULI_MATRICES[a] @ PAULI_MATRICES[b], 1)
        mult[a, b] = (PauliLabel(c), ph)
    return single, cnot, mult


_SINGLE, _CNOT, _MULT = _build_tables()

# Vectorised forms of the same tables: image label and +-1 sign.
SINGLE_IMAGE = {
    g: np.array([_SINGLE[g, a][0] for a in range(4)], dtype=np.uint8)
    for g in CLIFFORD_LABELS
}
SINGLE_SIGN = {
    g: np.array([_SINGLE[g, a][1].sign for a in range(4)], dtype=np.int8)
    for g in CLIFFORD_LABELS
}
CNOT_IMAGE_C = np.array([[_CNOT[a, b][0] for b in range(4)] for a in range(4)], dtype=np.uint8)
CNOT_IMAGE_T = np.array([[_CNOT[a, b][1] for b in range(4)] for a in range(4)], dtype=np.uint8)
CNOT_SIGN = np.array([[_CNOT[a, b][2].sign for b in range(4)] for a in range(4)], dtype=np.int8)


def conjugate_single(g: str, pl: int) -> tuple[PauliLabel, Phase]:
    """Return ``(label, phase)`` with ``g sigma_pl g^dagger = phase * sigma_label``.

    Only the Clifford labels X, Y, Z, H, S are accepted; T never conjugates a
    Pauli in this scheme and is rejected.
    """
    if g not in CLIFFORD_MATRICES:
        raise ValueError(f"not a single-qubit Clifford label: {g!r}")
    return _SINGLE[g, int(pl)]


def conjugate_cnot(pc: int, pt: int) -> tuple[PauliLabel, PauliLabel, Phase]:
    return _CNOT[int(pc), int(pt)]


def conjugate_transversal_row(g: str, pl: int, n: int) -> tuple[PauliLabel, Phase]:
    """Conjugate ``sigma_pl^{(x) n}`` by ``g^{(x) n}`` on a row of ``n`` code qubits.

    The row phase is the single-qubit phase to the ``n``-th power, which for
    ``n = 4n'+1`` collapses to the single-qubit phase.
    """
    check_code_length(n)
    label, ph = conjugate_single(g, pl)
    return label, ph**n


def pauli_multiply(a: int, b: int) -> tuple[PauliLabel, Phase]:
    """``sigma_a sigma_b = phase * sigma_c``."""
    return _MULT[int(a), int(b)]


def check_code_length(n: int) -> None:
    if n < 5 or n % 4 != 1:
        raise ValueError(f"n must be 4n'+1 with n' >= 1, got n={n}")


@dataclass(frozen=True)
class ColumnPermutation:
    """A bijection on columns, stored 0-based: column ``y`` goes to ``images[y]``."""

    images: tuple[int, ...]

    def __post_init__(self) -> None:
        images = tuple(int(v) for v in self.images)
        if sorted(images) != list(range(len(images))):
            raise ValueError(f"not a permutation: {images}")
        object.__setattr__(self, "images", images)

    @classmethod
    def identity(cls, q: int) -> "ColumnPermutation":
        return cls(tuple(range(q)))

    @property
    def q(self) -> int:
        return len(self.images)

    def __call__(self, y: int) -> int:
        return self.images[y]

    def compose(self, other: "ColumnPermutation") -> "ColumnPermutation":
        """``self o other``: apply ``other`` first."""
        if other.q != self.q:
            raise ValueError("permutations act on different column counts")
        return ColumnPermutation(tuple(self.images[other.images[y]] for y in range(self.q)))

    def inverse(self) -> "ColumnPermutation":
        inv = [0] * self.q
        for y, img in enumerate(self.images):
            inv[img] = y
        return ColumnPermutation(tuple(inv))


@dataclass(frozen=True)
class GridPauli:
    """Phase times a tensor product of Paulis on a p x q grid (row-major labels)."""

    labels: tuple[tuple[int, ...], ...]
    phase: Phase = ONE

    def __post_init__(self) -> None:
        labels = tuple(tuple(int(v) for v in row) for row in self.labels)
        if not labels or len({len(row) for row in labels}) != 1:
            raise ValueError("labels must be a non-empty rectangular p x q array")
        if any(v not in (0, 1, 2, 3) for row in labels for v in row):
            raise ValueError("labels must be in {0,1,2,3}")
        object.__setattr__(self, "labels", labels)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.labels), len(self.labels[0])

    def matrix(self) -> np.ndarray:
        """Dense operator; qubit (x, y) is tensor factor ``x*q + y`` (first = most significant)."""
        out = np.ones((1, 1), dtype=complex)
        for row in self.labels:
            for v in row:
                out = np.kron(out, PAULI_MATRICES[v])
        return self.phase.value * out


def permute_columns(a: GridPauli, pi: ColumnPermutation) -> GridPauli:
    """Move the entry at ``(x, y)`` to ``(x, pi(y))``."""
    p, q = a.shape
    if pi.q != q:
        raise ValueError(f"permutation on {pi.q} columns applied to a grid with {q}")
    new = [[0] * q for _ in range(p)]
    for x in range(p):
        for y in range(q):
            new[x][pi(y)] = a.labels[x][y]
    return GridPauli(tuple(map(tuple, new)), a.phase)


def logical_row(v: Sequence[int], n: int, m: int) -> GridPauli:
    """The grid Pauli ``v [1_n 0_m]``: label ``v[x]`` on the first ``n`` columns of row ``x``."""
    return GridPauli(tuple(tuple([int(lab)] * n + [0] * m) for lab in v))
