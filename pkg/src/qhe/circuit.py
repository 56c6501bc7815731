"""Logical circuits over X, Y, Z, H, S, CNOT and T.

Text format, one gate per line, applied in file order::

    # comment
    H 0
    CNOT 0 1
    T 1

Qubit indices are 0-based (qubit ``z`` is logical row ``z+1`` in the grid
picture).
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .pauli import CLIFFORD_LABELS, CLIFFORD_MATRICES

GATE_KINDS = CLIFFORD_LABELS + ("CNOT", "T")

T_MATRIX = np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex)


class CircuitError(ValueError):
    """Malformed circuit text or an invalid gate."""


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.kind not in GATE_KINDS:
            raise CircuitError(f"unknown gate {self.kind!r}")
        want = 2 if self.kind == "CNOT" else 1
        if len(self.qubits) != want:
            raise CircuitError(f"{self.kind} takes {want} qubit(s), got {len(self.qubits)}")
        if any(q < 0 for q in self.qubits):
            raise CircuitError("qubit indices must be non-negative")
        if self.kind == "CNOT" and self.qubits[0] == self.qubits[1]:
            raise CircuitError("CNOT control and target must differ")

    def __str__(self) -> str:
        return " ".join([self.kind, *map(str, self.qubits)])


@dataclass(frozen=True)
class Circuit:
    gates: tuple[Gate, ...]
    r: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.r < 1:
            raise CircuitError("a circuit needs at least one qubit")
        for g in self.gates:
            if max(g.qubits) >= self.r:
                raise CircuitError(f"gate {g} addresses a qubit outside [0, {self.r})")

    def __len__(self) -> int:
        return len(self.gates)

    @property
    def d(self) -> int:
        return len(self.gates)

    @property
    def t_count(self) -> int:
        return sum(g.kind == "T" for g in self.gates)


def parse_circuit(text: str, r: int) -> Circuit:
    gates = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, *args = line.split()
        kind = kind.upper()
        try:
            qubits = tuple(int(a, 10) for a in args)
        except ValueError:
            raise CircuitError(f"line {lineno}: malformed qubit index in {raw!r}") from None
        try:
            gate = Gate(kind, qubits)
        except CircuitError as exc:
            raise CircuitError(f"line {lineno}: {exc}") from None
        if max(qubits) >= r:
            raise CircuitError(f"line {lineno}: qubit index out of range for r={r}")
        gates.append(gate)
    return Circuit(tuple(gates), r)


def serialize_circuit(c: Circuit) -> str:
    return "".join(f"{g}\n" for g in c.gates)


def t_prefix_count(c: Circuit, i: int) -> int:
    """Number of T gates among the first ``i`` gates (``1 <= i <= d``)."""
    if not 1 <= i <= c.d:
        raise IndexError(f"gate index {i} outside [1, {c.d}]")
    return sum(g.kind == "T" for g in c.gates[:i])


def validate_for_gamma(c: Circuit, gamma) -> list[str]:
    """Empty list when ``c`` can be evaluated under ``gamma``; otherwise the problems."""
    problems = []
    if c.r != gamma.r:
        problems.append(f"circuit acts on {c.r} qubits but r={gamma.r}")
    if c.t_count != gamma.t:
        problems.append(f"circuit has {c.t_count} T gates but t={gamma.t}")
    return problems


def random_clifford_circuit(r: int, d: int, seed: int) -> Circuit:
    rng = random.Random(seed)
    kinds = CLIFFORD_LABELS + (("CNOT",) if r > 1 else ())
    gates = []
    for _ in range(d):
        kind = rng.choice(kinds)
        if kind == "CNOT":
            gates.append(Gate(kind, tuple(rng.sample(range(r), 2))))
        else:
            gates.append(Gate(kind, (rng.randrange(r),)))
    return Circuit(tuple(gates), r)


def random_circuit(r: int, d: int, t: int, seed: int) -> Circuit:
    """A random Clifford circuit of depth ``d`` with ``t`` T gates spliced in."""
    rng = random.Random(seed)
    base = list(random_clifford_circuit(r, d, rng.randrange(2**32)).gates)
    for _ in range(t):
        base.insert(rng.randrange(len(base) + 1), Gate("T", (rng.randrange(r),)))
    return Circuit(tuple(base), r)


def gate_matrix(g: Gate, r: int) -> np.ndarray:
    """Dense ``2^r x 2^r`` unitary; qubit 0 is the most significant tensor factor."""
    eye = np.eye(2, dtype=complex)
    if g.kind == "CNOT":
        c, t = g.qubits
        p0 = np.diag([1, 0]).astype(complex)
        p1 = np.diag([0, 1]).astype(complex)
        a = [eye] * r
        b = [eye] * r
        a[c] = p0
        b[c] = p1
        b[t] = CLIFFORD_MATRICES["X"]
        return _kron_all(a) + _kron_all(b)
    mat = T_MATRIX if g.kind == "T" else CLIFFORD_MATRICES[g.kind]
    ops = [eye] * r
    ops[g.qubits[0]] = mat
    return _kron_all(ops)


def _kron_all(ops: Iterable[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def circuit_unitary(c: Circuit) -> np.ndarray:
    """``V_d ... V_1``."""
    u = np.eye(2**c.r, dtype=complex)
    for g in c.gates:
        u = gate_matrix(g, c.r) @ u
    return u


def apply_circuit(c: Circuit, rho: np.ndarray) -> np.ndarray:
    """Reference evaluation ``V rho V^dagger`` on the plaintext."""
    u = circuit_unitary(c)
    return u @ rho @ u.conj().T


def circuit_from_gates(gates: Sequence[tuple], r: int) -> Circuit:
    """Convenience constructor: ``circuit_from_gates([("H", 0), ("CNOT", 0, 1)], 2)``."""
    return Circuit(tuple(Gate(k, tuple(qs)) for k, *qs in gates), r)
