"""Exact dense-statevector oracle for the encrypted grid.

The appended maximally mixed qubits are represented as a uniform mixture of
computational-basis assignments (every assignment when enumerating, a seeded
subset when sampling). Each mixture branch is an ordinary statevector over
all ``p*q`` grid qubits; grid qubit ``(x, y)`` is bit ``x*q + y`` of the
amplitude index, least significant first.

Gates are recorded in an operation log and replayed over bounded chunks of
branches when a result is requested, so memory stays flat no matter how many
branches the mixture has.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from typing import Iterator, Optional, Sequence

import numpy as np

from ..pauli import CLIFFORD_MATRICES, ColumnPermutation
from ..params import Gamma, SecretKey, encoding_cnots
from . import _kernels
from .metrics import MAX_DENSE_QUBITS, CapacityError, DensityState
from .serialize import TAG_DENSE, pack_header, unpack_header

MAX_ENUMERATED_ANCILLA = 20
MAX_GRID_QUBITS = 26
MAX_TOTAL_AMPLITUDES = 1 << 28


def grid_position(x: int, y: int, q: int) -> int:
    return x * q + y


class _GeneratedSource:
    """Branches ``(assignment, component)``: an input ket on column 0 tensored with basis ancillas."""

    def __init__(self, p: int, q: int, weights: np.ndarray, kets: np.ndarray,
                 assignments: Optional[np.ndarray]):
        self.p, self.q = p, q
        self.comp_weights = np.asarray(weights, dtype=float)
        self.kets = np.asarray(kets, dtype=complex)
        self.assignments = assignments
        n_anc = p * (q - 1)
        self.n_assign = 2**n_anc if assignments is None else len(assignments)
        anc_pos = [grid_position(x, y, q) for x in range(p) for y in range(1, q)]
        self._anc_pos = np.array(anc_pos, dtype=np.int64)
        s = np.arange(2**p)
        col0 = np.zeros(2**p, dtype=np.int64)
        for x in range(p):
            col0 |= ((s >> (p - 1 - x)) & 1) << grid_position(x, 0, q)
        self._col0 = col0

    @property
    def n_branches(self) -> int:
        return self.n_assign * len(self.comp_weights)

    def weights(self, i: int, j: int) -> np.ndarray:
        comp = np.arange(i, j) % len(self.comp_weights)
        return self.comp_weights[comp] / self.n_assign

    def chunk(self, i: int, j: int) -> np.ndarray:
        idx = np.arange(i, j)
        k = len(self.comp_weights)
        a_idx, comp = idx // k, idx % k
        values = a_idx if self.assignments is None else self.assignments[a_idx]
        values = values.astype(np.int64)
        offsets = np.zeros(len(idx), dtype=np.int64)
        for bit, pos in enumerate(self._anc_pos):
            offsets |= ((values >> bit) & 1) << pos
        out = np.zeros((len(idx), 2 ** (self.p * self.q)), dtype=complex)
        rows = np.arange(len(idx))
        for s, off in enumerate(self._col0):
            out[rows, offsets + off] = self.kets[comp, s]
        return out


class _ExplicitSource:
    def __init__(self, weights: np.ndarray, amps: np.ndarray):
        self._w = np.asarray(weights, dtype=float)
        self._amps = np.asarray(amps, dtype=complex)

    @property
    def n_branches(self) -> int:
        return len(self._w)

    def weights(self, i: int, j: int) -> np.ndarray:
        return self._w[i:j]

    def chunk(self, i: int, j: int) -> np.ndarray:
        return self._amps[i:j].copy()


@dataclass(frozen=True)
class DenseCipher:
    """A mixture of grid statevectors plus the pending operation log."""

    gamma: Gamma
    source: object
    ops: tuple = ()
    chunk_amplitudes: int = 1 << 22
    backend = "oracle"

    @property
    def n_qubits(self) -> int:
        return self.gamma.p * self.gamma.q

    @property
    def n_branches(self) -> int:
        return self.source.n_branches

    def _check_pos(self, *positions: int) -> None:
        for pos in positions:
            if not 0 <= pos < self.n_qubits:
                raise IndexError(f"grid position {pos} outside [0, {self.n_qubits})")

    def apply_gate(self, g: str, pos: int) -> "DenseCipher":
        if g not in CLIFFORD_MATRICES:
            raise ValueError(f"unsupported gate {g!r}")
        self._check_pos(pos)
        return replace(self, ops=self.ops + (("1q", g, pos),))

    def apply_cnot(self, pc: int, pt: int) -> "DenseCipher":
        self._check_pos(pc, pt)
        if pc == pt:
            raise ValueError("CNOT control and target coincide")
        return replace(self, ops=self.ops + (("cnot", pc, pt),))

    def permute_columns(self, perm: ColumnPermutation) -> "DenseCipher":
        """Move the qubit at ``(x, y)`` to ``(x, perm(y))``."""
        p, q = self.gamma.p, self.gamma.q
        dest = tuple(grid_position(x, perm(y), q) for x in range(p) for y in range(q))
        return replace(self, ops=self.ops + (("perm", dest),))

    def apply_transversal_clifford(self, g: str, row: int) -> "DenseCipher":
        if not 0 <= row < self.gamma.p:
            raise IndexError(f"row {row} outside the grid")
        st = self
        for y in range(self.gamma.q):
            st = st.apply_gate(g, grid_position(row, y, self.gamma.q))
        return st

    def apply_transversal_cnot(self, row_c: int, row_t: int) -> "DenseCipher":
        if row_c == row_t:
            raise ValueError("transversal CNOT needs distinct rows")
        st = self
        for y in range(self.gamma.q):
            st = st.apply_cnot(grid_position(row_c, y, self.gamma.q), grid_position(row_t, y, self.gamma.q))
        return st

    def _replay(self, arr: np.ndarray) -> np.ndarray:
        n = self.n_qubits
        for op in self.ops:
            if op[0] == "1q":
                _kernels.apply_matrix(arr.reshape(-1), op[2], CLIFFORD_MATRICES[op[1]])
            elif op[0] == "cnot":
                _kernels.apply_cnot(arr.reshape(-1), op[1], op[2])
            else:
                dest = op[1]
                src = [0] * n
                for old, new in enumerate(dest):
                    src[new] = old
                # axis 1 + (n-1-pos) holds bit pos
                axes = [0] + [1 + n - 1 - src[n - a] for a in range(1, n + 1)]
                arr = np.ascontiguousarray(
                    arr.reshape((len(arr),) + (2,) * n).transpose(axes)
                ).reshape(len(arr), -1)
        return arr

    def iter_chunks(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield ``(weights, amplitudes)`` blocks after replaying every pending operation."""
        per = max(1, self.chunk_amplitudes >> self.n_qubits)
        total = self.n_branches
        for i in range(0, total, per):
            j = min(total, i + per)
            yield self.source.weights(i, j), self._replay(self.source.chunk(i, j))

    def amplitudes(self) -> tuple[np.ndarray, np.ndarray]:
        ws, amps = zip(*self.iter_chunks())
        return np.concatenate(ws), np.concatenate(amps)

    def materialized(self) -> "DenseCipher":
        w, a = self.amplitudes()
        return replace(self, source=_ExplicitSource(w, a), ops=())

    def reduced_state(self, positions: Sequence[int]) -> np.ndarray:
        """Reduced density matrix on grid ``positions`` (first listed = most significant)."""
        positions = list(positions)
        self._check_pos(*positions)
        if len(set(positions)) != len(positions):
            raise ValueError("repeated grid position")
        if len(positions) > MAX_DENSE_QUBITS:
            raise CapacityError(f"reduced state on {len(positions)} qubits exceeds the limit")
        n, k = self.n_qubits, len(positions)
        keep_axes = [1 + n - 1 - pos for pos in positions]
        rest_axes = [a for a in range(1, n + 1) if a not in keep_axes]
        rho = np.zeros((2**k, 2**k), dtype=complex)
        for w, amps in self.iter_chunks():
            t = amps.reshape((len(amps),) + (2,) * n).transpose([0] + rest_axes + keep_axes)
            mat = (t.reshape(len(amps), -1, 2**k) * np.sqrt(w)[:, None, None]).reshape(-1, 2**k)
            rho += mat.T @ mat.conj()
        return rho

    def decoded(self, key: SecretKey) -> "DenseCipher":
        """Undo the column permutation, then the encoding ladder on every row."""
        g = self.gamma
        if key.q != g.q:
            raise ValueError(f"key acts on {key.q} columns, ciphertext has {g.q}")
        st = self.permute_columns(key.perm.inverse())
        for x in range(g.p):
            for c, t in reversed(encoding_cnots(g.n)):
                st = st.apply_cnot(grid_position(x, c, g.q), grid_position(x, t, g.q))
        return st

    def decode(self, key: SecretKey) -> DensityState:
        """Column-0 logical register after unpermuting and un-encoding."""
        st = self.decoded(key)
        return DensityState(st.reduced_state([grid_position(x, 0, self.gamma.q) for x in range(self.gamma.p)]))

    def to_bytes(self) -> bytes:
        w, amps = self.amplitudes()
        head = pack_header(TAG_DENSE, self.gamma)
        body = struct.pack("<IQ", self.n_qubits, len(w))
        return head + body + w.astype("<f8").tobytes() + amps.astype("<c16").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "DenseCipher":
        tag, gamma, off = unpack_header(data)
        if tag != TAG_DENSE:
            raise ValueError("not a dense ciphertext")
        n_qubits, n_br = struct.unpack_from("<IQ", data, off)
        off += struct.calcsize("<IQ")
        if n_qubits != gamma.p * gamma.q:
            raise ValueError("qubit count does not match parameters")
        w = np.frombuffer(data, dtype="<f8", count=n_br, offset=off)
        off += 8 * n_br
        amps = np.frombuffer(data, dtype="<c16", count=n_br * 2**n_qubits, offset=off)
        if off + amps.nbytes != len(data):
            raise ValueError("trailing or missing bytes in dense ciphertext")
        return cls(gamma, _ExplicitSource(w.astype(float), amps.reshape(n_br, -1).astype(complex)))


def apply_gate_dense(st: DenseCipher, g: str, at) -> DenseCipher:
    """Apply a Clifford label at one grid position or a CNOT at a (control, target) pair."""
    if g == "CNOT":
        return st.apply_cnot(*at)
    return st.apply_gate(g, at)


class DenseOracle:
    """Factory for dense ciphertexts.

    mixture: ``"enumerate"`` walks all ``2^{p(q-1)}`` ancilla assignments
    (refused beyond 20 ancilla qubits); ``"sample"`` draws ``samples`` of them
    from a seeded generator.
    """

    tag = "oracle"

    def __init__(self, mixture: str = "enumerate", samples: Optional[int] = None,
                 seed: Optional[int] = None, chunk_amplitudes: int = 1 << 22):
        if mixture not in ("enumerate", "sample"):
            raise ValueError(f"unknown mixture policy {mixture!r}")
        if mixture == "sample" and not samples:
            raise ValueError("sampling mode needs a positive sample count")
        self.mixture = mixture
        self.samples = samples
        self.seed = seed
        self.chunk_amplitudes = chunk_amplitudes

    def fresh(self, gamma: Gamma, block) -> DenseCipher:
        """``E(tau)``: the block on column 0, basis-state ancillas elsewhere; nothing applied."""
        p, q = gamma.p, gamma.q
        if p * q > MAX_GRID_QUBITS:
            raise CapacityError(f"{p * q} grid qubits exceeds the dense limit {MAX_GRID_QUBITS}")
        n_anc = p * (q - 1)
        if self.mixture == "enumerate":
            if n_anc > MAX_ENUMERATED_ANCILLA:
                raise CapacityError(
                    f"enumerating 2^{n_anc} ancilla assignments is refused; use sampling mode"
                )
            assignments = None
        else:
            rng = np.random.default_rng(self.seed)
            assignments = rng.integers(0, 2**n_anc, size=self.samples, dtype=np.int64)
        weights, kets = block.pure_components()
        n_branches = len(weights) * (2**n_anc if assignments is None else len(assignments))
        if n_branches << (p * q) > MAX_TOTAL_AMPLITUDES:
            raise CapacityError(
                f"{n_branches} branches of 2^{p * q} amplitudes exceeds the dense work limit"
            )
        source = _GeneratedSource(p, q, weights, kets, assignments)
        return DenseCipher(gamma, source, chunk_amplitudes=self.chunk_amplitudes)

    def encrypt(self, key: SecretKey, block) -> DenseCipher:
        gamma = block.gamma
        if key.q != gamma.q:
            raise ValueError(f"key acts on {key.q} columns, parameters need {gamma.q}")
        st = self.fresh(gamma, block)
        for x in range(gamma.p):
            for c, t in encoding_cnots(gamma.n):
                st = st.apply_cnot(grid_position(x, c, gamma.q), grid_position(x, t, gamma.q))
        return st.permute_columns(key.perm)
