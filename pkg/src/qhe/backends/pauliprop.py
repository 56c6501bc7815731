"""Pauli-coefficient propagation engine.

After encoding, every Pauli term of the ciphertext carries the same label on
each of its ``n`` code columns and identity on the ancilla columns, so a
term is determined by one label per row (a logical vector ``v``) plus the set
of code columns. The state is ``2^{-pq} sum_v c_v sigma_{v on code columns}``
with real ``c_v`` and ``c_0 = 1``.

Encryption and decryption do not assume that structure: they run the CNOT
ladder term by term on full ``p x q`` label grids and only then compress (or
read off column 0), so a wrong key or a broken ladder shows up as an error or
a wrong answer rather than being silently hidden.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..pauli import (
    CNOT_IMAGE_C,
    CNOT_IMAGE_T,
    CNOT_SIGN,
    SINGLE_IMAGE,
    SINGLE_SIGN,
    ColumnPermutation,
)
from ..params import Gamma, SecretKey, encoding_cnots
from .metrics import pauli_terms_to_dense
from .serialize import TAG_PAULI, pack_header, unpack_header

_RECORD = np.dtype([("mask", "<u8"), ("labels", "<u8"), ("coeff", "<f8")])


def pack_labels(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.uint64)
    if labels.shape[1] > 32:
        raise ValueError("at most 32 rows can be packed")
    shifts = np.arange(labels.shape[1], dtype=np.uint64) * np.uint64(2)
    return (labels << shifts).sum(axis=1, dtype=np.uint64)


def unpack_labels(packed: np.ndarray, k: int) -> np.ndarray:
    packed = np.asarray(packed, dtype=np.uint64)
    shifts = np.arange(k, dtype=np.uint64) * np.uint64(2)
    return ((packed[:, None] >> shifts) & np.uint64(3)).astype(np.uint8)


def _grid_cnot_columns(grid: np.ndarray, coeffs: np.ndarray, yc: int, yt: int) -> None:
    """Conjugate every term by CNOT(column yc -> column yt) on each row, in place."""
    a = grid[:, :, yc].copy()
    b = grid[:, :, yt].copy()
    grid[:, :, yc] = CNOT_IMAGE_C[a, b]
    grid[:, :, yt] = CNOT_IMAGE_T[a, b]
    coeffs *= CNOT_SIGN[a, b].prod(axis=1)


def _permute_grid(grid: np.ndarray, perm: ColumnPermutation) -> np.ndarray:
    out = np.empty_like(grid)
    out[:, :, list(perm.images)] = grid
    return out


@dataclass
class LogicalPauliState:
    """A ``k``-qubit state ``2^-k sum c_v sigma_v`` held as nonzero Pauli coefficients."""

    labels: np.ndarray
    coeffs: np.ndarray

    @property
    def n_qubits(self) -> int:
        return self.labels.shape[1]

    def coefficient(self, label: Sequence[int]) -> float:
        hit = np.all(self.labels == np.asarray(label, dtype=np.uint8), axis=1)
        return float(self.coeffs[hit].sum())

    def measure_z(self, row: int) -> tuple[float, Optional["LogicalPauliState"], Optional["LogicalPauliState"]]:
        """Z measurement of ``row``: ``(prob_plus, post_plus, post_minus)``.

        ``prob_plus = (1 + c_z)/2`` with ``c_z`` the coefficient of the lone Z on
        ``row``. Terms with X or Y on ``row`` vanish in both branches.
        """
        k = self.n_qubits
        if not 0 <= row < k:
            raise IndexError(f"row {row} outside [0, {k})")
        z_only = np.zeros(k, dtype=np.uint8)
        z_only[row] = 3
        c_z = self.coefficient(z_only)
        col = self.labels[:, row]
        keep = (col == 0) | (col == 3)
        rest = self.labels[keep].copy()
        rest[:, row] = 0
        is_z = col[keep] == 3
        keys = pack_labels(rest)
        uniq, inv = np.unique(keys, return_inverse=True)
        base = unpack_labels(uniq, k)
        posts = []
        for s in (1, -1):
            prob = (1 + s * c_z) / 2
            if prob <= 1e-15:
                posts.append(None)
                continue
            vals = np.bincount(inv, weights=self.coeffs[keep] * np.where(is_z, s, 1), minlength=len(uniq))
            vals = vals / (2 * prob)
            nz = np.abs(vals) > 1e-15
            with_z = base[nz].copy()
            with_z[:, row] = 3
            posts.append(
                LogicalPauliState(
                    np.concatenate([base[nz], with_z]), np.concatenate([vals[nz], s * vals[nz]])
                )
            )
        return (1 + c_z) / 2, posts[0], posts[1]

    def reduced(self, rows: Sequence[int]) -> np.ndarray:
        rows = list(rows)
        others = [x for x in range(self.n_qubits) if x not in rows]
        sel = np.all(self.labels[:, others] == 0, axis=1)
        return pauli_terms_to_dense(self.labels[sel][:, rows], self.coeffs[sel])


@dataclass(frozen=True)
class PauliCipher:
    gamma: Gamma
    code_columns: tuple[int, ...]
    labels: np.ndarray = field(repr=False)
    coeffs: np.ndarray = field(repr=False)
    backend = "pauli"

    @property
    def n_terms(self) -> int:
        return len(self.coeffs)

    def apply_transversal_clifford(self, g: str, row: int) -> "PauliCipher":
        if not 0 <= row < self.gamma.p:
            raise IndexError(f"row {row} outside the grid")
        labels = self.labels.copy()
        old = labels[:, row].copy()
        labels[:, row] = SINGLE_IMAGE[g][old]
        # n copies of the single-qubit phase; n is odd so a sign survives unchanged
        sign = SINGLE_SIGN[g][old].astype(float) ** self.gamma.n
        return PauliCipher(self.gamma, self.code_columns, labels, self.coeffs * sign)

    def apply_transversal_cnot(self, row_c: int, row_t: int) -> "PauliCipher":
        if row_c == row_t:
            raise ValueError("transversal CNOT needs distinct rows")
        for row in (row_c, row_t):
            if not 0 <= row < self.gamma.p:
                raise IndexError(f"row {row} outside the grid")
        labels = self.labels.copy()
        a, b = labels[:, row_c], labels[:, row_t]
        sign = CNOT_SIGN[a, b].astype(float) ** self.gamma.n
        labels[:, row_c], labels[:, row_t] = CNOT_IMAGE_C[a, b], CNOT_IMAGE_T[a, b]
        return PauliCipher(self.gamma, self.code_columns, labels, self.coeffs * sign)

    def grid_terms(self) -> tuple[np.ndarray, np.ndarray]:
        """Full ``(T, p, q)`` label grids and coefficients."""
        g = self.gamma
        grid = np.zeros((self.n_terms, g.p, g.q), dtype=np.uint8)
        grid[:, :, list(self.code_columns)] = self.labels[:, :, None]
        return grid, self.coeffs.copy()

    def reduced_state(self, positions: Sequence[tuple[int, int]]) -> np.ndarray:
        """Reduced state on grid ``(row, column)`` positions, first listed most significant."""
        grid, coeffs = self.grid_terms()
        flat = grid.reshape(len(grid), -1)
        idx = [x * self.gamma.q + y for x, y in positions]
        others = np.ones(flat.shape[1], dtype=bool)
        others[idx] = False
        sel = np.all(flat[:, others] == 0, axis=1)
        return pauli_terms_to_dense(flat[sel][:, idx], coeffs[sel])

    def decode(self, key: SecretKey) -> LogicalPauliState:
        g = self.gamma
        if key.q != g.q:
            raise ValueError(f"key acts on {key.q} columns, ciphertext has {g.q}")
        grid, coeffs = self.grid_terms()
        grid = _permute_grid(grid, key.perm.inverse())
        for c, t in reversed(encoding_cnots(g.n)):
            _grid_cnot_columns(grid, coeffs, c, t)
        sel = np.all(grid[:, :, 1:] == 0, axis=(1, 2))
        return LogicalPauliState(grid[sel][:, :, 0].copy(), coeffs[sel])

    def to_bytes(self) -> bytes:
        mask = sum(1 << y for y in self.code_columns)
        packed = pack_labels(self.labels)
        order = np.argsort(packed, kind="stable")
        rec = np.empty(self.n_terms, dtype=_RECORD)
        rec["mask"] = mask
        rec["labels"] = packed[order]
        rec["coeff"] = self.coeffs[order]
        return pack_header(TAG_PAULI, self.gamma) + struct.pack("<Q", self.n_terms) + rec.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "PauliCipher":
        tag, gamma, off = unpack_header(data)
        if tag != TAG_PAULI:
            raise ValueError("not a Pauli-propagation ciphertext")
        (count,) = struct.unpack_from("<Q", data, off)
        off += 8
        if len(data) - off != count * _RECORD.itemsize:
            raise ValueError("Pauli ciphertext length does not match its term count")
        rec = np.frombuffer(data, dtype=_RECORD, count=count, offset=off)
        masks = set(int(v) for v in rec["mask"])
        if len(masks) > 1:
            raise ValueError("inconsistent code-column masks")
        mask = masks.pop() if masks else 0
        cols = tuple(y for y in range(gamma.q) if mask >> y & 1)
        if len(cols) != gamma.n:
            raise ValueError("code-column mask does not select n columns")
        labels = unpack_labels(rec["labels"], gamma.p)
        return cls(gamma, cols, labels, rec["coeff"].astype(float))


class PauliPropagation:
    tag = "pauli"

    def encrypt(self, key: SecretKey, block) -> PauliCipher:
        g = block.gamma
        if key.q != g.q:
            raise ValueError(f"key acts on {key.q} columns, parameters need {g.q}")
        labels, coeffs = block.pauli_terms()
        # E(tau): maximally mixed ancillas contribute only identity labels
        grid = np.zeros((len(coeffs), g.p, g.q), dtype=np.uint8)
        grid[:, :, 0] = labels
        coeffs = np.array(coeffs, dtype=float)
        for c, t in encoding_cnots(g.n):
            _grid_cnot_columns(grid, coeffs, c, t)
        grid = _permute_grid(grid, key.perm)
        code = key.code_columns(g.n)
        anc = [y for y in range(g.q) if y not in code]
        lead = grid[:, :, code[0]]
        if not (np.all(grid[:, :, list(code)] == lead[:, :, None]) and np.all(grid[:, :, anc] == 0)):
            raise RuntimeError("encoded terms are not column-uniform on the code columns")
        return PauliCipher(g, code, lead.copy(), coeffs)
