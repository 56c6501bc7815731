"""Small dense density matrices: partial traces, Pauli expansions, trace norm.

Multi-qubit matrices here use the Kronecker convention: qubit 0 is the most
significant tensor factor.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..pauli import PAULI_MATRICES

MAX_DENSE_QUBITS = 12


class CapacityError(RuntimeError):
    """A dense object would exceed the desk-scale guard."""


def n_qubits_of(rho: np.ndarray) -> int:
    dim = rho.shape[0]
    k = dim.bit_length() - 1
    if rho.shape != (dim, dim) or 2**k != dim:
        raise ValueError(f"not a square qubit matrix: shape {rho.shape}")
    return k


def partial_trace(rho: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Reduce ``rho`` to the qubits in ``keep``, returned in the order given."""
    k = n_qubits_of(rho)
    keep = list(keep)
    if len(set(keep)) != len(keep) or any(not 0 <= v < k for v in keep):
        raise ValueError(f"bad qubit selection {keep} for {k} qubits")
    drop = [v for v in range(k) if v not in keep]
    t = rho.reshape([2] * (2 * k))
    t = t.transpose(keep + drop + [k + v for v in keep] + [k + v for v in drop])
    dk, dd = 2 ** len(keep), 2 ** len(drop)
    t = t.reshape(dk, dd, dk, dd)
    return np.einsum("ajbj->ab", t)


def trace_norm_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Schatten-1 norm of ``rho - sigma`` (no factor 1/2; lies in [0, 2] for states)."""
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch {rho.shape} vs {sigma.shape}")
    diff = rho - sigma
    diff = (diff + diff.conj().T) / 2
    return float(np.abs(np.linalg.eigvalsh(diff)).sum())


def pauli_coefficients(rho: np.ndarray) -> np.ndarray:
    """``c[v] = tr(sigma_v rho)`` for every label vector, as an array of shape ``(4,)*k``."""
    k = n_qubits_of(rho)
    t = rho.reshape([2] * (2 * k))
    # contract qubit j's (row, col) pair with sigma^T so that sum_ab sigma_ba rho_ab
    for j in range(k):
        # remaining row axes sit first, the matching column axis at k - j
        t = np.tensordot(t, PAULI_MATRICES, axes=([0, k - j], [2, 1]))
    return np.real(t)


def pauli_terms_to_dense(labels: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """``(1/2^k) sum_i coeffs[i] sigma_{labels[i]}`` for labels of shape ``(T, k)``.

    A Pauli string sends basis column ``i`` to row ``i ^ xmask`` with value
    ``i^{#Y} (-1)^{|i & zmask|}``, so each term costs ``O(2^k)``.
    """
    labels = np.asarray(labels, dtype=np.uint8)
    k = labels.shape[1]
    if k > MAX_DENSE_QUBITS:
        raise CapacityError(f"{k} qubits exceeds the dense limit {MAX_DENSE_QUBITS}")
    dim = 2**k
    weights = (1 << np.arange(k - 1, -1, -1)).astype(np.int64)
    xmask = ((labels == 1) | (labels == 2)) @ weights
    zmask = ((labels == 3) | (labels == 2)) @ weights
    n_y = (labels == 2).sum(axis=1)
    cols = np.arange(dim, dtype=np.int64)
    out = np.zeros((dim, dim), dtype=complex)
    for x, z, ny, c in zip(xmask, zmask, n_y, coeffs):
        signs = 1 - 2 * (np.bitwise_count(cols & z) & 1).astype(np.int64)
        out[cols ^ x, cols] += c * (1j**ny) * signs
    return out / dim


def ket_to_density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def is_density_matrix(rho: np.ndarray, tol: float = 1e-12, psd_tol: float = 1e-9) -> bool:
    if not np.allclose(rho, rho.conj().T, atol=tol):
        return False
    if abs(np.trace(rho) - 1) > tol:
        return False
    return bool(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() >= -psd_tol)


@dataclass
class DensityState:
    """A decoded logical state held as a dense matrix over ``k`` qubits."""

    rho: np.ndarray

    @property
    def n_qubits(self) -> int:
        return n_qubits_of(self.rho)

    def measure_z(self, row: int) -> tuple[float, Optional["DensityState"], Optional["DensityState"]]:
        """Projective Z measurement of qubit ``row``.

        Returns ``(prob_plus, post_plus, post_minus)``; a post-state is None when
        its outcome has zero probability.
        """
        k = self.n_qubits
        if not 0 <= row < k:
            raise IndexError(f"row {row} outside [0, {k})")
        diag = np.array([(i >> (k - 1 - row)) & 1 for i in range(2**k)])
        out = []
        for bit in (0, 1):
            mask = diag == bit
            proj = self.rho * np.outer(mask, mask)
            prob = float(np.trace(proj).real)
            out.append((prob, DensityState(proj / prob) if prob > 1e-15 else None))
        return out[0][0], out[0][1], out[1][1]

    def reduced(self, rows: Sequence[int]) -> np.ndarray:
        return partial_trace(self.rho, rows)


def all_labels(k: int) -> np.ndarray:
    return np.array(list(itertools.product(range(4), repeat=k)), dtype=np.uint8).reshape(-1, k)
