"""Plaintext states and the encoder input block (data copies plus magic states)."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .backends.metrics import is_density_matrix, ket_to_density, n_qubits_of, pauli_coefficients
from .params import Gamma


def magic_state() -> np.ndarray:
    """Amplitudes of ``T H |0>`` = ``(|0> + e^{i pi/4} |1>) / sqrt 2``."""
    return np.array([1, np.exp(1j * np.pi / 4)], dtype=complex) / np.sqrt(2)


def preset_state(spec: str, r: int) -> np.ndarray:
    """Named r-qubit pure states: zero, one, plus, ghz, random:<seed>."""
    dim = 2**r
    if spec == "zero":
        psi = np.zeros(dim, complex)
        psi[0] = 1
    elif spec == "one":
        psi = np.zeros(dim, complex)
        psi[-1] = 1
    elif spec == "plus":
        psi = np.full(dim, dim**-0.5, complex)
    elif spec == "ghz":
        psi = np.zeros(dim, complex)
        psi[0] = psi[-1] = 2**-0.5
    elif spec.startswith("random:"):
        rng = np.random.default_rng(int(spec.split(":", 1)[1]))
        psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        psi /= np.linalg.norm(psi)
    else:
        raise ValueError(f"unknown state preset {spec!r}")
    return psi


def as_density(state: np.ndarray) -> np.ndarray:
    """Accept a ket or a density matrix; validate and return the density matrix."""
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        if abs(np.linalg.norm(state) - 1) > 1e-12:
            raise ValueError("state vector is not normalised")
        rho = ket_to_density(state)
    else:
        rho = state
    n_qubits_of(rho)
    if not is_density_matrix(rho):
        raise ValueError("not a density matrix (Hermitian, PSD, unit trace)")
    return rho


def _product_terms(factors):
    """Tensor product of Pauli-coefficient tables given as ``(labels, coeffs)`` pairs."""
    labels = np.zeros((1, 0), dtype=np.uint8)
    coeffs = np.ones(1)
    for flab, fco in factors:
        labels = np.concatenate(
            [np.repeat(labels, len(flab), axis=0), np.tile(flab, (len(labels), 1))], axis=1
        )
        coeffs = np.outer(coeffs, fco).ravel()
    return labels, coeffs


def _nonzero_terms(rho: np.ndarray, tol: float = 1e-14):
    c = pauli_coefficients(rho)
    k = c.ndim
    idx = np.argwhere(np.abs(c) > tol)
    return idx.astype(np.uint8).reshape(-1, k), c[tuple(idx.T)]


@dataclass(frozen=True)
class InputBlock:
    """``b`` copies of ``rho_input`` followed, per copy, by ``t`` magic states.

    Row order within the column-1 register follows the grid: copy ``beta``
    occupies global rows ``beta*(r+t) ... beta*(r+t)+r+t-1``, data first.
    """

    gamma: Gamma
    rho: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        rho = as_density(self.rho)
        if rho.shape[0] != 2**self.gamma.r:
            raise ValueError(f"input has {n_qubits_of(rho)} qubits but r={self.gamma.r}")
        object.__setattr__(self, "rho", rho)

    def copy_factor(self) -> np.ndarray:
        """Density matrix of one copy: ``rho_input (x) |T><T|^{(x) t}``."""
        out = self.rho
        magic = ket_to_density(magic_state())
        for _ in range(self.gamma.t):
            out = np.kron(out, magic)
        return out

    def dense(self) -> np.ndarray:
        """The full ``p``-qubit column-1 state; only for small ``p``."""
        one = self.copy_factor()
        out = np.ones((1, 1), dtype=complex)
        for _ in range(self.gamma.b):
            out = np.kron(out, one)
        return out

    def pure_components(self, tol: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
        """Weights and ``p``-qubit kets whose mixture is the block."""
        w, v = np.linalg.eigh(self.rho)
        keep = w > tol
        w, v = w[keep], v[:, keep].T
        magic = magic_state()
        per_copy = []
        for psi in v:
            for _ in range(self.gamma.t):
                psi = np.kron(psi, magic)
            per_copy.append(psi)
        weights, kets = [], []
        for combo in itertools.product(range(len(w)), repeat=self.gamma.b):
            ket = np.ones(1, dtype=complex)
            for i in combo:
                ket = np.kron(ket, per_copy[i])
            weights.append(np.prod(w[list(combo)]))
            kets.append(ket)
        return np.array(weights), np.array(kets)

    def pauli_terms(self) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero ``(labels, coeffs)`` with ``tau = 2^-p sum c_v sigma_v`` on the p column-1 rows."""
        data = _nonzero_terms(self.rho)
        magic = _nonzero_terms(ket_to_density(magic_state()))
        copy = _product_terms([data] + [magic] * self.gamma.t)
        return _product_terms([copy] * self.gamma.b)
