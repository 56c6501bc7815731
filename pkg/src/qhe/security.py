"""Exact key-averaged ciphertexts and the closed-form indistinguishability bounds.

The adversary's view of a ciphertext is its uniform average over every column
permutation. For a single Pauli term on the ``p x q`` grid, averaging over
``S_q`` is the same as averaging uniformly over the *distinct* column
arrangements of that term: each arrangement is reached by the same number of
permutations. When every encoded term carries one label repeated on its ``n``
code columns (odd ``n``), the distinct arrangements are exactly the ``C(q, n)``
choices of code-column subset. For other code lengths the same rule still
applies, it just visits more arrangements per term.

Everything here is exact; nothing is sampled.
"""
from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .backends.metrics import (
    MAX_DENSE_QUBITS,
    CapacityError,
    n_qubits_of,
    pauli_coefficients,
    pauli_terms_to_dense,
    trace_norm_distance,
)
from .backends.pauliprop import _grid_cnot_columns
from .params import Gamma, encoding_cnots
from .states import InputBlock, as_density

MAX_DIRECT_COLUMNS = 7
MAX_ARRANGEMENTS = 2_000_000

__all__ = [
    "AuditReport",
    "SymmetrizedPauliTerm",
    "audit_security",
    "averaged_ciphertext",
    "direct_averaged_ciphertext",
    "encoded_terms",
    "eps_bound",
    "exact_security_distance",
    "lemma4_bound",
    "stirling_binomial_lower_bound",
    "theorem_eps_bound",
]

Tau = Union[np.ndarray, InputBlock]


def _tau_matrix(tau: Tau) -> np.ndarray:
    if isinstance(tau, InputBlock):
        return tau.dense()
    return as_density(tau)


def encoded_terms(tau: Tau, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Pauli expansion of ``U (tau (x) I/2^{p(n-1)}) U^dagger`` on the ``p x n`` code block.

    Returns label grids of shape ``(T, p, n)`` and real coefficients ``c`` with
    the block equal to ``2^{-pn} sum c sigma``.
    """
    rho = _tau_matrix(tau)
    p = n_qubits_of(rho)
    coeff = pauli_coefficients(rho).reshape(-1)
    nz = np.flatnonzero(np.abs(coeff) > 1e-14)
    labels = np.array(np.unravel_index(nz, (4,) * p), dtype=np.uint8).T.reshape(-1, p)
    grid = np.zeros((len(nz), p, n), dtype=np.uint8)
    grid[:, :, 0] = labels
    coeffs = coeff[nz].astype(float)
    for c, t in encoding_cnots(n):
        _grid_cnot_columns(grid, coeffs, c, t)
    return grid, coeffs


def _distinct_arrangements(items: Sequence) -> Iterator[tuple]:
    """Every distinct ordering of a multiset, each exactly once."""
    counts = Counter(items)
    keys = sorted(counts)
    total = len(items)

    def rec(prefix):
        if len(prefix) == total:
            yield tuple(prefix)
            return
        for key in keys:
            if counts[key]:
                counts[key] -= 1
                prefix.append(key)
                yield from rec(prefix)
                prefix.pop()
                counts[key] += 1

    yield from rec([])


def _arrangement_count(items: Sequence) -> int:
    out = math.factorial(len(items))
    for c in Counter(items).values():
        out //= math.factorial(c)
    return out


@dataclass(frozen=True)
class SymmetrizedPauliTerm:
    """A code-block Pauli term padded with ``m`` identity columns and spread over its column orbit.

    ``columns`` holds one label tuple per column (length ``q``). Its expansion
    has ``count`` summands of weight ``weight / count``; for a term repeated on
    all ``n`` code columns, ``count == C(q, n)``.
    """

    columns: tuple[tuple[int, ...], ...]
    weight: float

    @property
    def count(self) -> int:
        return _arrangement_count(self.columns)

    def expand(self) -> Iterator[tuple[np.ndarray, float]]:
        share = self.weight / self.count
        for arr in _distinct_arrangements(self.columns):
            yield np.array(arr, dtype=np.uint8).T, share


def symmetrized_terms(tau: Tau, n: int, m: int) -> list[SymmetrizedPauliTerm]:
    grid, coeffs = encoded_terms(tau, n)
    p = grid.shape[1]
    blank = (0,) * p
    out = []
    for g, c in zip(grid, coeffs):
        cols = tuple(tuple(int(v) for v in g[:, y]) for y in range(n)) + (blank,) * m
        out.append(SymmetrizedPauliTerm(cols, float(c)))
    return out


def _check_dense(p: int, q: int) -> None:
    if p * q > MAX_DENSE_QUBITS:
        raise CapacityError(
            f"a {p}x{q} grid has {p * q} qubits; dense averaging is limited to {MAX_DENSE_QUBITS}"
        )


def averaged_ciphertext(tau: Tau, n: int, m: int, method: str = "subset") -> np.ndarray:
    """Uniform average over all ``q!`` keys of the encryption of ``tau``.

    Grid qubit ``(x, y)`` is Kronecker factor ``x*q + y`` (factor 0 most
    significant). ``method`` is ``"subset"`` (orbit expansion of each Pauli
    term) or ``"direct"`` (literal sum over every permutation; small ``q``).
    """
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    q = n + m
    rho = _tau_matrix(tau)
    p = n_qubits_of(rho)
    _check_dense(p, q)
    if method == "direct":
        return direct_averaged_ciphertext(rho, n, m)
    if method != "subset":
        raise ValueError(f"unknown averaging method {method!r}")
    terms = symmetrized_terms(rho, n, m)
    visits = sum(t.count for t in terms)
    if visits > MAX_ARRANGEMENTS:
        raise CapacityError(f"{visits} arranged terms exceeds the audit limit {MAX_ARRANGEMENTS}")
    acc: dict[bytes, float] = {}
    for term in terms:
        for grid, w in term.expand():
            key = grid.tobytes()
            acc[key] = acc.get(key, 0.0) + w
    labels = np.frombuffer(b"".join(acc), dtype=np.uint8).reshape(len(acc), p * q)
    return pauli_terms_to_dense(labels, np.fromiter(acc.values(), float, len(acc)))


def _basis_permutation_cnot(k: int, c: int, t: int) -> np.ndarray:
    idx = np.arange(2**k)
    bc, bt = 1 << (k - 1 - c), 1 << (k - 1 - t)
    return np.where(idx & bc, idx ^ bt, idx)


def _column_transpose_axes(p: int, q: int, perm: Sequence[int]) -> list[int]:
    """Axes order sending the factor at ``(x, y)`` to ``(x, perm[y])``."""
    axes = [0] * (p * q)
    for x in range(p):
        for y in range(q):
            axes[x * q + perm[y]] = x * q + y
    return axes


def direct_averaged_ciphertext(tau: np.ndarray, n: int, m: int) -> np.ndarray:
    """Independent check: build the dense encryption and average it over all of ``S_q``."""
    rho = as_density(tau)
    p = n_qubits_of(rho)
    q = n + m
    _check_dense(p, q)
    if q > MAX_DIRECT_COLUMNS:
        raise CapacityError(f"direct averaging over {q}! permutations is refused")
    k = p * q
    full = np.kron(rho, np.eye(2 ** (k - p)) / 2 ** (k - p))
    # kron order is [(x, 0) for x] + rest; move factors to grid order
    order = [x * q for x in range(p)] + [x * q + y for x in range(p) for y in range(1, q)]
    axes = [0] * k
    for i, pos in enumerate(order):
        axes[pos] = i
    full = full.reshape([2] * (2 * k)).transpose(axes + [k + a for a in axes]).reshape(2**k, 2**k)
    for x in range(p):
        for c, t in encoding_cnots(n):
            perm = _basis_permutation_cnot(k, x * q + c, x * q + t)
            full = full[np.ix_(perm, perm)]
    tensor = full.reshape([2] * (2 * k))
    acc = np.zeros_like(full)
    for perm in itertools.permutations(range(q)):
        ax = _column_transpose_axes(p, q, perm)
        acc += tensor.transpose(ax + [k + a for a in ax]).reshape(2**k, 2**k)
    return acc / math.factorial(q)


def exact_security_distance(tau: Tau, tau2: Tau, n: int, m: int, method: str = "subset") -> float:
    """Trace-norm distance between the key-averaged encryptions of two inputs."""
    a = averaged_ciphertext(tau, n, m, method)
    b = averaged_ciphertext(tau2, n, m, method)
    return trace_norm_distance(a, b)


def lemma4_bound(p: int, n: int, m: int) -> float:
    """``2 (4^p - 1) / sqrt(C(n+m, n))``; ``p >= 1``."""
    for name, v in (("p", p), ("n", n), ("m", m)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")
    return 2 * (4**p - 1) / math.sqrt(math.comb(n + m, n))


def theorem_eps_bound(gamma: Gamma) -> float:
    """Closed-form indistinguishability bound for ``gamma`` with ``alpha = m/n``."""
    return eps_bound(gamma.p, gamma.n, gamma.m)


def eps_bound(p: int, n: int, m: int) -> float:
    alpha = m / n
    log = (
        1
        + 0.25 * math.log(8 * n / (math.pi * (1 + 1 / alpha)))
        + p * math.log(4)
        - m / 2 * math.log1p(1 / alpha)
        - n / 2 * math.log1p(alpha)
    )
    return math.exp(log)


def stirling_binomial_lower_bound(n: int, m: int) -> float:
    """Stirling-based lower bound on ``C(n+m, m)``."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    alpha = m / n
    log = (
        -2
        + 0.5 * math.log(2 * math.pi * (1 / alpha + 1) / n)
        + n * math.log1p(alpha)
        + alpha * n * math.log1p(1 / alpha)
    )
    return math.exp(log)


@dataclass
class AuditReport:
    params: dict
    inputs: str
    exact: float
    lemma4: float
    theorem_eps: Optional[float]
    method: str = "subset"
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok = self.exact <= self.lemma4 + 1e-10
        if self.theorem_eps is not None:
            ok = ok and self.lemma4 <= self.theorem_eps
        return ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        eps = "n/a" if self.theorem_eps is None else f"{self.theorem_eps:.6g}"
        rows = [
            ("params", json.dumps(self.params, sort_keys=True)),
            ("inputs", self.inputs),
            ("exact distance", f"{self.exact:.6g}"),
            ("pairwise bound", f"{self.lemma4:.6g}"),
            ("closed-form eps", eps),
            ("pass", str(self.passed)),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def audit_security(tau: Tau, tau2: Tau, n: int, m: int, inputs: str = "",
                   method: str = "subset") -> AuditReport:
    rho = _tau_matrix(tau)
    p = n_qubits_of(rho)
    exact = exact_security_distance(rho, tau2, n, m, method)
    eps = eps_bound(p, n, m) if m >= 1 else None
    return AuditReport({"p": p, "n": n, "m": m}, inputs, exact, lemma4_bound(p, n, m), eps, method)
