"""KeyGen / Enc / Eval / Dec over a pluggable grid backend.

Typical use::

    gamma = Gamma(b=1, r=1, t=1, n=5, m=1)
    key = keygen(gamma, rng=7)
    block = InputBlock(gamma, preset_state("plus", 1))
    ct = encrypt(key, block, PauliPropagation())
    ct = evaluate(parse_circuit("T 0", 1), ct)
    result = decrypt(key, ct)
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .circuit import Circuit, validate_for_gamma
from .params import Gamma, SecretKey, encoding_cnots, keygen
from .states import InputBlock

MAX_EXACT_MEASUREMENTS = 20

__all__ = [
    "DecryptBranch",
    "DecryptResult",
    "SchemeError",
    "decrypt",
    "decryption_gates",
    "encrypt",
    "evaluate",
    "gate_counts",
    "keygen",
]


class SchemeError(ValueError):
    """Circuit or ciphertext does not match the parameters."""


def encrypt(key: SecretKey, block: InputBlock, backend):
    """``P_kappa U E(tau) U^dagger P_kappa^dagger`` in the chosen backend."""
    return backend.encrypt(key, block)


def evaluate(c: Circuit, ct):
    """Apply the transversal image of ``c`` to every copy; never touches a key.

    The ``alpha``-th T gate on qubit ``z`` becomes a transversal CNOT from the
    data row onto the copy's ``alpha``-th magic row, then one back. Its Z
    measurement is deferred to decryption.
    """
    gamma = ct.gamma
    problems = validate_for_gamma(c, gamma)
    if problems:
        raise SchemeError("; ".join(problems))
    n_t = 0
    for gate in c.gates:
        for beta in range(gamma.b):
            if gate.kind == "CNOT":
                z, z2 = gate.qubits
                ct = ct.apply_transversal_cnot(gamma.row(beta, z), gamma.row(beta, z2))
            elif gate.kind == "T":
                data = gamma.row(beta, gate.qubits[0])
                magic = gamma.row(beta, gamma.r + n_t)
                ct = ct.apply_transversal_cnot(data, magic)
                ct = ct.apply_transversal_cnot(magic, data)
            else:
                ct = ct.apply_transversal_clifford(gate.kind, gamma.row(beta, gate.qubits[0]))
        if gate.kind == "T":
            n_t += 1
    return ct


@dataclass(frozen=True)
class DecryptBranch:
    """One joint outcome of the deferred Z measurements.

    outcomes[beta][i] is +1 or -1 for magic row ``i`` of copy ``beta``.
    """

    outcomes: tuple[tuple[int, ...], ...]
    probability: float
    counts: tuple[int, ...]
    f: int
    alpha: Optional[int]
    rho_out: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class DecryptResult:
    """Decrypted output.

    ``alpha`` is the 0-based index of the copy whose data rows were returned
    (None on failure). ``probability`` is the probability of this result's
    class (f=1 or f=0). In exact mode ``rho_out`` is the mixture over every
    branch of that class; in sampling mode it is the single drawn branch.
    When ``f == 0`` the output carries no guarantee.
    """

    rho_out: np.ndarray = field(repr=False)
    f: int
    counts: tuple[int, ...]
    alpha: Optional[int]
    probability: float
    branches: tuple[DecryptBranch, ...] = field(repr=False)

    @property
    def success_probability(self) -> float:
        return float(sum(br.probability for br in self.branches if br.f == 1))


def _classify(gamma: Gamma, outcomes):
    if gamma.t == 0:
        counts = tuple(0 for _ in range(gamma.b))
    else:
        counts = tuple(sum((1 - c) // 2 for c in per_copy) for per_copy in outcomes)
    if min(counts) >= 1:
        return counts, 0, None
    return counts, 1, counts.index(0)


def _branch(gamma: Gamma, outcomes, prob, state) -> DecryptBranch:
    counts, f, alpha = _classify(gamma, outcomes)
    rows = gamma.data_rows(alpha if f else 0)
    return DecryptBranch(outcomes, prob, counts, f, alpha, state.reduced(rows))


def decrypt(key: SecretKey, ct, mode: str = "exact", rng=None) -> DecryptResult:
    """Unpermute, un-encode, read the magic rows' Z values, pick the first clean copy.

    mode ``"exact"`` enumerates every measurement outcome with its exact
    probability; ``"sample"`` draws one outcome sequence from ``rng`` (a seed
    or ``numpy.random.Generator``).
    """
    gamma = ct.gamma
    if key.q != gamma.q:
        raise SchemeError(f"key acts on {key.q} columns, ciphertext has {gamma.q}")
    decoded = ct.decode(key)
    meas = [row for beta in range(gamma.b) for row in gamma.magic_rows(beta)]

    def regroup(flat):
        return tuple(tuple(flat[beta * gamma.t:(beta + 1) * gamma.t]) for beta in range(gamma.b))

    if mode == "exact":
        if len(meas) > MAX_EXACT_MEASUREMENTS:
            raise SchemeError(f"{len(meas)} deferred measurements is too many to enumerate")
        leaves = []

        def expand(state, i, flat, prob):
            if i == len(meas):
                leaves.append(_branch(gamma, regroup(flat), prob, state))
                return
            pp, plus, minus = state.measure_z(meas[i])
            if plus is not None:
                expand(plus, i + 1, flat + (1,), prob * pp)
            if minus is not None:
                expand(minus, i + 1, flat + (-1,), prob * (1 - pp))

        expand(decoded, 0, (), 1.0)
        branches = tuple(leaves)
        good = [br for br in branches if br.f == 1]
        chosen = good if good else list(branches)
        total = sum(br.probability for br in chosen)
        rho = sum(br.probability * br.rho_out for br in chosen) / total
        lead = max(chosen, key=lambda br: br.probability)
        return DecryptResult(rho, lead.f, lead.counts, lead.alpha, float(total), branches)

    if mode == "sample":
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        state, flat, prob = decoded, (), 1.0
        for row in meas:
            pp, plus, minus = state.measure_z(row)
            if minus is None or (plus is not None and gen.random() < pp):
                state, flat, prob = plus, flat + (1,), prob * pp
            else:
                state, flat, prob = minus, flat + (-1,), prob * (1 - pp)
        br = _branch(gamma, regroup(flat), prob, state)
        return DecryptResult(br.rho_out, br.f, br.counts, br.alpha, prob, (br,))

    raise ValueError(f"unknown decrypt mode {mode!r}")


def gate_counts(gamma: Gamma) -> dict[str, int]:
    """Worst-case gate budget of decryption; depends on ``gamma`` only."""
    return {
        "u_dagger_cnots": 2 * (gamma.n - 1) * gamma.p,
        "permutation_swaps_max": (gamma.n + gamma.m - 1) * gamma.p,
    }


def decryption_gates(gamma: Gamma, key: SecretKey) -> dict[str, int]:
    """Gates actually needed to decrypt under ``key``: swaps from the cycle structure of the
    inverse permutation on every row, plus the CNOTs of the inverse encoding ladder."""
    inv = key.perm.inverse()
    seen, swaps = set(), 0
    for start in range(gamma.q):
        if start in seen:
            continue
        length, y = 0, start
        while y not in seen:
            seen.add(y)
            y = inv(y)
            length += 1
        swaps += length - 1
    return {
        "u_dagger_cnots": len(encoding_cnots(gamma.n)) * gamma.p,
        "permutation_swaps": swaps * gamma.p,
    }
