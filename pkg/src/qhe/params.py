"""Scheme parameters, secret keys and grid addressing.

Grid positions are 0-based in code and in every file format: row ``x`` in
``[0, p)``, column ``y`` in ``[0, q)``. Row ``x`` / column ``y`` here is row
``x+1`` / column ``y+1`` in the 1-based notation used in the README.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .pauli import ColumnPermutation, check_code_length


@dataclass(frozen=True)
class Gamma:
    """The parameter tuple ``(b, r, t, n, m)``.

    b: number of encoded copies of the input.
    r: data qubits per copy.
    t: T gates supported (one magic state per T gate, per copy).
    n: code length, must be ``4n'+1`` with ``n' >= 1``.
    m: maximally mixed ancilla columns.
    """

    b: int
    r: int
    t: int
    n: int
    m: int

    def __post_init__(self) -> None:
        for name in ("b", "r", "t", "n", "m"):
            if not isinstance(getattr(self, name), (int, np.integer)):
                raise TypeError(f"{name} must be an integer")
        if self.b < 1 or self.r < 1 or self.m < 1:
            raise ValueError("b, r and m must be positive")
        if self.t < 0:
            raise ValueError("t must be non-negative")
        check_code_length(self.n)

    @property
    def p(self) -> int:
        return self.b * (self.r + self.t)

    @property
    def q(self) -> int:
        return self.n + self.m

    def row(self, beta: int, x: int) -> int:
        """Global row of local row ``x`` in copy ``beta`` (both 0-based)."""
        if not (0 <= beta < self.b and 0 <= x < self.r + self.t):
            raise IndexError(f"(copy {beta}, row {x}) outside the grid")
        return beta * (self.r + self.t) + x

    def data_rows(self, beta: int) -> list[int]:
        return [self.row(beta, x) for x in range(self.r)]

    def magic_rows(self, beta: int) -> list[int]:
        return [self.row(beta, self.r + i) for i in range(self.t)]

    def as_dict(self) -> dict:
        return {"b": self.b, "r": self.r, "t": self.t, "n": self.n, "m": self.m}

    @classmethod
    def from_dict(cls, d: dict) -> "Gamma":
        return cls(*(int(d[k]) for k in ("b", "r", "t", "n", "m")))

    @classmethod
    def parse(cls, text: str) -> "Gamma":
        """Accept ``"b,r,t,n,m"`` or a JSON object."""
        text = text.strip()
        if text.startswith("{"):
            return cls.from_dict(json.loads(text))
        parts = [int(v) for v in text.split(",")]
        if len(parts) != 5:
            raise ValueError("expected five comma-separated integers b,r,t,n,m")
        return cls(*parts)


@dataclass(frozen=True)
class SecretKey:
    perm: ColumnPermutation
    seed: Optional[int] = None

    @property
    def q(self) -> int:
        return self.perm.q

    def code_columns(self, n: int) -> tuple[int, ...]:
        """Columns holding the code after encryption, ``kappa({0..n-1})``, sorted."""
        return tuple(sorted(self.perm(y) for y in range(n)))

    def to_json(self) -> str:
        return json.dumps({"q": self.q, "perm": list(self.perm.images), "seed": self.seed}) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SecretKey":
        d = json.loads(text)
        perm = ColumnPermutation(tuple(d["perm"]))
        if perm.q != int(d["q"]):
            raise ValueError("key file: q does not match permutation length")
        return cls(perm, d.get("seed"))


def keygen(gamma: Gamma, rng=None) -> SecretKey:
    """Uniformly random column permutation of the ``q = n+m`` columns.

    ``rng`` may be an int seed (recorded in the key), a ``random.Random``, or
    None for OS entropy.
    """
    seed = None
    if rng is None or isinstance(rng, (int, np.integer)):
        seed = None if rng is None else int(rng)
        rng = random.Random(seed)
    images = list(range(gamma.q))
    rng.shuffle(images)
    return SecretKey(ColumnPermutation(tuple(images)), seed)


def encoding_cnots(n: int, ordering: str = "canonical") -> list[tuple[int, int]]:
    """The CNOT ladder ``U_x`` on the first ``n`` columns of one row, in application order.

    Each entry is ``(control_column, target_column)``. The ladder first applies
    CNOTs from every column ``j >= 1`` onto column 0, then CNOTs from column 0
    onto every ``j >= 1``. The two groups are each internally commuting, so the
    three orderings below implement the same unitary:

    ``canonical``: ascending ``j`` in both groups.
    ``displayed``: descending ``j`` in both groups.
    ``definitions``: first group descending, second group ascending.
    """
    gather = [(j, 0) for j in range(1, n)]
    spread = [(0, j) for j in range(1, n)]
    if ordering == "canonical":
        pass
    elif ordering == "displayed":
        gather = gather[::-1]
        spread = spread[::-1]
    elif ordering == "definitions":
        gather = gather[::-1]
    else:
        raise ValueError(f"unknown ordering {ordering!r}")
    return gather + spread
