"""In-place statevector kernels on flat amplitude arrays.

Bit ``k`` of the flat index is grid qubit ``k``; any higher bits index the
branch, so a ``(branches, 2**N)`` C-contiguous block can be passed raveled.
"""
import numba
import numpy as np


@numba.njit(cache=True)
def apply_1q(a, k, g00, g01, g10, g11):
    m = 1 << k
    for i in range(a.size):
        if not (i & m):
            j = i | m
            x = a[i]
            y = a[j]
            a[i] = g00 * x + g01 * y
            a[j] = g10 * x + g11 * y


@numba.njit(cache=True)
def apply_cnot(a, c, t):
    mc = 1 << c
    mt = 1 << t
    for i in range(a.size):
        if (i & mc) and not (i & mt):
            j = i | mt
            x = a[i]
            a[i] = a[j]
            a[j] = x


def apply_matrix(a: np.ndarray, k: int, g: np.ndarray) -> None:
    apply_1q(a, k, complex(g[0, 0]), complex(g[0, 1]), complex(g[1, 0]), complex(g[1, 1]))
