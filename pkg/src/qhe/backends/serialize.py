"""Ciphertext container format.

Header (little-endian): magic ``b"QHE1"``, one backend tag byte, then the
five parameters ``b, r, t, n, m`` as uint32. The body depends on the tag:

* dense (tag 1): ``uint32 n_qubits``, ``uint64 n_branches``, the branch
  weights as float64, then every branch's ``2**n_qubits`` amplitudes as
  (real, imag) float64 pairs. Grid qubit ``(x, y)`` is amplitude-index bit
  ``x*q + y`` (0-based, least significant first).
* pauli (tag 2): ``uint64 n_terms`` then ``n_terms`` records
  ``(uint64 column_bitmask, uint64 packed_labels, float64 coefficient)``
  sorted by ``packed_labels``. Column ``y`` (0-based) is bit ``y`` of the
  mask; row ``x`` occupies label bits ``2x, 2x+1``.
"""
from __future__ import annotations

import struct

from ..params import Gamma

MAGIC = b"QHE1"
TAG_DENSE = 1
TAG_PAULI = 2
_HEADER = struct.Struct("<4sB5I")


def pack_header(tag: int, gamma: Gamma) -> bytes:
    return _HEADER.pack(MAGIC, tag, gamma.b, gamma.r, gamma.t, gamma.n, gamma.m)


def unpack_header(data: bytes) -> tuple[int, Gamma, int]:
    if len(data) < _HEADER.size:
        raise ValueError("ciphertext too short")
    magic, tag, *params = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError("bad ciphertext magic")
    if tag not in (TAG_DENSE, TAG_PAULI):
        raise ValueError(f"unknown backend tag {tag}")
    return tag, Gamma(*params), _HEADER.size


def load_cipher(data: bytes):
    """Decode either ciphertext flavour."""
    from .dense import DenseCipher
    from .pauliprop import PauliCipher

    tag, _, _ = unpack_header(data)
    if tag == TAG_DENSE:
        return DenseCipher.from_bytes(data)
    return PauliCipher.from_bytes(data)
