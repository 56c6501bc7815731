"""Interchangeable simulation engines for the encrypted grid."""
from .dense import DenseCipher, DenseOracle, apply_gate_dense
from .metrics import CapacityError, DensityState, partial_trace, trace_norm_distance
from .pauliprop import LogicalPauliState, PauliCipher, PauliPropagation
from .serialize import load_cipher


def make_backend(name: str, **options):
    """``"oracle"`` (dense) or ``"pauli"`` (coefficient propagation)."""
    if name in ("oracle", "dense"):
        return DenseOracle(**options)
    if name == "pauli":
        return PauliPropagation()
    raise ValueError(f"unknown backend {name!r}")


__all__ = [
    "CapacityError",
    "DenseCipher",
    "DenseOracle",
    "DensityState",
    "LogicalPauliState",
    "PauliCipher",
    "PauliPropagation",
    "apply_gate_dense",
    "load_cipher",
    "make_backend",
    "partial_trace",
    "trace_norm_distance",
]
