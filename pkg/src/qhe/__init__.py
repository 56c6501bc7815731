"""Symmetric-key quantum homomorphic encryption by random-code embedding and column permutation."""
__version__ = "0.1.0"

from .backends import DenseOracle, PauliPropagation, make_backend, trace_norm_distance
from .circuit import Circuit, Gate, parse_circuit, random_clifford_circuit, serialize_circuit
from .params import Gamma, SecretKey, keygen
from .scheme import DecryptResult, decrypt, encrypt, evaluate, gate_counts
from .states import InputBlock, magic_state, preset_state
