import numpy as np
import pytest
from hypothesis import given, strategies as st

from qhe.backends import (
    CapacityError,
    DenseOracle,
    PauliPropagation,
    load_cipher,
    partial_trace,
    trace_norm_distance,
)
from qhe.backends.dense import DenseCipher, _ExplicitSource, apply_gate_dense, grid_position
from qhe.backends.metrics import DensityState, pauli_coefficients, pauli_terms_to_dense
from qhe.backends.pauliprop import LogicalPauliState, PauliCipher, pack_labels, unpack_labels
from qhe.params import Gamma, encoding_cnots, keygen
from qhe.pauli import CNOT_MATRIX, PAULI_MATRICES, PauliLabel as P
from qhe.states import InputBlock, magic_state, preset_state

from conftest import kron_all


def _dm(psi):
    psi = np.asarray(psi, complex)
    return np.outer(psi, psi.conj())


ZERO, ONE = _dm([1, 0]), _dm([0, 1])
PLUS = _dm(np.array([1, 1]) / np.sqrt(2))


# ---------------------------------------------------------------- metrics


def test_trace_norm_examples():
    assert trace_norm_distance(ZERO, ZERO) == 0
    assert np.isclose(trace_norm_distance(ZERO, ONE), 2)
    assert np.isclose(trace_norm_distance(ZERO, PLUS), np.sqrt(2))
    with pytest.raises(ValueError):
        trace_norm_distance(ZERO, np.eye(4) / 4)


def test_trace_norm_equals_singular_value_sum(rng):
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    b = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    ra, rb = a @ a.conj().T, b @ b.conj().T
    ra, rb = ra / np.trace(ra), rb / np.trace(rb)
    assert np.isclose(trace_norm_distance(ra, rb), np.linalg.svd(ra - rb, compute_uv=False).sum())


def test_partial_trace_of_product(rng):
    a = _dm(preset_state("random:1", 1))
    b = _dm(preset_state("random:2", 2))
    full = np.kron(a, b)
    assert np.allclose(partial_trace(full, [0]), a)
    assert np.allclose(partial_trace(full, [1, 2]), b)
    assert np.allclose(partial_trace(full, [0, 1, 2]), full)
    # reordering the kept qubits swaps tensor factors
    ab = np.kron(_dm(preset_state("random:5", 1)), _dm(preset_state("random:6", 1)))
    ba = partial_trace(ab, [1, 0])
    assert np.allclose(ba, np.kron(partial_trace(ab, [1]), partial_trace(ab, [0])))


def test_pauli_coefficients_roundtrip(rng):
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    rho = _dm(psi / np.linalg.norm(psi))
    c = pauli_coefficients(rho)
    labels = np.array(np.unravel_index(np.arange(64), (4,) * 3)).T
    assert np.allclose(pauli_terms_to_dense(labels, c.reshape(-1)), rho)
    assert np.isclose(c[0, 0, 0], 1)
    # c[v] = tr(sigma_v rho) with qubit 0 the most significant factor
    assert np.isclose(c[3, 0, 1], np.trace(kron_all([PAULI_MATRICES[3], np.eye(2), PAULI_MATRICES[1]]) @ rho).real)


def test_density_state_measurement():
    st_ = DensityState(np.kron(ZERO, _dm(magic_state())))
    pp, plus, minus = st_.measure_z(0)
    assert np.isclose(pp, 1) and minus is None and np.allclose(plus.rho, st_.rho)
    pp, plus, minus = st_.measure_z(1)
    assert np.isclose(pp, 0.5)
    assert np.allclose(plus.reduced([1]), ZERO) and np.allclose(minus.reduced([1]), ONE)


# ---------------------------------------------------------------- dense oracle


def _fresh(gamma, rho):
    return DenseOracle().fresh(gamma, InputBlock(gamma, rho))


def _single_branch(gamma, ket):
    return DenseCipher(gamma, _ExplicitSource(np.array([1.0]), np.asarray(ket, complex)[None, :]))


@pytest.mark.parametrize("x, y", [(0, 0), (0, 4), (1, 2), (1, 5)])
def test_amplitude_bit_mapping(x, y):
    g = Gamma(1, 2, 0, 5, 1)
    n = g.p * g.q
    ket = np.zeros(2**n)
    ket[0] = 1
    st_ = apply_gate_dense(_single_branch(g, ket), "X", grid_position(x, y, g.q))
    _, amps = st_.amplitudes()
    assert np.flatnonzero(amps[0]).tolist() == [1 << (x * g.q + y)]


def test_h_twice_is_identity(rng):
    g = Gamma(1, 1, 0, 5, 1)
    ket = rng.normal(size=64) + 1j * rng.normal(size=64)
    ket /= np.linalg.norm(ket)
    st_ = _single_branch(g, ket).apply_gate("H", 3).apply_gate("H", 3)
    assert np.abs(st_.amplitudes()[1][0] - ket).max() < 1e-12


def test_cnot_matches_matrix_oracle(rng):
    g = Gamma(1, 1, 0, 5, 1)
    for _ in range(5):
        ket = rng.normal(size=64) + 1j * rng.normal(size=64)
        ket /= np.linalg.norm(ket)
        st_ = _single_branch(g, ket).apply_cnot(1, 4)
        rho = st_.reduced_state([1, 4])
        # flat index bit k is grid qubit k; kron order wants qubit 0 first
        kron_ket = ket.reshape((2,) * 6).transpose(range(5, -1, -1)).reshape(-1)
        ref = partial_trace(_dm(kron_ket), [1, 4])
        ref = CNOT_MATRIX @ ref @ CNOT_MATRIX.conj().T
        assert np.allclose(rho, ref)
        assert np.isclose(np.linalg.norm(st_.amplitudes()[1][0]), 1)


def test_dense_index_guards():
    g = Gamma(1, 1, 0, 5, 1)
    st_ = _fresh(g, ZERO)
    with pytest.raises(IndexError):
        st_.apply_gate("H", 6)
    with pytest.raises(ValueError):
        st_.apply_cnot(1, 1)


def test_fresh_ciphertext_ancillas_are_maximally_mixed():
    g = Gamma(1, 1, 0, 5, 2)
    st_ = DenseOracle().encrypt(keygen(g, 3), InputBlock(g, ZERO))
    weights, amps = st_.amplitudes()
    assert np.isclose(weights.sum(), 1)
    assert np.allclose(np.linalg.norm(amps, axis=1), 1, atol=1e-12)
    code = keygen(g, 3).code_columns(g.n)
    for y in range(g.q):
        if y not in code:
            assert np.allclose(st_.reduced_state([y]), np.eye(2) / 2, atol=1e-12)


def test_enumeration_guard():
    g = Gamma(1, 1, 0, 5, 17)  # 21 ancilla qubits
    with pytest.raises(CapacityError, match="sampling"):
        DenseOracle().fresh(g, InputBlock(g, ZERO))


def test_sampled_mixture_tracks_exact_expectation():
    g = Gamma(1, 1, 0, 5, 1)
    key = keygen(g, 1)
    block = InputBlock(g, PLUS)
    exact = DenseOracle().encrypt(key, block)
    y = key.code_columns(g.n)[0]
    # <Z> on one encrypted code qubit; exact value from full enumeration
    z = np.diag([1, -1])
    ref = np.trace(exact.reduced_state([y]) @ z).real
    samples = 400
    est = np.trace(DenseOracle("sample", samples=samples, seed=5).encrypt(key, block).reduced_state([y]) @ z).real
    assert abs(est - ref) <= 3 / np.sqrt(samples)


def test_dense_serialization_roundtrip():
    g = Gamma(1, 1, 0, 5, 1)
    st_ = DenseOracle().encrypt(keygen(g, 2), InputBlock(g, PLUS)).apply_transversal_clifford("S", 0)
    data = st_.to_bytes()
    assert data[:4] == b"QHE1"
    back = load_cipher(data)
    assert isinstance(back, DenseCipher)
    assert back.to_bytes() == data
    with pytest.raises(ValueError):
        load_cipher(data[:-8])


# ---------------------------------------------------------------- Pauli propagation


def _cipher(labels, coeffs, gamma=Gamma(1, 2, 0, 5, 1)):
    return PauliCipher(gamma, (0, 1, 2, 3, 4), np.array(labels, np.uint8), np.array(coeffs, float))


def test_transversal_clifford_examples():
    ct = _cipher([[0, 0], [1, 0], [2, 0]], [1, 0.5, 0.25])
    h = ct.apply_transversal_clifford("H", 0)
    assert h.labels.tolist() == [[0, 0], [3, 0], [2, 0]]
    assert h.coeffs.tolist() == [1, 0.5, -0.25]
    s = ct.apply_transversal_clifford("S", 0)
    assert s.labels[2, 0] == P.X and s.coeffs[2] == -0.25
    assert s.labels[0].tolist() == [0, 0] and s.coeffs[0] == 1
    with pytest.raises(IndexError):
        ct.apply_transversal_clifford("H", 2)


def test_transversal_cnot_examples():
    ct = _cipher([[0, 0], [1, 0]], [1, 0.5])
    out = ct.apply_transversal_cnot(0, 1)
    assert out.labels.tolist() == [[0, 0], [1, 1]]
    with pytest.raises(ValueError):
        ct.apply_transversal_cnot(1, 1)


def test_logical_measurement_examples():
    zero = LogicalPauliState(np.array([[0], [3]], np.uint8), np.array([1.0, 1.0]))
    pp, plus, minus = zero.measure_z(0)
    assert pp == 1 and minus is None
    assert np.allclose(plus.reduced([0]), ZERO)
    c = pauli_coefficients(_dm(magic_state()))
    labels = np.array([[v] for v in range(4) if abs(c[v]) > 1e-14], np.uint8)
    magic = LogicalPauliState(labels, c[labels[:, 0]])
    pp, plus, minus = magic.measure_z(0)
    assert np.isclose(pp, 0.5)
    assert np.allclose(plus.reduced([0]), ZERO) and np.allclose(minus.reduced([0]), ONE)
    with pytest.raises(IndexError):
        magic.measure_z(1)


@given(st.integers(0, 2**32 - 1), st.integers(0, 2))
def test_logical_measurement_matches_dense(seed, row):
    psi = preset_state(f"random:{seed}", 3)
    rho = _dm(psi)
    c = pauli_coefficients(rho).reshape(-1)
    nz = np.flatnonzero(np.abs(c) > 1e-14)
    labels = np.array(np.unravel_index(nz, (4,) * 3), np.uint8).T
    lp = LogicalPauliState(labels, c[nz])
    pp, plus, minus = lp.measure_z(row)
    dp, dplus, dminus = DensityState(rho).measure_z(row)
    assert abs(pp - dp) < 1e-12
    assert np.allclose(plus.reduced([0, 1, 2]), dplus.rho, atol=1e-12)
    assert np.allclose(minus.reduced([0, 1, 2]), dminus.rho, atol=1e-12)


def test_pack_labels_roundtrip(rng):
    labels = rng.integers(0, 4, size=(50, 7)).astype(np.uint8)
    assert np.array_equal(unpack_labels(pack_labels(labels), 7), labels)


@pytest.mark.parametrize("gam", [(1, 1, 0, 5, 1), (1, 2, 0, 5, 2), (2, 1, 1, 5, 1), (1, 1, 2, 9, 1)])
def test_propagation_term_count_and_coefficients(gam):
    g = Gamma(*gam)
    block = InputBlock(g, _dm(preset_state("random:4", g.r)))
    ct = PauliPropagation().encrypt(keygen(g, 1), block)
    labels, coeffs = block.pauli_terms()
    assert ct.n_terms == len(coeffs) <= 4**g.p
    assert np.all(np.abs(ct.coeffs) <= 1 + 1e-12)
    idx = np.flatnonzero(np.all(ct.labels == 0, axis=1))
    assert len(idx) == 1 and np.isclose(ct.coeffs[idx[0]], 1)


def test_pauli_serialization_roundtrip():
    g = Gamma(1, 2, 0, 5, 2)
    ct = PauliPropagation().encrypt(keygen(g, 9), InputBlock(g, _dm(preset_state("ghz", 2))))
    data = ct.to_bytes()
    back = load_cipher(data)
    assert isinstance(back, PauliCipher)
    assert back.code_columns == ct.code_columns
    assert back.to_bytes() == data


@pytest.mark.parametrize("gam", [(1, 1, 0, 5, 1), (1, 1, 1, 5, 1)])
def test_backends_agree_on_encrypted_reduced_states(gam):
    g = Gamma(*gam)
    key = keygen(g, 5)
    block = InputBlock(g, _dm(preset_state("random:8", 1)))
    dense = DenseOracle().encrypt(key, block)
    pauli = PauliPropagation().encrypt(key, block)
    code = key.code_columns(g.n)
    pos = [(0, code[0]), (0, code[1])] + ([(1, code[0])] if g.p > 1 else [])
    a = dense.reduced_state([x * g.q + y for x, y in pos])
    b = pauli.reduced_state(pos)
    assert np.abs(a - b).max() < 1e-12


# ---------------------------------------------------------------- logical operators at matrix level


def _ladder_unitary(n):
    from qhe.circuit import Gate, gate_matrix

    u = np.eye(2**n, dtype=complex)
    for c, t in encoding_cnots(n):
        u = gate_matrix(Gate("CNOT", (c, t)), n) @ u
    return u


def test_logical_operator_identities_n5():
    n = 5
    u = _ladder_unitary(n)
    eye = np.eye(2 ** (n - 1))
    for lab in (1, 3):
        lhs = u @ np.kron(PAULI_MATRICES[lab], eye) @ u.conj().T
        assert np.abs(lhs - kron_all([PAULI_MATRICES[lab]] * n)).max() < 1e-12
    y_img = u @ np.kron(PAULI_MATRICES[2], eye) @ u.conj().T
    phase = 1j ** (1 - n)
    assert phase == 1
    assert np.abs(y_img - phase * kron_all([PAULI_MATRICES[2]] * n)).max() < 1e-12


def test_even_code_length_breaks_transversality():
    u = _ladder_unitary(2)
    img = u @ np.kron(PAULI_MATRICES[3], np.eye(2)) @ u.conj().T
    assert np.allclose(img, np.kron(np.eye(2), PAULI_MATRICES[3]))
