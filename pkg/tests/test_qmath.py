import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msqkd import qmath
from msqkd.qmath import BELL_STATES, Bell


def test_bell_states_orthonormal():
    assert np.allclose(BELL_STATES @ BELL_STATES.conj().T, np.eye(4), atol=1e-15)


def test_bell_labels_roundtrip():
    for b in Bell:
        assert Bell.from_label(b.label) is b
    assert [b.consistent for b in Bell] == [True, True, False, False]


def test_ket_ordering():
    assert np.argmax(qmath.ket(1, 0)) == 2
    assert np.argmax(qmath.ket(0, 1, 1)) == 3


def test_tensor_puts_first_factor_most_significant():
    v = qmath.tensor(qmath.ket(1), qmath.ket(0), qmath.ket(1))
    assert np.allclose(v, qmath.ket(1, 0, 1))


def test_partial_trace_of_bell_state_is_maximally_mixed():
    rho = qmath.projector(BELL_STATES[Bell.PHI_PLUS])
    for keep in ([0], [1]):
        assert np.allclose(qmath.partial_trace(rho, [2, 2], keep), np.eye(2) / 2, atol=1e-15)


def test_partial_trace_product_state():
    rng = np.random.default_rng(5)
    a, b, c = (qmath.projector(qmath.random_state(d, rng)) for d in (2, 3, 2))
    rho = qmath.tensor(a, b, c)
    assert np.allclose(qmath.partial_trace(rho, [2, 3, 2], [1]), b, atol=1e-12)
    assert np.allclose(qmath.partial_trace(rho, [2, 3, 2], [0, 2]), np.kron(a, c), atol=1e-12)
    assert np.allclose(qmath.partial_trace(rho, [2, 3, 2], [2, 0]), np.kron(a, c), atol=1e-12)


def test_partial_trace_rejects_bad_dims():
    with pytest.raises(ValueError):
        qmath.partial_trace(np.eye(4), [3, 2], [0])
    with pytest.raises(ValueError):
        qmath.partial_trace(np.eye(4), [2, 2], [2])


@pytest.mark.parametrize("m", list(Bell))
def test_bell_measure_on_bell_states(m):
    probs = qmath.bell_measure(BELL_STATES[m])
    assert np.allclose(probs, np.eye(4)[m], atol=1e-15)


def test_bell_measure_on_product_state():
    # |01> is an equal superposition of psi+ and psi-
    assert np.allclose(qmath.bell_measure(qmath.ket(0, 1)), [0, 0, 0.5, 0.5])


def test_bell_measure_rejects_unnormalised():
    with pytest.raises(ValueError):
        qmath.bell_measure(2 * qmath.projector(qmath.ket(0, 0)))
    with pytest.raises(ValueError):
        qmath.bell_measure(np.eye(2) / 2)


def test_z_measure_vector_and_matrix_agree():
    psi = BELL_STATES[Bell.PHI_PLUS]
    pv, postv = qmath.z_measure(psi, 1)
    pm, postm = qmath.z_measure(qmath.projector(psi), 1)
    assert np.allclose(pv, [0.5, 0.5]) and np.allclose(pm, pv)
    for b in (0, 1):
        assert np.allclose(postv[b], qmath.ket(b, b))
        assert np.allclose(postm[b], qmath.projector(qmath.ket(b, b)))


def test_z_measure_absent_outcome():
    probs, posts = qmath.z_measure(qmath.ket(0, 0, 0), 0, [2, 4])
    assert probs.tolist() == [1.0, 0.0]
    assert posts[1] is None


def test_z_measure_rejects_non_qubit():
    with pytest.raises(ValueError):
        qmath.z_measure(qmath.basis(6, 0), 1, [2, 3])


def test_entropies():
    assert math.isclose(qmath.von_neumann_entropy(np.eye(2) / 2), 1.0, abs_tol=1e-12)
    assert abs(qmath.von_neumann_entropy(qmath.projector(qmath.ket(0, 1)))) < 1e-12
    assert math.isclose(qmath.binary_entropy(0.25), 0.81127812445913286, abs_tol=1e-12)
    assert qmath.binary_entropy(0.0) == qmath.binary_entropy(1.0) == 0.0
    assert math.isclose(qmath.shannon_entropy([0.25] * 4), 2.0)


def test_von_neumann_rejects_non_density():
    with pytest.raises(ValueError):
        qmath.von_neumann_entropy(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError):
        qmath.von_neumann_entropy(np.array([[0.5, 1.0], [0.0, 0.5]]))


def test_random_unitary_is_unitary():
    rng = np.random.default_rng(0)
    for dim in (1, 2, 5, 8):
        assert qmath.is_unitary(qmath.random_unitary(dim, rng))


def test_near_identity_unitary():
    rng = np.random.default_rng(3)
    u = qmath.near_identity_unitary(4, 0.0, rng)
    assert np.allclose(u, np.eye(4))
    assert qmath.is_unitary(qmath.near_identity_unitary(6, 0.7, rng))


hermitian_2x2 = st.tuples(
    st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10)
).map(lambda t: np.array([[t[0], t[2] + 1j * t[3]], [t[2] - 1j * t[3], t[1]]]))


@settings(max_examples=200, deadline=None)
@given(hermitian_2x2)
def test_eig2_closed_form_matches_numpy(m):
    hi, lo = qmath.eig2_hermitian(m)
    ref = np.linalg.eigvalsh(m)
    assert np.isclose(lo, ref[0], atol=1e-9) and np.isclose(hi, ref[1], atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_partial_trace_preserves_trace_and_positivity(seed, d):
    rng = np.random.default_rng(seed)
    psi = qmath.random_state(4 * d, rng)
    rho = qmath.projector(psi)
    for keep in ([0], [1], [2], [0, 2]):
        red = qmath.partial_trace(rho, [2, 2, d], keep)
        assert np.isclose(np.trace(red).real, 1.0)
        assert np.linalg.eigvalsh(red).min() > -1e-12
    # entropy of complementary parts of a pure state agree
    s_a = qmath.von_neumann_entropy(qmath.partial_trace(rho, [2, 2, d], [0]))
    s_bc = qmath.von_neumann_entropy(qmath.partial_trace(rho, [2, 2, d], [1, 2]))
    assert np.isclose(s_a, s_bc, atol=1e-9)
