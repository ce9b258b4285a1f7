import numpy as np
import pytest

from circsim import Circuit, FunctionalGate, Gate, MatrixGate, Projection, StochasticGate, circuit_matrix
from circsim.errors import BadPauli, BadToken, QubitNotInState, ShapeMismatch, ZeroNormProjection
from circsim.gates import make_gate
from circsim.linalg import embed
from circsim.statevector import (
    StateVector,
    apply_matrix,
    expectation_pauli,
    init_from_tokens,
    measure,
    num_threads,
    project,
    simulate_statevector,
)

from .helpers import random_circuit, random_unitary


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return psi / np.linalg.norm(psi)


def phase_flip_zero(gate, psi, order):
    """Oracle flipping the sign of |0...0> on the gate's qubits."""
    proj = Projection(state="0" * gate.n_qubits, qubits=gate.qubits)
    psi0, new_order = proj(psi=psi, order=order, renormalize=False)
    assert new_order == order
    psi = psi - 2 * psi0
    return psi, order


class TestTokens:
    def test_basis(self):
        psi = init_from_tokens("00", [0, 1]).to_array()
        np.testing.assert_allclose(psi, [1, 0, 0, 0])

    def test_uniform(self):
        psi = init_from_tokens("+" * 6, range(6)).to_array()
        np.testing.assert_allclose(psi, np.full(64, 2**-3), atol=1e-15)

    def test_plus_minus(self):
        np.testing.assert_allclose(init_from_tokens("+-", [0, 1]).to_array(), [0.5, -0.5, 0.5, -0.5], atol=1e-15)

    @pytest.mark.parametrize("tok", [".0", "a0", "2", "000"])
    def test_bad(self, tok):
        with pytest.raises(BadToken):
            init_from_tokens(tok, [0, 1])

    def test_split_layout(self):
        s = init_from_tokens("+-", [0, 1])
        assert s.re.dtype == np.float64 and s.im.dtype == np.float64
        assert s.re.flags["C_CONTIGUOUS"] and s.im.flags["C_CONTIGUOUS"]


class TestApplyMatrix:
    def test_x(self):
        s = init_from_tokens("0", [0])
        apply_matrix(s, [0], Gate("X", [0]).matrix())
        np.testing.assert_allclose(s.to_array(), [0, 1])

    def test_h_twice(self):
        psi = random_state(4, 0)
        s = StateVector.from_array(psi, range(4))
        h = Gate("H", [0]).matrix()
        apply_matrix(s, [2], h)
        apply_matrix(s, [2], h)
        np.testing.assert_allclose(s.to_array(), psi, atol=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_dense_oracle(self, seed):
        rng = np.random.default_rng(seed)
        psi = random_state(8, seed)
        u = random_unitary(3, seed)
        qubits = rng.choice(8, 3, replace=False).tolist()
        s = StateVector.from_array(psi, range(8))
        apply_matrix(s, qubits, u)
        np.testing.assert_allclose(s.to_array(), embed(u, qubits, list(range(8))) @ psi, atol=1e-10)

    def test_identity_noop_and_linearity(self):
        a, b = random_state(5, 1), random_state(5, 2)
        u = random_unitary(2, 3)

        def ap(psi):
            s = StateVector.from_array(psi, range(5))
            apply_matrix(s, [4, 1], u)
            return s.to_array()

        s = StateVector.from_array(a, range(5))
        apply_matrix(s, [1, 3], np.eye(4))
        np.testing.assert_allclose(s.to_array(), a, atol=1e-15)
        np.testing.assert_allclose(ap(0.3 * a + 0.7j * b), 0.3 * ap(a) + 0.7j * ap(b), atol=1e-12)

    def test_errors(self):
        s = init_from_tokens("00", [0, 1])
        with pytest.raises(QubitNotInState):
            apply_matrix(s, [5], np.eye(2))
        with pytest.raises(ShapeMismatch):
            apply_matrix(s, [0], np.eye(4))

    def test_threaded_matches_serial(self):
        psi = random_state(17, 4)
        u = random_unitary(2, 5)
        a = StateVector.from_array(psi, range(17))
        b = StateVector.from_array(psi, range(17))
        apply_matrix(a, [3, 11], u, threads=1)
        apply_matrix(b, [3, 11], u, threads=4)
        np.testing.assert_allclose(a.to_array(), b.to_array(), atol=1e-14)


class TestProjection:
    def test_plus_onto_zero(self):
        s = init_from_tokens("+", [0])
        project(s, [0], "0")
        np.testing.assert_allclose(s.to_array(), [1 / np.sqrt(2), 0], atol=1e-15)

    def test_renormalize_own_state(self):
        s = init_from_tokens("10", [0, 1])
        project(s, [0, 1], "10", renormalize=True)
        np.testing.assert_allclose(s.to_array(), [0, 0, 1, 0])

    def test_zero_norm(self):
        s = init_from_tokens("0", [0])
        with pytest.raises(ZeroNormProjection):
            project(s, [0], "1", renormalize=True)

    def test_grover_oracle(self):
        grover = FunctionalGate(f=phase_flip_zero, qubits=[1, 2])
        psi = np.ones((2, 2, 2), dtype=complex)
        psi /= np.linalg.norm(psi)
        new_psi, _ = grover(psi, order=[0, 1, 2])
        expected = np.full(8, 1 / np.sqrt(8))
        expected[[0, 4]] *= -1
        np.testing.assert_allclose(new_psi.ravel(), expected, atol=1e-6)

    def test_grover_in_simulation(self):
        c = Circuit([Gate("H", [q]) for q in range(3)] + [FunctionalGate(phase_flip_zero, [1, 2])])
        psi = simulate_statevector(c, "0").to_array()
        assert np.isclose(psi[0], -0.353553, atol=1e-6) and np.isclose(psi[4], -0.353553, atol=1e-6)
        assert np.allclose(np.delete(psi, [0, 4]), 0.353553, atol=1e-6)


class TestMeasure:
    def test_deterministic(self):
        bits, _ = measure(init_from_tokens("1", [0]), [0], np.random.default_rng(0))
        assert bits == "1"

    def test_frequency(self):
        rng = np.random.default_rng(7)
        zeros = sum(measure(init_from_tokens("+", [0]), [0], rng)[0] == "0" for _ in range(20000))
        assert abs(zeros / 20000 - 0.5) < 3 * 0.5 / np.sqrt(20000)

    def test_chain_rule(self):
        psi = random_state(3, 9)
        p = np.abs(psi.reshape(2, 2, 2)) ** 2
        joint = p.sum(axis=2).ravel()
        rng = np.random.default_rng(1)
        counts = np.zeros(4)
        n = 20000
        for _ in range(n):
            s = StateVector.from_array(psi, [0, 1, 2])
            b0, s = measure(s, [0], rng)
            b1, s = measure(s, [1], rng)
            counts[int(b0 + b1, 2)] += 1
        assert np.all(np.abs(counts / n - joint) < 4 * np.sqrt(joint * (1 - joint) / n) + 1e-3)

    def test_collapse_normalised(self):
        s = StateVector.from_array(random_state(4, 3), range(4))
        _, s = measure(s, [1, 2], np.random.default_rng(0))
        assert abs(s.norm() - 1) < 1e-12


class TestExpectation:
    def test_simple(self):
        assert expectation_pauli(init_from_tokens("+", [0]), "X") == pytest.approx(1)
        assert expectation_pauli(init_from_tokens("0", [0]), "X") == pytest.approx(0)

    @pytest.mark.parametrize("theta", [0.1, 0.7, 2.0, 3.0])
    def test_rz_cosine(self, theta):
        s = simulate_statevector([Gate("RZ", [0], params=[theta])], "+")
        assert expectation_pauli(s, "X") == pytest.approx(np.cos(theta), abs=1e-12)

    def test_bad_pauli(self):
        with pytest.raises(BadPauli):
            expectation_pauli(init_from_tokens("0", [0]), "Q")


class TestSimulate:
    def test_empty(self):
        psi = simulate_statevector([], "+-", qubits=[0, 1]).to_array()
        np.testing.assert_allclose(psi, init_from_tokens("+-", [0, 1]).to_array())

    @pytest.mark.parametrize("compress", [0, 2, 4])
    def test_dense_oracle(self, compress):
        c = random_circuit(6, 50, 42)
        q = list(range(6))
        psi0 = random_state(6, 5)
        out = simulate_statevector(c, psi0, qubits=q, compress=compress).to_array()
        np.testing.assert_allclose(out, circuit_matrix(c, q) @ psi0, atol=1e-8)

    def test_stochastic_deterministic(self):
        c = [StochasticGate([Gate("X", [0]), Gate("I", [0])], [1, 0])]
        np.testing.assert_allclose(simulate_statevector(c, "0").to_array(), [0, 1])

    def test_stochastic_resampled_each_call(self):
        c = [StochasticGate([Gate("X", [0]), Gate("I", [0])], [0.5, 0.5])]
        rng = np.random.default_rng(0)
        outs = {int(abs(simulate_statevector(c, "0", rng).to_array()[1])) for _ in range(40)}
        assert outs == {0, 1}

    def test_norm_preserved(self):
        c = random_circuit(12, 200, 6)
        s = simulate_statevector(c, "+")
        assert abs(s.norm() - 1) < 1e-10

    def test_order_invariance(self):
        c = random_circuit(5, 30, 8)
        a = simulate_statevector(c, "0", qubits=list(range(5)), compress=0)
        b = simulate_statevector(c, "0", qubits=list(range(5)), compress=3)
        assert a.order != list(range(5)) or b.order != list(range(5))
        np.testing.assert_allclose(a.to_array(), b.to_array(), atol=1e-12)

    def test_measure_records(self):
        c = [Gate("X", [0]), make_gate("MEASURE", [0, 1])]
        s = simulate_statevector(c, "0", np.random.default_rng(0))
        assert s.records == [((0, 1), "10")]

    def test_initial_length_mismatch(self):
        with pytest.raises(ShapeMismatch):
            simulate_statevector([Gate("H", [0])], np.ones(4))

    def test_functional_bad_return(self):
        def bad(gate, psi, order):
            return psi.ravel()[:2], order

        with pytest.raises(ShapeMismatch):
            simulate_statevector([Gate("H", [1]), FunctionalGate(bad, [0])], "0")

    def test_matrix_gate_non_contiguous_qubits(self):
        u = random_unitary(2, 1)
        c = [MatrixGate(u, ["c", "a"])]
        out = simulate_statevector(c, "0", qubits=["a", "b", "c"]).to_array()
        np.testing.assert_allclose(out, embed(u, ["c", "a"], ["a", "b", "c"])[:, 0], atol=1e-12)


def test_num_threads_env(monkeypatch):
    monkeypatch.setenv("SIM_NUM_THREADS", "3")
    assert num_threads() == 3
    assert num_threads(2) == 2
