import numpy as np
import pytest

from circsim import Circuit, Gate, expectation, simulate
from circsim.errors import BadPauli, MethodUnsupportedForInput
from circsim.generators import clifford_t_circuit, layered_circuit
from circsim.noise import DephasingChannel, add_depolarizing_noise
from circsim.simulation import _pauli_matrix, _product_dm_terms

from .helpers import random_circuit


def test_methods_agree_on_amplitudes():
    c = random_circuit(4, 25, seed=3)
    psi = simulate(c, "0+1-", qubits=range(4))
    amp = simulate(c, "0+1-", "0110", "tn", qubits=range(4))
    assert complex(amp) == pytest.approx(psi[0b0110], abs=1e-10)
    full = simulate(c, "0+1-", "....", "tn", qubits=range(4))
    np.testing.assert_allclose(np.ravel(full), psi, atol=1e-10)


@pytest.mark.parametrize("method", ["evolution", "tn", "clifford"])
@pytest.mark.parametrize("pauli", ["ZIII", "XXYZ", "IZIZ"])
def test_expectation_methods(method, pauli):
    c = clifford_t_circuit(4, 30, 0.2, seed=2)
    psi = simulate(c, "0+01", qubits=range(4))
    ref = np.vdot(psi, _pauli_matrix(pauli) @ psi).real
    assert expectation(c, pauli, "0+01", method, qubits=range(4)) == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("method", ["evolution", "tn", "clifford"])
def test_noisy_expectation(method):
    c = add_depolarizing_noise(clifford_t_circuit(3, 15, 0.2, seed=5), (0.02, 0.05))
    rho = simulate(c, "0", qubits=range(3))
    ref = np.trace(_pauli_matrix("ZZX") @ rho).real
    assert expectation(c, "ZZX", "0", method, qubits=range(3)) == pytest.approx(ref, abs=1e-8)


def test_product_dm_terms():
    terms = _product_dm_terms("0+")
    rho = sum(w * _pauli_matrix(p) for p, w in terms.items())
    v = np.kron([1, 0], [1, 1]) / np.sqrt(2)
    np.testing.assert_allclose(rho, np.outer(v, v), atol=1e-12)


def test_dm_flag_routes_to_density():
    rho = simulate(Circuit([Gate("H", [0])]), "0", dm=True)
    np.testing.assert_allclose(rho, np.full((2, 2), 0.5), atol=1e-12)


def test_noisy_tn_reduced_state():
    c = Circuit([Gate("H", [0]), Gate("CX", [0, 1])]) + Circuit()
    c = add_depolarizing_noise(c, (0, 0))
    c.append(DephasingChannel([1], 0.5))
    red = simulate(c, "00", ".a.a", "tn", qubits=[0, 1])
    np.testing.assert_allclose(np.reshape(red, (2, 2)), np.eye(2) / 2, atol=1e-12)


def test_errors():
    c = layered_circuit(2, seed=0)
    with pytest.raises(MethodUnsupportedForInput):
        simulate(c, "00", optimize="magic")
    with pytest.raises(MethodUnsupportedForInput):
        simulate(c, "00", "00", "evolution")
    with pytest.raises(BadPauli):
        expectation(c, "ZQ")
    with pytest.raises(BadPauli):
        expectation(c, "Z")
