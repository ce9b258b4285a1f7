"""End-to-end acceptance checks, one group per criterion.

A PASS/FAIL line per criterion is printed in the terminal summary (see
``conftest.py``); individual test names carry the criterion number too.
"""

import time
from functools import lru_cache

import numpy as np
import pytest

from circsim import (
    Circuit,
    FunctionalGate,
    Gate,
    MatrixGate,
    StochasticGate,
    circuit_matrix,
    inverse,
    is_clifford,
    simplify,
    simulate,
)
from circsim.clifford import PauliString, pauli_transfer, reconstruct_density, simulate_clifford
from circsim.generators import clifford_t_circuit
from circsim.noise import (
    AmplitudeDampingChannel,
    DephasingChannel,
    GlobalDepolarizingChannel,
    GlobalPauliChannel,
    LocalDepolarizingChannel,
    LocalPauliChannel,
    add_depolarizing_noise,
    apply_channel,
    sample_trajectories,
    simulate_density_matrix,
    to_doubled_gate,
    validate_cptp,
)
from circsim.statevector import simulate_statevector
from circsim.tensornet import build_network, contract, plan_contraction, simulate_tn

from .helpers import random_circuit, random_density, random_unitary

N_Q, N_G, N_CIRC = 6, 50, 20


# ------------------------------------------------------------------ 1 ----


def phase_flip_zero(gate, psi, order):
    """psi <- psi - 2 P0 psi, P0 projecting the gate's qubits onto |0...0>."""
    axes = [order.index(q) for q in gate.qubits]
    idx = [slice(None)] * psi.ndim
    for a in axes:
        idx[a] = 0
    psi = psi.copy()
    psi[tuple(idx)] *= -1
    return psi, order


@pytest.mark.criterion(1)
def test_c1_grover_amplitudes():
    t0 = time.perf_counter()
    c = Circuit([Gate("H", [q]) for q in range(3)] + [FunctionalGate(phase_flip_zero, [1, 2])])
    psi = simulate(c, "000")
    elapsed = time.perf_counter() - t0
    expected = np.full(8, 0.353553)
    expected[[0b000, 0b100]] = -0.353553
    np.testing.assert_allclose(psi, expected, atol=1e-6)
    assert elapsed < 1.0


# --------------------------------------------------------------- 2, 3 ----


def _pauli(seed):
    rng = np.random.default_rng(1000 + seed)
    s = "".join("IXYZ"[i] for i in rng.integers(4, size=N_Q))
    return s if set(s) != {"I"} else "Z" + s[1:]


@lru_cache(maxsize=None)
def _clifford_runs(seed):
    c = clifford_t_circuit(N_Q, N_G, 0.2, seed=seed)
    p = _pauli(seed)
    u = circuit_matrix(c, list(range(N_Q)))
    dense = u @ PauliString.from_str(p).matrix() @ u.conj().T
    r0 = simulate_clifford(c, p, compress_level=0, qubits=range(N_Q))
    r4 = simulate_clifford(c, p, compress_level=4, qubits=range(N_Q))
    return c, dense, r0, r4


@pytest.mark.criterion(2)
def test_c2_cross_engine_equivalence():
    t0 = time.perf_counter()
    for seed in range(N_CIRC):
        for c in (random_circuit(N_Q, N_G, seed), clifford_t_circuit(N_Q, N_G, 0.2, seed=seed)):
            psi = simulate(c, "0", qubits=range(N_Q))
            amp = simulate(c, "0", "." * N_Q, "tn", qubits=range(N_Q))
            np.testing.assert_allclose(np.ravel(amp), psi, atol=1e-8)
        _, dense, _, r4 = _clifford_runs(seed)
        np.testing.assert_allclose(reconstruct_density(r4), dense, atol=1e-5)
    assert time.perf_counter() - t0 < 60


@pytest.mark.criterion(3)
def test_c3_compression_monotone():
    for seed in range(N_CIRC):
        _, dense, r0, r4 = _clifford_runs(seed)
        assert r4.stats["n_explored_branches"] <= r0.stats["n_explored_branches"]
        np.testing.assert_allclose(reconstruct_density(r0), reconstruct_density(r4), atol=1e-5)
        np.testing.assert_allclose(reconstruct_density(r0), dense, atol=1e-5)


# ------------------------------------------------------------------ 4 ----


def diagonal_circuit(seed, n=5, m=20):
    rng = np.random.default_rng(seed)
    c = Circuit()
    for _ in range(m):
        kind = rng.integers(4)
        if kind == 0:
            a, b = rng.choice(n, 2, replace=False).tolist()
            c.append(Gate("CPHASE", [a, b], params=[float(rng.uniform(0.1, 3))]))
        elif kind == 1:
            c.append(Gate("RZ", [int(rng.integers(n))], params=[float(rng.uniform(0.1, 3))]))
        elif kind == 2:
            c.append(Gate("T", [int(rng.integers(n))]))
        else:
            a, b = rng.choice(n, 2, replace=False).tolist()
            c.append(Gate("CZ", [a, b]))
    return c


@pytest.mark.criterion(4)
def test_c4_simplify_cancellation():
    leftovers = []
    for seed in range(10):
        c = diagonal_circuit(seed)
        rng = np.random.default_rng(seed)
        inv = inverse(c)
        shuffled = Circuit([inv[i] for i in rng.permutation(len(inv))])
        assert len(simplify(c + shuffled, use_matrix_commutation=True)) == 0
        leftovers.append(len(simplify(c + shuffled, use_matrix_commutation=False)))
    assert max(leftovers) > 0


# ------------------------------------------------------------------ 5 ----


@pytest.mark.criterion(5)
@pytest.mark.parametrize("seed", range(3))
def test_c5_slicing_exact(seed):
    c = random_circuit(N_Q, 40, seed)
    net = build_network(c, "0" * N_Q, "." * N_Q, list(range(N_Q)))
    free = plan_contraction(net, max_largest_intermediate=2**30, seed=seed)
    sliced = plan_contraction(net, max_largest_intermediate=2**8, seed=seed, min_slices=4)
    assert len(free.sliced_indices) == 0
    assert len(sliced.sliced_indices) >= 4 and sliced.largest_intermediate <= 2**8
    a, b = contract(net, free).data, contract(net, sliced).data
    np.testing.assert_allclose(b, a, atol=1e-10, rtol=0)


# ------------------------------------------------------------------ 6 ----


def all_channels():
    return [
        GlobalDepolarizingChannel([0], 0.2),
        GlobalDepolarizingChannel([0, 1], 0.3),
        LocalDepolarizingChannel([0, 1], [0.1, 0.25]),
        GlobalPauliChannel([0, 1], np.random.default_rng(0).dirichlet(np.ones(16))),
        LocalPauliChannel([0, 1], [0.7, 0.1, 0.15, 0.05]),
        DephasingChannel([0], 0.3),
        DephasingChannel([0], 0.3, pauli="X"),
        DephasingChannel([0], 0.3, pauli="Y"),
        AmplitudeDampingChannel([0], 0.35),
        AmplitudeDampingChannel([0], 0.35, excitation_rate=0.4),
    ]


@pytest.mark.criterion(6)
def test_c6_depolarizing_full():
    for n in (1, 2):
        rho = random_density(n, seed=n)
        out = apply_channel(GlobalDepolarizingChannel(list(range(n)), 1.0), rho)
        np.testing.assert_allclose(out, np.eye(2**n) / 2**n, atol=1e-12, rtol=0)


@pytest.mark.criterion(6)
def test_c6_amplitude_damping_full():
    out = apply_channel(AmplitudeDampingChannel([0], 1.0), random_density(1, seed=5))
    np.testing.assert_allclose(out, np.diag([1, 0]), atol=1e-12, rtol=0)


@pytest.mark.criterion(6)
@pytest.mark.parametrize("ch", all_channels(), ids=lambda c: f"{c.name}{len(c.qubits)}")
def test_c6_channels_cptp_and_doubling(ch):
    assert validate_cptp(ch)
    rho = random_density(len(ch.qubits), seed=9)
    vec = to_doubled_gate(ch).matrix() @ rho.reshape(-1)
    np.testing.assert_allclose(vec.reshape(rho.shape), apply_channel(ch, rho), atol=1e-12, rtol=0)


# ------------------------------------------------------------------ 7 ----


@pytest.mark.criterion(7)
@pytest.mark.parametrize("seed", range(3))
def test_c7_partial_trace_tokens(seed):
    t0 = time.perf_counter()
    c = add_depolarizing_noise(random_circuit(3, 12, seed), (0.02, 0.05))
    c.append(AmplitudeDampingChannel([1], 0.2))
    red = simulate_tn(c, "000", ".ab.ab", qubits=[0, 1, 2])
    rho = simulate_density_matrix(c, "000", qubits=[0, 1, 2])
    ref = np.einsum("ajkbjk->ab", rho.reshape((2,) * 6))
    np.testing.assert_allclose(np.reshape(red, (2, 2)), ref, atol=1e-8)
    assert time.perf_counter() - t0 < 5


# ------------------------------------------------------------------ 8 ----


@pytest.mark.criterion(8)
def test_c8_trajectory_convergence():
    theta, p, steps, shots = 0.3, 0.05, 12, 10_000
    for k in range(1, steps + 1):
        c = add_depolarizing_noise(Circuit([Gate("RZ", [0], params=[theta])] * k), (p, 0))
        r = sample_trajectories(c, "+", shots, rng=k, observable="X")
        exact = (1 - p) ** k * np.cos(k * theta)
        assert abs(r.mean - exact) <= 3 * r.sem, (k, r.mean, exact, r.sem)


# ------------------------------------------------------------------ 9 ----


@pytest.mark.criterion(9)
def test_c9_ptm_orthogonal():
    rng = np.random.default_rng(9)
    for i in range(100):
        k = int(rng.integers(1, 4))
        fused = Circuit([Gate("U3", [q], params=rng.uniform(0, 2 * np.pi, 3).tolist()) for q in range(k)])
        fused.append(MatrixGate(random_unitary(k, i), list(range(k))))
        u = circuit_matrix(fused, list(range(k)))
        T = pauli_transfer(u)
        np.testing.assert_allclose(T @ T.T, np.eye(4**k), atol=1e-10, rtol=0)


@pytest.mark.criterion(9)
def test_c9_is_clifford_registry():
    clifford = ["I", "X", "Y", "Z", "H", "S", "CX", "CZ", "SWAP", "ISWAP", "SQRT_X"]
    for name in clifford:
        n = 2 if name in ("CX", "CZ", "SWAP", "ISWAP") else 1
        assert is_clifford(Gate(name, list(range(n)))), name
    others = [Gate("T", [0]), Gate("RX", [0], params=[0.3]), Gate("FSIM", [0, 1], params=[0.1, 0.2]),
              Gate("U3", [0], params=[0.1, 0.2, 0.3])]
    for g in others:
        assert not is_clifford(g), g.name


# ----------------------------------------------------------------- 10 ----


@pytest.mark.criterion(10)
def test_c10_determinism():
    c = random_circuit(5, 30, seed=4)
    c.append(StochasticGate([Gate("X", [2]), Gate("Z", [3])], p=[0.5, 0.5]))
    a = simulate_statevector(c, "0", 7).to_array()
    b = simulate_statevector(c, "0", 7).to_array()
    assert np.array_equal(a, b)

    ct = clifford_t_circuit(N_Q, N_G, 0.2, seed=3)
    r1 = simulate_clifford(ct, "ZZIIXY", compress_level=2)
    r2 = simulate_clifford(ct, "ZZIIXY", compress_level=2)
    assert r1.stats["n_explored_branches"] == r2.stats["n_explored_branches"]
    assert r1.terms == r2.terms

    net = build_network(random_circuit(N_Q, 40, 5), "0" * N_Q, "." * N_Q, list(range(N_Q)))
    p1 = plan_contraction(net, max_largest_intermediate=2**8, seed=11)
    p2 = plan_contraction(net, max_largest_intermediate=2**8, seed=11)
    assert p1.path == p2.path and p1.sliced_indices == p2.sliced_indices
    assert np.array_equal(contract(net, p1).data, contract(net, p2).data)
