"""Shared oracles and random generators for the test suite."""

import numpy as np
from scipy.stats import unitary_group

from circsim import Circuit, Gate, MatrixGate


def random_unitary(k: int, seed) -> np.ndarray:
    return unitary_group.rvs(2**k, random_state=np.random.default_rng(seed))


def random_circuit(n: int, m: int, seed, max_arity: int = 2) -> Circuit:
    """Random mix of named gates and dense MATRIX gates."""
    rng = np.random.default_rng(seed)
    names1 = ["H", "X", "Y", "Z", "S", "T", "SQRT_X"]
    c = Circuit()
    for _ in range(m):
        r = rng.random()
        if r < 0.3:
            c.append(Gate(names1[rng.integers(len(names1))], [int(rng.integers(n))]))
        elif r < 0.5:
            c.append(Gate("U3", [int(rng.integers(n))], params=rng.uniform(0, 2 * np.pi, 3).tolist()))
        elif r < 0.7:
            q = rng.choice(n, 2, replace=False).tolist()
            c.append(Gate(["CX", "CZ", "ISWAP", "SWAP"][rng.integers(4)], q))
        else:
            k = int(rng.integers(1, min(max_arity, n) + 1))
            q = rng.choice(n, k, replace=False).tolist()
            c.append(MatrixGate(random_unitary(k, rng), q))
    return c


def random_density(n: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    rho = a @ a.conj().T
    return rho / np.trace(rho)
