"""Seeded random circuit families used by benchmarks and tests."""

from __future__ import annotations

import numpy as np

from .circuit import Circuit
from .gates import Gate

__all__ = ["layered_circuit", "clifford_t_circuit", "LAYERED_POLICY", "CLIFFORD_T_POLICY"]

LAYERED_POLICY = (
    "layered: depth layers; each layer = U3 with uniform random angles on every qubit, "
    "then ISWAP or CPHASE(uniform angle) with equal probability on ring pairs "
    "(i, i+1 mod n) starting at offset layer % 2"
)

CLIFFORD_T_POLICY = (
    "clifford_t: n_gates gates; with probability non_clifford_fraction a T, RZ, RX or CPHASE "
    "with uniform angle, otherwise a Clifford (H, S, X, Y, Z, SQRT_X w.p. 0.6; CX, CZ, SWAP, ISWAP w.p. 0.4)"
)

_CLIFFORD_1Q = ("H", "S", "X", "Y", "Z", "SQRT_X")
_CLIFFORD_2Q = ("CX", "CZ", "SWAP", "ISWAP")
_NON_CLIFFORD = ("T", "RZ", "RX", "CPHASE")


def layered_circuit(n_qubits: int, depth: int | None = None, seed: int = 0) -> Circuit:
    """Brick-work circuit of random U3 layers and ISWAP/CPHASE ring couplings.

    ``depth`` defaults to ``n_qubits``.
    """
    rng = np.random.default_rng(seed)
    depth = n_qubits if depth is None else depth
    c = Circuit()
    for layer in range(depth):
        for q in range(n_qubits):
            c.append(Gate("U3", [q], params=rng.uniform(0, 2 * np.pi, 3).tolist()))
        if n_qubits < 2:
            continue
        used: set = set()
        for a in range(layer % 2, n_qubits, 2):
            b = (a + 1) % n_qubits
            if a in used or b in used:
                continue  # odd rings: the wrap-around pair would reuse a qubit
            used |= {a, b}
            if rng.random() < 0.5:
                c.append(Gate("ISWAP", [a, b]))
            else:
                c.append(Gate("CPHASE", [a, b], params=[float(rng.uniform(0, 2 * np.pi))]))
    return c


def clifford_t_circuit(n_qubits: int, n_gates: int, non_clifford_fraction: float = 0.2, seed: int = 0) -> Circuit:
    """Mostly-Clifford random circuit with a tunable share of non-Clifford gates.

    Keeps Pauli-expansion branch counts manageable while still exercising
    branching; gate choices are documented in :data:`CLIFFORD_T_POLICY`.
    """
    rng = np.random.default_rng(seed)
    c = Circuit()
    for _ in range(n_gates):
        if rng.random() < non_clifford_fraction:
            kind = _NON_CLIFFORD[rng.integers(len(_NON_CLIFFORD))]
            if kind == "CPHASE" and n_qubits > 1:
                q = rng.choice(n_qubits, 2, replace=False).tolist()
                c.append(Gate("CPHASE", q, params=[float(rng.uniform(0, 2 * np.pi))]))
            elif kind == "T" or kind == "CPHASE":
                c.append(Gate("T", [int(rng.integers(n_qubits))]))
            else:
                c.append(Gate(kind, [int(rng.integers(n_qubits))], params=[float(rng.uniform(0, 2 * np.pi))]))
        elif n_qubits < 2 or rng.random() < 0.6:
            c.append(Gate(_CLIFFORD_1Q[rng.integers(len(_CLIFFORD_1Q))], [int(rng.integers(n_qubits))]))
        else:
            q = rng.choice(n_qubits, 2, replace=False).tolist()
            c.append(Gate(_CLIFFORD_2Q[rng.integers(len(_CLIFFORD_2Q))], q))
    return c
