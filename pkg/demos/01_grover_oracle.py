"""Grover oracle as a callback gate, then as a dense matrix gate.

The oracle flips the sign of every amplitude whose qubits 1 and 2 are both
zero. As a FunctionalGate it edits the state array directly; as a MATRIX gate
it is diag(-1, 1, 1, 1) and can be saved to JSON and run from the CLI.
"""

import numpy as np

from circsim import Circuit, FunctionalGate, Gate, MatrixGate, simulate


def phase_flip_zero(gate, psi, order):
    idx = [slice(None)] * psi.ndim
    for q in gate.qubits:
        idx[order.index(q)] = 0
    psi = psi.copy()
    psi[tuple(idx)] *= -1
    return psi, order


hadamards = [Gate("H", [q]) for q in range(3)]
callback = Circuit(hadamards + [FunctionalGate(phase_flip_zero, [1, 2])])
dense = Circuit(hadamards + [MatrixGate(np.diag([-1, 1, 1, 1]), [1, 2])])

for name, c in [("callback", callback), ("matrix", dense)]:
    psi = simulate(c, "000")
    print(name)
    for i, a in enumerate(psi):
        print(f"  {i:03b}: {a.real:+.6f}")

# the matrix form also runs through the tensor backend, one amplitude at a time
print(f"tn <100|C|000> = {complex(simulate(dense, '000', '100', 'tn')).real:+.6f}")
