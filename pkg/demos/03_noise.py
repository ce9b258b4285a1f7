"""Noisy circuits three ways: density matrix, reduced state by tokens, trajectories.

A qubit prepared in |+> precesses under repeated RZ steps while a
depolarizing channel shrinks its Bloch vector, so <X> after k steps is
(1 - p)^k cos(k theta). Trajectory sampling reproduces the curve within
its error bars. The second part traces out two qubits of a noisy 3-qubit
circuit with the token string '.ab.ab' on the doubled register.
"""

import numpy as np

from circsim import Circuit, Gate, expectation, simulate
from circsim.noise import AmplitudeDampingChannel, add_depolarizing_noise, sample_trajectories

theta, p = 0.3, 0.05
print(" k   exact     density   trajectories")
for k in range(1, 13, 2):
    c = add_depolarizing_noise(Circuit([Gate("RZ", [0], params=[theta])] * k), (p, 0))
    exact = (1 - p) ** k * np.cos(k * theta)
    dm = expectation(c, "X", "+")
    tr = sample_trajectories(c, "+", 10_000, rng=k, observable="X")
    print(f"{k:2d}  {exact:+.4f}   {dm:+.4f}   {tr.mean:+.4f} +- {tr.sem:.4f}")

c = add_depolarizing_noise([Gate("H", [0]), Gate("CX", [0, 1]), Gate("CX", [1, 2])], (0.02, 0.05))
c.append(AmplitudeDampingChannel([0], 0.3))
reduced = np.reshape(simulate(c, "000", ".ab.ab", "tn"), (2, 2))
rho = simulate(c, "000")
ref = np.einsum("ajkbjk->ab", rho.reshape((2,) * 6))
print("\nreduced state of qubit 0 (tn, '.ab.ab'):")
print(np.round(reduced, 4))
print("max deviation from dense partial trace:", np.abs(reduced - ref).max())
