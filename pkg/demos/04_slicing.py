"""Tensor-network slicing under a memory cap.

Lowering the cap on the largest intermediate tensor forces the planner to
fix more bond indices and sum over their values, trading memory for
repeated work. Every plan gives the same amplitudes.
"""

import numpy as np

from circsim.generators import layered_circuit
from circsim.tensornet import build_network, contract, plan_contraction

n = 10
c = layered_circuit(n, depth=8, seed=2)
net = build_network(c, "0" * n, "0" * (n - 2) + "..", list(range(n)))
ref = None
print(f"{'cap':>8} {'slices':>7} {'largest':>8} {'est flops':>10}")
for cap in (2**20, 2**10, 2**8, 2**6):
    plan = plan_contraction(net, max_largest_intermediate=cap, seed=0)
    out = contract(net, plan).data
    ref = out if ref is None else ref
    assert np.allclose(out, ref, atol=1e-10)
    print(f"{cap:>8} {plan.n_slices:>7} {plan.largest_intermediate:>8} {plan.est_flops:>10.3g}")
print("amplitudes <0..0 xy|C|0..0>:", np.round(ref.ravel(), 5))
