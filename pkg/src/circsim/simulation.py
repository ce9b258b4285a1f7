"""One entry point over every backend.

>>> from circsim import Circuit, Gate, simulate
>>> simulate(Circuit([Gate('H', [0])]), '0').round(4)
array([0.7071+0.j, 0.7071+0.j])

``optimize`` picks the backend: ``'evolution'`` (dense state vector),
``'tn'`` (tensor contraction) or ``'clifford'`` (Pauli expansion). Circuits
holding noise channels, or calls with ``dm=True``, run on density matrices.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .circuit import Circuit, SuperCircuit, inverse
from .errors import BadPauli, MethodUnsupportedForInput
from .gates import PAULI, BaseGate, Gate, is_superoperator
from .linalg import sort_qubits

__all__ = ["simulate", "expectation", "METHODS"]

METHODS = ("evolution", "tn", "clifford")


def _is_noisy(circuit) -> bool:
    return isinstance(circuit, SuperCircuit) or any(is_superoperator(g) for g in circuit)


def simulate(
    circuit: Sequence[BaseGate],
    initial_state="0",
    final_state: str | None = None,
    optimize: str = "evolution",
    *,
    qubits: Sequence | None = None,
    dm: bool | None = None,
    **opts,
):
    """Simulate ``circuit`` with the chosen backend.

    Parameters
    ----------
    initial_state
        Tokens over ``0 1 + -`` (one per qubit or one broadcast token), or a
        dense vector. For ``'tn'`` the tokens may also be ``'.'`` (open) or
        letters (shared indices). For ``'clifford'``, the Pauli operator to
        evolve.
    final_state
        ``'tn'`` only: tokens fixing (or tracing) the output indices.
    optimize
        One of ``'evolution'``, ``'tn'``, ``'clifford'``.
    dm
        Force (or forbid) density-matrix simulation; by default it is used
        exactly when the circuit contains channels. In that mode token
        strings have ``2n`` characters, rows first.
    **opts
        Passed through to the backend (``compress``, ``max_largest_intermediate``,
        ``seed``, ``parallel``, ``threads``, ``atol``, ...).

    Returns
    -------
    numpy.ndarray or ExpansionResult
        The state (evolution), the tensor over the open indices (tn) or the
        Pauli expansion (clifford). Density-matrix evolution returns a
        ``(2^n, 2^n)`` matrix.
    """
    if optimize not in METHODS:
        raise MethodUnsupportedForInput(f"optimize must be one of {METHODS}, got '{optimize}'")
    if qubits is None:
        qubits = sort_qubits({q for g in circuit for q in g.qubits})
    qubits = list(qubits)
    noisy = _is_noisy(circuit) if dm is None else dm

    if optimize == "clifford":
        from .clifford import simulate_clifford

        if final_state is not None:
            raise MethodUnsupportedForInput("final_state is not supported with optimize='clifford'")
        if "compress" in opts:
            opts["compress_level"] = opts.pop("compress")
        return simulate_clifford(circuit, initial_state, qubits=qubits, **opts)

    if noisy:
        from .noise import simulate_density_matrix

        if optimize == "evolution" and "seed" in opts:
            opts.pop("seed")
        return simulate_density_matrix(circuit, initial_state, final_state, optimize, qubits=qubits, **opts)

    if optimize == "evolution":
        from .statevector import simulate_statevector

        if final_state is not None:
            raise MethodUnsupportedForInput("final_state requires optimize='tn'")
        rng = opts.pop("seed", opts.pop("rng", None))
        return simulate_statevector(circuit, initial_state, rng, qubits=qubits, **opts).to_array()

    from .tensornet import simulate_tn

    if not isinstance(initial_state, str):
        raise MethodUnsupportedForInput("optimize='tn' needs a token initial state")
    return simulate_tn(circuit, initial_state, final_state, qubits=qubits, **opts)


def _pauli_gates(pauli, qubits):
    from .statevector import _parse_pauli

    return [Gate(p, [q]) for q, p in _parse_pauli(pauli, qubits)]


def _pauli_matrix(pauli: str) -> np.ndarray:
    m = np.ones((1, 1), dtype=complex)
    for c in pauli:
        m = np.kron(m, PAULI[c])
    return m


def _product_dm_terms(tokens: str) -> dict:
    """Pauli expansion of the product state ``|tokens><tokens|``."""
    local = {"0": {"I": 0.5, "Z": 0.5}, "1": {"I": 0.5, "Z": -0.5},
             "+": {"I": 0.5, "X": 0.5}, "-": {"I": 0.5, "X": -0.5}}
    terms = {"": 1.0}
    for t in tokens:
        if t not in local:
            raise MethodUnsupportedForInput(f"Token '{t}' is not a product-state token")
        terms = {p + c: w * v for p, w in terms.items() for c, v in local[t].items()}
    return terms


def expectation(
    circuit: Sequence[BaseGate],
    pauli: str,
    initial_state: str = "0",
    optimize: str = "evolution",
    *,
    qubits: Sequence | None = None,
    **opts,
) -> float:
    """``<P>`` after running ``circuit`` on ``initial_state``; ``Tr(P rho)`` for noisy circuits."""
    if qubits is None:
        qubits = sort_qubits({q for g in circuit for q in g.qubits})
    qubits = list(qubits)
    n = len(qubits)
    pauli = str(pauli).upper()
    if len(pauli) != n or any(c not in "IXYZ" for c in pauli):
        raise BadPauli(f"Pauli string '{pauli}' must have {n} characters over IXYZ")
    if isinstance(initial_state, str) and len(initial_state) == 1:
        initial_state = initial_state * n
    noisy = _is_noisy(circuit)

    if optimize == "evolution":
        out = simulate(circuit, initial_state, optimize="evolution", qubits=qubits, **opts)
        if noisy:
            return float(np.trace(_pauli_matrix(pauli) @ out).real)
        psi = np.asarray(out).ravel()
        return float(np.vdot(psi, _pauli_matrix(pauli) @ psi).real)

    if optimize == "tn":
        if not isinstance(initial_state, str):
            raise MethodUnsupportedForInput("optimize='tn' needs a token initial state")
        if noisy:
            rho = simulate(circuit, initial_state, "." * (2 * n), "tn", qubits=qubits, **opts)
            rho = np.asarray(rho).reshape(2**n, 2**n)
            return float(np.trace(_pauli_matrix(pauli) @ rho).real)
        sandwich = Circuit(list(circuit) + _pauli_gates(pauli, qubits)) + inverse(Circuit(circuit))
        val = simulate(sandwich, initial_state, initial_state, "tn", qubits=qubits, **opts)
        return float(np.real(val))

    if optimize == "clifford":
        from .clifford import expectation_on_tokens, simulate_clifford

        if "compress" in opts:
            opts["compress_level"] = opts.pop("compress")
        if noisy:
            res = simulate_clifford(circuit, _product_dm_terms(initial_state), qubits=qubits, **opts)
            return float((res.terms.get(pauli, 0) * 2**n).real)
        res = simulate_clifford(inverse(Circuit(circuit)), pauli, qubits=qubits, **opts)
        return float(expectation_on_tokens(res, initial_state).real)

    raise MethodUnsupportedForInput(f"optimize must be one of {METHODS}, got '{optimize}'")
