"""Dense state-vector evolution with a split real/imaginary layout.

Amplitudes live in two contiguous ``float64`` arrays, one for the real and
one for the imaginary part. Gates are applied as real matrix products on a
``(2**(n-k), 2**k)`` view of the state after the target qubits have been
moved to the least significant positions. That move is kept: the state's
physical ``order`` changes while the logical ``qubits`` order stays fixed, so
consecutive gates on the same qubits never pay for another transpose.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from .circuit import Circuit, compress as compress_circuit, circuit_matrix
from .errors import (
    BadPauli,
    BadToken,
    MethodUnsupportedForInput,
    QubitNotInState,
    ShapeMismatch,
    ZeroNormProjection,
)
from .gates import (
    PAULI,
    BaseGate,
    Control,
    FunctionalGate,
    Measure,
    Projection,
    StochasticGate,
    TupleGate,
    is_superoperator,
)

__all__ = [
    "StateVector",
    "init_from_tokens",
    "apply_matrix",
    "project",
    "project_array",
    "measure",
    "expectation_pauli",
    "simulate_statevector",
    "num_threads",
]

_TOKENS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
}

# Below this many amplitudes a single worker is always used.
_PARALLEL_MIN_SIZE = 2**16


def num_threads(threads: int | None = None) -> int:
    """Worker count: explicit ``threads`` wins, then ``SIM_NUM_THREADS``, then all cores."""
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("SIM_NUM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


class StateVector:
    """Pure state over ``qubits`` stored as separate real/imaginary arrays.

    ``order`` is the current physical axis order (``order[0]`` most
    significant); ``qubits`` is the logical order used by :meth:`to_array`.
    """

    def __init__(self, re, im, order: Sequence, qubits: Sequence | None = None):
        self.re = np.ascontiguousarray(re, dtype=np.float64).ravel()
        self.im = np.ascontiguousarray(im, dtype=np.float64).ravel()
        self.order = list(order)
        self.qubits = list(order if qubits is None else qubits)
        if len(self.re) != 2 ** len(self.order) or len(self.im) != len(self.re):
            raise ShapeMismatch(f"Need 2^{len(self.order)} amplitudes, got {len(self.re)}")
        if sorted(map(repr, self.qubits)) != sorted(map(repr, self.order)):
            raise ValueError("qubits must be a permutation of order")
        self.records: list[tuple[tuple, str]] = []

    @classmethod
    def from_array(cls, psi, order: Sequence) -> "StateVector":
        psi = np.asarray(psi, dtype=complex).ravel()
        return cls(psi.real, psi.imag, order)

    @property
    def n_qubits(self) -> int:
        return len(self.order)

    def copy(self) -> "StateVector":
        new = StateVector(self.re.copy(), self.im.copy(), self.order, self.qubits)
        new.records = list(self.records)
        return new

    def to_array(self, order: Sequence | None = None) -> np.ndarray:
        """Complex amplitudes as a flat array with axes in ``order`` (default ``qubits``)."""
        order = self.qubits if order is None else list(order)
        psi = self.re + 1j * self.im
        return _permute(psi, self.order, order)

    def norm(self) -> float:
        return float(np.sqrt(self.re @ self.re + self.im @ self.im))

    def __repr__(self):
        return f"StateVector(n_qubits={self.n_qubits}, qubits={self.qubits})"


def _permute(flat, order, new_order):
    order, new_order = list(order), list(new_order)
    if order == new_order:
        return flat.copy()
    if len(order) != len(new_order) or set(order) != set(new_order):
        raise QubitNotInState(f"{new_order} is not a permutation of {order}")
    n = len(order)
    t = flat.reshape((2,) * n).transpose([order.index(q) for q in new_order])
    return np.ascontiguousarray(t).ravel()


def init_from_tokens(tokens: str, order: Sequence) -> StateVector:
    """Product state from a token string over ``0 1 + -`` (one char per qubit).

    A single token is broadcast to every qubit.
    """
    order = list(order)
    if len(tokens) == 1 and len(order) != 1:
        tokens = tokens * len(order)
    if len(tokens) != len(order):
        raise BadToken(f"Expected {len(order)} tokens, got {len(tokens)} ('{tokens}')")
    bad = set(tokens) - set(_TOKENS)
    if bad:
        raise BadToken(
            f"Tokens {sorted(bad)} not allowed for state-vector initial states "
            "(open/traced indices require tensor contraction)"
        )
    psi = np.ones(1, dtype=complex)
    for t in tokens:
        psi = np.kron(psi, _TOKENS[t])
    return StateVector.from_array(psi, order)


def _move_to_end(state: StateVector, qubits: Sequence):
    qubits = list(qubits)
    k = len(qubits)
    if state.order[len(state.order) - k:] == qubits:
        return
    missing = [q for q in qubits if q not in state.order]
    if missing:
        raise QubitNotInState(f"Qubits {missing} not in state")
    new_order = [q for q in state.order if q not in qubits] + qubits
    state.re = _permute(state.re, state.order, new_order)
    state.im = _permute(state.im, state.order, new_order)
    state.order = new_order


def _matvec_block(re, im, a_t, b_t, out_re, out_im, lo, hi):
    r, i = re[lo:hi], im[lo:hi]
    np.matmul(r, a_t, out=out_re[lo:hi])
    out_re[lo:hi] -= i @ b_t
    np.matmul(i, a_t, out=out_im[lo:hi])
    out_im[lo:hi] += r @ b_t


def apply_matrix(state: StateVector, qubits: Sequence, matrix, threads: int | None = None) -> StateVector:
    """Apply ``matrix`` on ``qubits`` in place and return ``state``.

    The targets are moved to the least significant axes first, so
    ``state.order`` may change; the logical state does not.
    """
    qubits = list(qubits)
    if len(set(qubits)) != len(qubits):
        raise ValueError("Target qubits must be distinct")
    matrix = np.asarray(matrix)
    d = 2 ** len(qubits)
    if matrix.shape != (d, d):
        raise ShapeMismatch(f"Matrix of shape {matrix.shape} does not act on {len(qubits)} qubit(s)")
    _move_to_end(state, qubits)
    rows = len(state.re) // d
    re = state.re.reshape(rows, d)
    im = state.im.reshape(rows, d)
    a_t = np.ascontiguousarray(matrix.real.T)
    b_t = np.ascontiguousarray(matrix.imag.T)
    out_re = np.empty_like(re)
    out_im = np.empty_like(im)
    workers = num_threads(threads)
    if workers == 1 or len(state.re) < _PARALLEL_MIN_SIZE or rows < workers:
        _matvec_block(re, im, a_t, b_t, out_re, out_im, 0, rows)
    else:
        # Disjoint row blocks: no synchronisation beyond the final join.
        bounds = np.linspace(0, rows, workers + 1).astype(int)
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(lambda lh: _matvec_block(re, im, a_t, b_t, out_re, out_im, *lh), zip(bounds[:-1], bounds[1:])))
    state.re = out_re.ravel()
    state.im = out_im.ravel()
    return state


def _renormalize(state: StateVector, atol=1e-14):
    nrm = state.norm()
    if nrm < atol:
        raise ZeroNormProjection("Cannot renormalize a state with zero norm")
    state.re /= nrm
    state.im /= nrm


def project(state: StateVector, qubits: Sequence, bits: str, renormalize: bool = False):
    """Zero every amplitude inconsistent with ``qubits`` being in ``bits``.

    Returns ``(state, state.order)``.
    """
    bits = str(bits)
    if len(bits) != len(qubits) or set(bits) - {"0", "1"}:
        raise ValueError(f"Bad projection bits '{bits}' for qubits {tuple(qubits)}")
    n = state.n_qubits
    for arr in (state.re, state.im):
        t = arr.reshape((2,) * n)
        for q, b in zip(qubits, bits):
            if q not in state.order:
                raise QubitNotInState(f"Qubit {q!r} not in state")
            idx = [slice(None)] * n
            idx[state.order.index(q)] = 1 - int(b)
            t[tuple(idx)] = 0
    if renormalize:
        _renormalize(state)
    return state, state.order


def project_array(psi: np.ndarray, order: Sequence, qubits: Sequence, bits: str, renormalize=False):
    """Like :func:`project` but on a dense complex array; returns a new array."""
    order = list(order)
    shape = psi.shape
    t = np.array(psi, dtype=complex).reshape((2,) * len(order))
    for q, b in zip(qubits, bits):
        idx = [slice(None)] * len(order)
        idx[order.index(q)] = 1 - int(b)
        t[tuple(idx)] = 0
    if renormalize:
        nrm = np.linalg.norm(t)
        if nrm < 1e-14:
            raise ZeroNormProjection("Cannot renormalize a state with zero norm")
        t /= nrm
    return t.reshape(shape)


def measure(state: StateVector, qubits: Sequence, rng: np.random.Generator):
    """Sample a computational-basis outcome for ``qubits`` and collapse the state.

    Returns ``(bits, state)`` with ``bits`` a string ordered like ``qubits``.
    """
    qubits = list(qubits)
    n = state.n_qubits
    axes = [state.order.index(q) for q in qubits]
    prob = (state.re**2 + state.im**2).reshape((2,) * n)
    others = tuple(i for i in range(n) if i not in axes)
    marg = prob.sum(axis=others)
    # sum() keeps the remaining axes in ascending position order
    marg = np.transpose(marg, np.argsort(np.argsort(axes))).ravel()
    marg = marg / marg.sum()
    outcome = rng.choice(len(marg), p=marg)
    bits = format(outcome, f"0{len(qubits)}b") if qubits else ""
    project(state, qubits, bits, renormalize=True)
    return bits, state


def _parse_pauli(pauli, qubits):
    if isinstance(pauli, dict):
        items = list(pauli.items())
    else:
        pauli = str(pauli).upper()
        if len(pauli) != len(qubits):
            raise BadPauli(f"Pauli string '{pauli}' does not match {len(qubits)} qubits")
        items = list(zip(qubits, pauli))
    for _, p in items:
        if p not in PAULI:
            raise BadPauli(f"'{p}' is not one of I, X, Y, Z")
    return [(q, p) for q, p in items if p != "I"]


def expectation_pauli(state: StateVector, pauli, qubits: Sequence | None = None) -> float:
    """<psi|P|psi> for a Pauli string over ``qubits`` (default ``state.qubits``).

    ``pauli`` is either a string over ``IXYZ`` or a ``{qubit: 'X'}`` mapping.
    """
    from .linalg import apply_on_axes

    qubits = state.qubits if qubits is None else list(qubits)
    n = state.n_qubits
    psi = (state.re + 1j * state.im).reshape((2,) * n)
    phi = psi
    for q, p in _parse_pauli(pauli, qubits):
        if q not in state.order:
            raise QubitNotInState(f"Qubit {q!r} not in state")
        phi = apply_on_axes(phi, PAULI[p], [state.order.index(q)])
    val = np.vdot(psi, phi)
    if abs(val.imag) > 1e-12 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"Expectation value is not real: {val}")
    return float(val.real)


# ------------------------------------------------------------ simulate ----


def _as_state(initial, order) -> StateVector:
    if isinstance(initial, StateVector):
        state = initial.copy()
        if set(map(repr, state.qubits)) != set(map(repr, order)):
            raise ShapeMismatch("Initial StateVector does not cover the circuit qubits")
        return state
    if isinstance(initial, str):
        return init_from_tokens(initial, order)
    psi = np.asarray(initial, dtype=complex)
    if psi.size != 2 ** len(order):
        raise ShapeMismatch(f"Initial state has {psi.size} amplitudes, need {2 ** len(order)}")
    return StateVector.from_array(psi, order)


def _apply_gate(state: StateVector, gate: BaseGate, rng, threads, renormalize=False):
    if is_superoperator(gate):
        raise MethodUnsupportedForInput(
            f"{type(gate).__name__} needs a density-matrix simulation (see circsim.noise)"
        )
    if isinstance(gate, StochasticGate):
        _apply_gate(state, gate.sample(rng), rng, threads)
    elif isinstance(gate, TupleGate) and not gate.is_matrix_gate:
        for g in gate.gates:
            _apply_gate(state, g, rng, threads)
    elif isinstance(gate, Measure):
        bits, _ = measure(state, gate.qubits, rng)
        state.records.append((tuple(gate.qubits), bits))
    elif isinstance(gate, Projection):
        project(state, gate.qubits, gate.state, gate.renormalize)
    elif isinstance(gate, FunctionalGate):
        _apply_functional(state, gate)
    elif isinstance(gate, Control) and not gate.is_matrix_gate:
        raise MethodUnsupportedForInput("Controlled non-matrix gates are not supported")
    else:
        apply_matrix(state, gate.qubits, gate.matrix(), threads)
        if renormalize:
            _renormalize(state)


def _apply_functional(state: StateVector, gate: FunctionalGate):
    n = state.n_qubits
    psi = (state.re + 1j * state.im).reshape((2,) * n)
    order = list(state.order)
    new_psi, new_order = gate(psi, order)
    new_psi = np.asarray(new_psi)
    new_order = list(new_order)
    if new_psi.size != 2**n:
        raise ShapeMismatch(f"Functional gate returned {new_psi.size} amplitudes, expected {2 ** n}")
    if sorted(map(repr, new_order)) != sorted(map(repr, order)):
        raise ShapeMismatch("Functional gate must return a permutation of the input order")
    flat = new_psi.ravel()
    state.re = np.ascontiguousarray(flat.real, dtype=np.float64)
    state.im = np.ascontiguousarray(flat.imag, dtype=np.float64)
    state.order = new_order


def _fuse(circuit: Sequence[BaseGate], max_n_qubits: int):
    """Yield ``(gate, renormalize)`` after fusing matrix gates into groups."""
    width = max((len(g.qubits) for g in circuit if g.is_matrix_gate), default=1)
    for group in compress_circuit(circuit, max(max_n_qubits, width)):
        if len(group) == 1 or not group[0].is_matrix_gate:
            for g in group:
                yield g, False
            continue
        qubits = group.all_qubits()
        from .gates import MatrixGate

        renorm = any(isinstance(g, Projection) and g.renormalize for g in group)
        yield MatrixGate(circuit_matrix(group, qubits), qubits), renorm


def simulate_statevector(
    circuit: Sequence[BaseGate],
    initial="0",
    rng: np.random.Generator | int | None = None,
    *,
    qubits: Sequence | None = None,
    compress: int = 4,
    threads: int | None = None,
) -> StateVector:
    """Evolve ``initial`` through ``circuit``.

    Parameters
    ----------
    circuit : sequence of gates
    initial : str, array or StateVector
        Token string over ``0 1 + -`` (a single token is broadcast), dense
        amplitudes over ``qubits``, or an existing state (copied).
    rng : numpy Generator or seed
        Used by stochastic gates and measurements.
    qubits : sequence, optional
        Logical qubit order, defaults to the sorted qubits of ``circuit``.
    compress : int
        Fuse consecutive gates into blocks of at most this many qubits before
        evolving; 0 disables fusion.
    threads : int, optional
        Worker count for large states (overrides ``SIM_NUM_THREADS``).
    """
    circuit = list(circuit)
    if qubits is None:
        qubits = Circuit(circuit).all_qubits() if not isinstance(initial, StateVector) else initial.qubits
    qubits = list(qubits)
    used = {q for g in circuit for q in g.qubits}
    if used - set(qubits):
        raise QubitNotInState(f"Circuit acts on qubits not in the state: {used - set(qubits)}")
    rng = np.random.default_rng(rng)
    state = _as_state(initial, qubits)
    fusable = compress > 0 and not any(is_superoperator(g) for g in circuit)
    steps = _fuse(circuit, compress) if fusable else ((g, False) for g in circuit)
    for gate, renorm in steps:
        _apply_gate(state, gate, rng, threads, renorm)
    return state
