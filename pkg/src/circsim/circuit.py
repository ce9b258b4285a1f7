"""Circuits and circuit utilities.

A :class:`Circuit` is a list of gates applied left to right. A
:class:`SuperCircuit` additionally accepts superoperator gates (Kraus
channels). The utilities below are pure functions returning new circuits.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import (
    GateTooWide,
    NotInvertible,
    NotMatrixRepresentable,
    TooManyQubits,
    UnknownQubit,
)
from .gates import BaseGate, MatrixGate, is_superoperator
from .linalg import apply_on_axes, embed, global_phase_close, reorder_matrix, sort_qubits

__all__ = [
    "Circuit",
    "SuperCircuit",
    "circuit_matrix",
    "inverse",
    "simplify",
    "compress",
    "to_matrix_gate",
    "lightcone_pop",
    "isclose",
    "moments",
    "MAX_MATRIX_QUBITS",
]

MAX_MATRIX_QUBITS = 12


class Circuit(list):
    """Ordered list of gates; ``circuit[0]`` is applied first."""

    _allow_super = False

    def __init__(self, gates: Iterable[BaseGate] = ()):
        super().__init__()
        self.extend(gates)

    def _check(self, gate):
        if not isinstance(gate, BaseGate):
            raise TypeError(f"'{type(gate).__name__}' is not a gate")
        if is_superoperator(gate) and not self._allow_super:
            raise ValueError(f"'{type(gate).__name__}' not supported.")
        if gate.qubits is None:
            raise ValueError(f"{gate!r} has no qubits assigned")
        return gate

    def append(self, gate):
        super().append(self._check(gate))

    def extend(self, gates):
        super().extend(self._check(g) for g in gates)

    def insert(self, index, gate):
        super().insert(index, self._check(gate))

    def __setitem__(self, index, value):
        if isinstance(index, slice):
            value = [self._check(g) for g in value]
        else:
            value = self._check(value)
        super().__setitem__(index, value)

    def __iadd__(self, gates):
        self.extend(gates)
        return self

    def __add__(self, other):
        cls = SuperCircuit if isinstance(other, SuperCircuit) else type(self)
        return cls(list(self) + list(other))

    def __getitem__(self, index):
        out = super().__getitem__(index)
        return type(self)(out) if isinstance(index, slice) else out

    def all_qubits(self) -> list:
        """Sorted list of every qubit used by the circuit."""
        return sort_qubits({q for g in self for q in g.qubits})

    def inv(self):
        return inverse(self)

    adj = inv

    def __repr__(self):
        body = "".join(f"\n\t{g!r}," for g in self)
        return f"{type(self).__name__}([{body}\n])"


class SuperCircuit(Circuit):
    """Circuit that may also contain superoperator gates."""

    _allow_super = True

    def __add__(self, other):
        return SuperCircuit(list(self) + list(other))


# ------------------------------------------------------------- matrices ----


def circuit_matrix(circuit: Sequence[BaseGate], qubits=None, max_qubits: int = MAX_MATRIX_QUBITS):
    """Dense matrix of ``circuit`` over ``qubits`` (default: sorted ``all_qubits``)."""
    order = list(qubits) if qubits is not None else Circuit(circuit).all_qubits()
    n = len(order)
    if n > max_qubits:
        raise TooManyQubits(f"{n} qubits exceeds the dense-matrix cap of {max_qubits}")
    pos = {q: i for i, q in enumerate(order)}
    u = np.eye(2**n, dtype=complex).reshape((2,) * n + (2**n,))
    for g in circuit:
        if not g.is_matrix_gate:
            raise NotMatrixRepresentable(f"{g!r} has no matrix representation")
        u = apply_on_axes(u, g.matrix(), [pos[q] for q in g.qubits])
    return u.reshape(2**n, 2**n)


def to_matrix_gate(circuit: Sequence[BaseGate]):
    """Fuse ``circuit`` into a single MATRIX gate on its sorted qubits."""
    qubits = Circuit(circuit).all_qubits()
    return MatrixGate(circuit_matrix(circuit, qubits), qubits)


def inverse(circuit: Circuit) -> Circuit:
    """Reverse the circuit and take the adjoint of every gate."""
    out = []
    for g in reversed(circuit):
        try:
            out.append(g.adj())
        except NotInvertible:
            raise NotInvertible(f"Cannot invert circuit containing {g!r}") from None
    return type(circuit)(out) if isinstance(circuit, Circuit) else Circuit(out)


# ------------------------------------------------------------- simplify ----


class _MatrixCache:
    def __init__(self):
        self._m = {}
        self._comm = {}

    def matrix(self, g):
        key = id(g)
        if key not in self._m:
            m = None
            if g.is_matrix_gate:
                try:
                    m = g.matrix()
                except Exception:
                    m = None
            self._m[key] = (g, m)
        return self._m[key][1]

    def commute(self, g, h, atol):
        key = (id(g), id(h))
        if key not in self._comm:
            union = list(dict.fromkeys(g.qubits + h.qubits))
            a = embed(self.matrix(g), g.qubits, union)
            b = embed(self.matrix(h), h.qubits, union)
            self._comm[key] = bool(np.max(np.abs(a @ b - b @ a)) < atol)
        return self._comm[key]


def _is_identity(m, atol):
    return np.max(np.abs(m - np.eye(len(m)))) < atol


def simplify(circuit: Circuit, use_matrix_commutation: bool = True, atol: float = 1e-8) -> Circuit:
    """Remove identities and cancel ``G, G^-1`` pairs until nothing changes.

    A gate may move past gates acting on disjoint qubits and, when
    ``use_matrix_commutation`` is set, past gates whose matrices commute with
    it. Gates without a matrix act as barriers on their qubits.
    """
    gates = list(circuit)
    cache = _MatrixCache()

    def partner(i):
        g = gates[i]
        mg = cache.matrix(g)
        if mg is None:
            return None
        qs = set(g.qubits)
        for j in range(i + 1, len(gates)):
            h = gates[j]
            hq = set(h.qubits)
            mh = cache.matrix(h)
            if hq == qs and mh is not None:
                if _is_identity(reorder_matrix(mh, h.qubits, g.qubits) @ mg, atol):
                    return j
            if not qs & hq:
                continue
            if use_matrix_commutation and mh is not None and cache.commute(g, h, atol):
                continue
            return None
        return None

    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(gates):
            m = cache.matrix(gates[i])
            if m is not None and _is_identity(m, atol):
                del gates[i]
                changed = True
                continue
            j = partner(i)
            if j is not None:
                del gates[j], gates[i]
                changed = True
                continue
            i += 1
    return type(circuit)(gates) if isinstance(circuit, Circuit) else Circuit(gates)


# ------------------------------------------------------------- compress ----


def compress(circuit: Sequence[BaseGate], max_n_qubits: int) -> list[Circuit]:
    """Group gates into sub-circuits acting on at most ``max_n_qubits`` qubits.

    Greedy, left to right: each gate joins the earliest group whose support
    stays within the bound and which no intervening non-member gate blocks
    (i.e. no other gate touching the same qubits sits between the group's
    first gate and this one). Gates without a matrix form their own
    closed group. Groups are returned in an order that preserves the
    relative order of gates on every qubit.
    """
    members: list[list[int]] = []
    support: list[set] = []
    first: list[int] = []
    closed: list[bool] = []
    last_gate = {}  # qubit -> index of the last gate touching it
    group_of = {}  # gate index -> group id

    for i, g in enumerate(circuit):
        qs = set(g.qubits)
        fusable = g.is_matrix_gate and not is_superoperator(g)
        if fusable and len(qs) > max_n_qubits:
            raise GateTooWide(f"{g!r} acts on {len(qs)} qubits > max_n_qubits={max_n_qubits}")
        target = None
        if fusable:
            for k in range(len(members)):
                if closed[k] or len(support[k] | qs) > max_n_qubits:
                    continue
                if all(last_gate.get(q, -1) < first[k] or group_of[last_gate[q]] == k for q in qs):
                    target = k
                    break
        if target is None:
            target = len(members)
            members.append([])
            support.append(set())
            first.append(i)
            closed.append(not fusable)
        members[target].append(i)
        support[target] |= qs
        group_of[i] = target
        for q in qs:
            last_gate[q] = i

    def wrap(gs):
        if isinstance(circuit, Circuit):
            return type(circuit)(gs)
        return (SuperCircuit if any(is_superoperator(g) for g in gs) else Circuit)(gs)

    return [wrap([circuit[i] for i in idx]) for idx in members]


# ------------------------------------------------------------ lightcone ----


def lightcone_pop(circuit: Circuit, pinned_qubits, direction: str = "from_end") -> Circuit:
    """Drop gates outside the lightcone of ``pinned_qubits``.

    ``direction='from_end'`` keeps the gates that can influence the pinned
    qubits at the output; ``'from_start'`` keeps those influenced by them
    at the input.
    """
    if direction not in ("from_end", "from_start"):
        raise ValueError("direction must be 'from_end' or 'from_start'")
    all_q = set(q for g in circuit for q in g.qubits)
    live = set(pinned_qubits)
    if live - all_q:
        raise UnknownQubit(f"Unknown pinned qubits: {sort_qubits(live - all_q)}")
    idx = range(len(circuit) - 1, -1, -1) if direction == "from_end" else range(len(circuit))
    keep = []
    for i in idx:
        qs = set(circuit[i].qubits)
        if qs & live:
            keep.append(i)
            live |= qs
    keep.sort()
    cls = type(circuit) if isinstance(circuit, Circuit) else Circuit
    return cls(circuit[i] for i in keep)


pop = lightcone_pop


def isclose(
    a: Circuit,
    b: Circuit,
    atol: float = 1e-8,
    use_matrix_commutation: bool = True,
    max_qubits: int = MAX_MATRIX_QUBITS,
) -> bool:
    """True if circuits ``a`` and ``b`` implement the same operator (up to global phase)."""
    a, b = Circuit(a), Circuit(b)
    if not simplify(a + inverse(b), use_matrix_commutation, atol):
        return True
    qubits = sort_qubits(set(a.all_qubits()) | set(b.all_qubits()))
    if len(qubits) > max_qubits:
        raise TooManyQubits(f"{len(qubits)} qubits exceeds the dense-matrix cap of {max_qubits}")
    return global_phase_close(circuit_matrix(a, qubits), circuit_matrix(b, qubits), atol)


def moments(circuit: Sequence[BaseGate]) -> list[list[int]]:
    """Greedy left-to-right packing of gate indices into layers on disjoint qubits."""
    depth = {}
    layers: list[list[int]] = []
    for i, g in enumerate(circuit):
        d = max((depth.get(q, 0) for q in g.qubits), default=0)
        if d == len(layers):
            layers.append([])
        layers[d].append(i)
        for q in g.qubits:
            depth[q] = d + 1
    return layers
