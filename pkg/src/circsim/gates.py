"""Gates: named/matrix gates, composite gates and superoperator gates.

Every gate carries ``qubits`` and ``tags``. Plain :class:`Gate` objects add a
registry name, parameters, a power exponent and an adjoint flag; composite
gates (stochastic, tuple, controlled, projection, measurement, functional and
Schmidt) wrap other gates. :class:`KrausSuperGate` and
:class:`MatrixSuperGate` act on density matrices and are only accepted by
:class:`circsim.circuit.SuperCircuit`.

Matrices follow the package-wide convention: ``qubits[0]`` is the most
significant index.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    ArityMismatch,
    BadPartition,
    NotInvertible,
    NotMatrixRepresentable,
    NotUnitary,
    ParamCountMismatch,
    UnboundParameter,
    UnknownGate,
)
from .linalg import embed, kron

__all__ = [
    "Symbol",
    "BaseGate",
    "Gate",
    "MatrixGate",
    "StochasticGate",
    "TupleGate",
    "Control",
    "Projection",
    "Measure",
    "FunctionalGate",
    "SchmidtGate",
    "KrausSuperGate",
    "MatrixSuperGate",
    "make_gate",
    "gate_matrix",
    "is_clifford",
    "schmidt_decompose",
    "schmidt_merge",
    "get_available_gates",
    "bind",
]


@dataclass(frozen=True)
class Symbol:
    """An unbound, named parameter. Bind it with :func:`bind` before simulating."""

    name: str

    def __repr__(self):
        return self.name


# ---------------------------------------------------------------- registry --

_SQ2 = 1 / np.sqrt(2)

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _rx(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def _ry(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(t):
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


def _u3(theta, phi, lam):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array(
        [[c, -np.exp(1j * lam) * s], [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]]
    )


def _fsim(theta, phi):
    c, s = np.cos(theta), np.sin(theta)
    return np.array(
        [[1, 0, 0, 0], [0, c, -1j * s, 0], [0, -1j * s, c, 0], [0, 0, 0, np.exp(-1j * phi)]]
    )


def _const(m):
    m = np.asarray(m, dtype=complex)
    return lambda: m


@dataclass(frozen=True)
class _Spec:
    n_qubits: int | None
    n_params: int
    fn: Callable | None
    rotation: bool = False


_REGISTRY: dict[str, _Spec] = {
    "I": _Spec(1, 0, _const(PAULI["I"])),
    "X": _Spec(1, 0, _const(PAULI["X"])),
    "Y": _Spec(1, 0, _const(PAULI["Y"])),
    "Z": _Spec(1, 0, _const(PAULI["Z"])),
    "H": _Spec(1, 0, _const(_SQ2 * np.array([[1, 1], [1, -1]]))),
    "S": _Spec(1, 0, _const(np.diag([1, 1j]))),
    "T": _Spec(1, 0, _const(np.diag([1, np.exp(0.25j * np.pi)]))),
    "SQRT_X": _Spec(1, 0, _const(0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]]))),
    "RX": _Spec(1, 1, _rx, rotation=True),
    "RY": _Spec(1, 1, _ry, rotation=True),
    "RZ": _Spec(1, 1, _rz, rotation=True),
    "U3": _Spec(1, 3, _u3),
    "CX": _Spec(2, 0, _const([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])),
    "CZ": _Spec(2, 0, _const(np.diag([1, 1, 1, -1]))),
    "CPHASE": _Spec(2, 1, lambda phi: np.diag([1, 1, 1, np.exp(1j * phi)])),
    "SWAP": _Spec(2, 0, _const([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]])),
    "ISWAP": _Spec(2, 0, _const([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]])),
    "FSIM": _Spec(2, 2, _fsim),
    "MATRIX": _Spec(None, 0, None),
}

# Composite gates reachable through make_gate.
_COMPOSITE_NAMES = ("PROJECTION", "MEASURE")


def get_available_gates() -> tuple[str, ...]:
    """Names accepted by :func:`make_gate` / :class:`Gate`."""
    return tuple(_REGISTRY) + _COMPOSITE_NAMES


# ---------------------------------------------------------------- base ----


def _as_qubits(qubits):
    if qubits is None:
        return None
    if isinstance(qubits, (str, bytes)) or not isinstance(qubits, Sequence):
        qubits = list(qubits) if not isinstance(qubits, (str, bytes)) else [qubits]
    qubits = tuple(qubits)
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"Qubits must be distinct, got {qubits}")
    return qubits


class BaseGate:
    """Common behaviour: qubits, tags, immutability and equality."""

    _frozen = False
    name: str = "GATE"

    def __init__(self, qubits=None, tags: Mapping | None = None):
        self._qubits = _as_qubits(qubits)
        self._tags = dict(tags or {})

    def _freeze(self):
        object.__setattr__(self, "_frozen", True)

    def __setattr__(self, key, value):
        if self._frozen:
            raise AttributeError(f"{type(self).__name__} is immutable")
        object.__setattr__(self, key, value)

    def _copy(self, **changes):
        new = object.__new__(type(self))
        d = dict(self.__dict__)
        d.pop("_frozen", None)
        d.update(changes)
        new.__dict__.update(d)
        new._freeze()
        return new

    @property
    def qubits(self) -> tuple | None:
        return self._qubits

    @property
    def n_qubits(self) -> int | None:
        return None if self._qubits is None else len(self._qubits)

    @property
    def tags(self) -> dict:
        return dict(self._tags)

    def on(self, qubits):
        """Return a copy acting on ``qubits``."""
        qubits = _as_qubits(qubits)
        n = self._arity()
        if n is not None and len(qubits) != n:
            raise ArityMismatch(f"{self.name} acts on {n} qubit(s), got {len(qubits)}")
        return self._copy(_qubits=qubits)

    def relabel(self, mapping: Mapping):
        """Return a copy with every qubit ``q`` replaced by ``mapping[q]``."""
        return self._copy(_qubits=tuple(mapping[q] for q in _require_qubits(self)))

    def with_tags(self, **tags):
        return self._copy(_tags={**self._tags, **tags})

    def _arity(self):
        return self.n_qubits

    # subclasses override
    is_matrix_gate = False
    is_unitary = False

    def matrix(self) -> np.ndarray:
        raise NotMatrixRepresentable(f"{type(self).__name__} has no matrix representation")

    def adj(self):
        raise NotInvertible(f"{type(self).__name__} cannot be inverted")

    def _key(self):
        return (type(self).__name__, self._qubits, tuple(sorted(self._tags.items(), key=repr)))

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented
        return self._key() == other._key() and self._extra_eq(other)

    def _extra_eq(self, other):
        return True

    __hash__ = None


def _require_qubits(gate):
    if gate.qubits is None:
        raise ValueError(f"{gate!r} has no qubits assigned; use .on(qubits)")
    return gate.qubits


# ---------------------------------------------------------------- Gate ----


def _resolve(p):
    if isinstance(p, Symbol):
        raise UnboundParameter(f"Parameter '{p.name}' is unbound")
    return p


class Gate(BaseGate):
    """A gate from the registry, or an explicit matrix gate (``name='MATRIX'``).

    >>> Gate('H', [0]).matrix().round(3)
    array([[ 0.707+0.j,  0.707+0.j],
           [ 0.707+0.j, -0.707+0.j]])

    ``gate ** t`` multiplies the power; ``gate.adj()`` toggles the adjoint
    flag. For rotation gates (RX, RY, RZ) the power rescales the angle.
    Otherwise fractional powers use the principal branch of the
    eigenvalues.
    """

    def __new__(cls, name="MATRIX", qubits=None, params=None, **kwargs):
        if cls is Gate and isinstance(name, str) and name.upper() in _COMPOSITE_NAMES:
            return make_gate(name, qubits, params, **kwargs)
        return super().__new__(cls)

    def __init__(
        self,
        name: str = "MATRIX",
        qubits=None,
        params: Sequence | None = None,
        *,
        power: float = 1,
        adjoint: bool = False,
        tags: Mapping | None = None,
        matrix=None,
        U=None,
    ):
        if self._frozen:  # returned from __new__ as a composite
            return
        super().__init__(qubits, tags)
        name = name.upper()
        if name not in _REGISTRY:
            raise UnknownGate(name, get_available_gates())
        spec = _REGISTRY[name]
        params = tuple(params or ())
        matrix = U if matrix is None else matrix
        if name == "MATRIX":
            if matrix is None:
                raise ValueError("MATRIX gate requires an explicit matrix")
            matrix = np.array(matrix, dtype=complex)
            d = matrix.shape[0]
            k = int(round(np.log2(d))) if d > 0 else -1
            if matrix.ndim != 2 or matrix.shape != (d, d) or 2**k != d:
                raise ValueError(f"Matrix must be square with dimension 2^k, got {matrix.shape}")
            matrix.setflags(write=False)
            n = k
        else:
            if matrix is not None:
                raise ValueError(f"Gate '{name}' does not accept an explicit matrix")
            n = spec.n_qubits
        if len(params) != spec.n_params:
            raise ParamCountMismatch(f"{name} takes {spec.n_params} parameter(s), got {len(params)}")
        for p in params:
            if not isinstance(p, (numbers.Real, Symbol)):
                raise TypeError(f"Parameters must be real numbers or Symbol, got {p!r}")
        if self._qubits is not None and len(self._qubits) != n:
            raise ArityMismatch(f"{name} acts on {n} qubit(s), got {len(self._qubits)}")
        self.name = name
        self._n = n
        self._params = params
        self._power = power
        self._adjoint = bool(adjoint)
        self._matrix = matrix
        self._freeze()

    def _arity(self):
        return self._n

    @property
    def n_qubits(self):
        return self._n

    @property
    def params(self) -> tuple:
        return self._params

    @property
    def effective_params(self) -> tuple:
        """Parameters with the power folded in (rotation gates only)."""
        if _REGISTRY[self.name].rotation and not isinstance(self._params[0], Symbol):
            return (self._params[0] * self._power,)
        return self._params

    @property
    def power(self):
        return self._power

    @property
    def adjoint(self) -> bool:
        return self._adjoint

    @property
    def matrix_override(self):
        return self._matrix

    @property
    def is_unitary(self):
        return True if self.name != "MATRIX" else _is_unitary(self._matrix)

    is_matrix_gate = True

    @property
    def symbols(self) -> set[str]:
        return {p.name for p in self._params if isinstance(p, Symbol)}

    def __pow__(self, t):
        if not isinstance(t, numbers.Real):
            return NotImplemented
        return self._copy(_power=self._power * t)

    def adj(self):
        return self._copy(_adjoint=not self._adjoint)

    def matrix(self) -> np.ndarray:
        spec = _REGISTRY[self.name]
        params = tuple(_resolve(p) for p in self._params)
        power = _resolve(self._power)
        if self.name == "MATRIX":
            m = self._matrix
        elif spec.rotation:
            m, power = spec.fn(params[0] * power), 1
        else:
            m = spec.fn(*params)
        m = _matrix_power(np.asarray(m, dtype=complex), power)
        if self._adjoint:
            m = m.conj().T
        return m

    def _key(self):
        return super()._key() + (self.name, self._params, self._power, self._adjoint)

    def _extra_eq(self, other):
        if self._matrix is None or other._matrix is None:
            return self._matrix is other._matrix
        return np.array_equal(self._matrix, other._matrix)

    def __repr__(self):
        s = f"Gate_{self.name}{'^+' if self._adjoint else ''}(name='{self.name}'"
        if self._qubits is not None:
            s += f", qubits={self._qubits}"
        else:
            s += f", n_qubits={self._n}"
        if self._params and _REGISTRY[self.name].rotation and not isinstance(self._params[0], Symbol):
            s += f", φ={self.effective_params[0] / np.pi:g}π"
        elif self._params:
            s += f", params={self.effective_params}"
        if self._matrix is not None:
            s += f", M=numpy.ndarray(shape={self._matrix.shape})"
        if self._tags:
            s += f", tags={self._tags}"
        s += ")"
        if self._power != 1 and not _REGISTRY[self.name].rotation:
            s += f"**{self._power}"
        return s


def MatrixGate(U, qubits=None, **kwargs) -> Gate:
    """Shortcut for ``Gate('MATRIX', qubits, matrix=U)``."""
    return Gate("MATRIX", qubits, matrix=U, **kwargs)


def _is_unitary(m, atol=1e-8):
    m = np.asarray(m)
    return bool(np.allclose(m @ m.conj().T, np.eye(len(m)), atol=atol, rtol=0))


def _matrix_power(m: np.ndarray, t) -> np.ndarray:
    if t == 1:
        return m
    if float(t).is_integer():
        return np.linalg.matrix_power(m, int(t))
    # Complex Schur form is diagonal for normal (e.g. unitary) matrices.
    T, Z = scipy.linalg.schur(m, output="complex")
    if np.allclose(T, np.diag(np.diag(T)), atol=1e-10):
        return (Z * np.diag(T) ** t) @ Z.conj().T
    return scipy.linalg.fractional_matrix_power(m, t)


def make_gate(name: str, qubits=None, params=None, tags=None, **kwargs) -> BaseGate:
    """Build a gate by registry name.

    ``PROJECTION`` and ``MEASURE`` build the corresponding composite gates;
    ``PROJECTION`` additionally takes ``state`` (a bit string).
    """
    key = name.upper()
    if key == "PROJECTION":
        return Projection(kwargs.pop("state"), qubits, tags=tags, **kwargs)
    if key == "MEASURE":
        return Measure(qubits, tags=tags)
    return Gate(key, qubits, params, tags=tags, **kwargs)


def gate_matrix(gate: BaseGate) -> np.ndarray:
    return gate.matrix()


def bind(gate: BaseGate, values: Mapping[str, float]):
    """Substitute named parameters of ``gate`` (recursively for composites)."""
    if isinstance(gate, Gate):
        params = tuple(values.get(p.name, p) if isinstance(p, Symbol) else p for p in gate.params)
        power = values.get(gate.power.name, gate.power) if isinstance(gate.power, Symbol) else gate.power
        return gate._copy(_params=params, _power=power)
    if hasattr(gate, "_map_children"):
        return gate._map_children(lambda g: bind(g, values))
    return gate


# ---------------------------------------------------------- composites ----


class StochasticGate(BaseGate):
    """Applies one of ``gates``, drawn with probabilities ``p`` on every application."""

    name = "STOCHASTIC"

    def __init__(self, gates, p, tags=None):
        gates = tuple(gates)
        p = np.asarray(p, dtype=float)
        if len(p) != len(gates):
            raise ValueError("Need one probability per gate")
        if np.any(p < 0) or not np.isclose(p.sum(), 1, atol=1e-12):
            raise ValueError("Probabilities must be non-negative and sum to 1")
        super().__init__(_union_qubits(gates), tags)
        self.gates = gates
        self.p = p
        self._freeze()

    def sample(self, rng: np.random.Generator) -> BaseGate:
        return self.gates[rng.choice(len(self.gates), p=self.p)]

    def _map_children(self, f):
        return self._copy(gates=tuple(map(f, self.gates)))

    def relabel(self, mapping):
        return self._map_children(lambda g: g.relabel(mapping))._copy(
            _qubits=tuple(mapping[q] for q in self._qubits)
        )

    def on(self, qubits):
        return self.relabel(dict(zip(self._qubits, _as_qubits(qubits))))

    def _extra_eq(self, other):
        return self.gates == other.gates and np.array_equal(self.p, other.p)

    def __repr__(self):
        return f"StochasticGate(gates={self.gates}, p={self.p.tolist()})"


class TupleGate(BaseGate):
    """Applies ``gates`` one after the other."""

    name = "TUPLE"

    def __init__(self, gates, tags=None):
        gates = tuple(gates)
        super().__init__(_union_qubits(gates), tags)
        self.gates = gates
        self._freeze()

    @property
    def is_matrix_gate(self):
        return all(g.is_matrix_gate for g in self.gates)

    @property
    def is_unitary(self):
        return all(g.is_unitary for g in self.gates)

    def matrix(self):
        qubits = _require_qubits(self)
        m = np.eye(2 ** len(qubits), dtype=complex)
        for g in self.gates:
            m = embed(g.matrix(), g.qubits, qubits) @ m
        return m

    def adj(self):
        return self._copy(gates=tuple(g.adj() for g in reversed(self.gates)))

    def _map_children(self, f):
        return self._copy(gates=tuple(map(f, self.gates)))

    relabel = StochasticGate.relabel
    on = StochasticGate.on

    def _extra_eq(self, other):
        return self.gates == other.gates

    def __repr__(self):
        return f"TupleGate(gates={self.gates})"


class Control(BaseGate):
    """``gate`` applied only when every qubit in ``c_qubits`` is |1>."""

    name = "CONTROL"

    def __init__(self, c_qubits, gate: BaseGate, tags=None):
        c_qubits = _as_qubits(c_qubits)
        if gate.qubits is None:
            raise ValueError("Controlled gate must have qubits")
        if set(c_qubits) & set(gate.qubits):
            raise ValueError("Control and target qubits overlap")
        super().__init__(c_qubits + gate.qubits, tags)
        self.c_qubits = c_qubits
        self.gate = gate
        self._freeze()

    @property
    def is_matrix_gate(self):
        return self.gate.is_matrix_gate

    @property
    def is_unitary(self):
        return self.gate.is_unitary

    def matrix(self):
        g = self.gate.matrix()
        d = 2 ** len(self._qubits)
        m = np.eye(d, dtype=complex)
        m[d - len(g):, d - len(g):] = g
        return m

    def adj(self):
        return self._copy(gate=self.gate.adj())

    def __pow__(self, t):
        return self._copy(gate=self.gate**t)

    def _map_children(self, f):
        return self._copy(gate=f(self.gate))

    def relabel(self, mapping):
        c = tuple(mapping[q] for q in self.c_qubits)
        return self._copy(gate=self.gate.relabel(mapping), c_qubits=c, _qubits=tuple(mapping[q] for q in self._qubits))

    on = StochasticGate.on

    def _extra_eq(self, other):
        return self.c_qubits == other.c_qubits and self.gate == other.gate

    def __repr__(self):
        return f"Control(c_qubits={self.c_qubits}, gate={self.gate!r})"


class Projection(BaseGate):
    """Projects ``qubits`` onto the computational basis state ``state``."""

    name = "PROJECTION"
    is_matrix_gate = True

    def __init__(self, state: str, qubits=None, renormalize: bool = False, tags=None):
        state = str(state)
        if set(state) - {"0", "1"}:
            raise ValueError(f"Projection state must be a bit string, got '{state}'")
        super().__init__(qubits, tags)
        if self._qubits is not None and len(self._qubits) != len(state):
            raise ArityMismatch("Projection state length must match the number of qubits")
        self.state = state
        self.renormalize = bool(renormalize)
        self._freeze()

    def _arity(self):
        return len(self.state)

    @property
    def n_qubits(self):
        return len(self.state)

    def matrix(self):
        d = 2 ** len(self.state)
        m = np.zeros((d, d), dtype=complex)
        i = int(self.state, 2) if self.state else 0
        m[i, i] = 1
        return m

    def __call__(self, psi, order, renormalize=None):
        """Project the dense state ``psi`` (qubit axes given by ``order``).

        Returns ``(projected_psi, order)``; ``psi`` itself is not modified.
        """
        from .statevector import project_array

        renorm = self.renormalize if renormalize is None else renormalize
        out = project_array(np.asarray(psi), list(order), _require_qubits(self), self.state, renorm)
        return out, order

    def _extra_eq(self, other):
        return self.state == other.state and self.renormalize == other.renormalize

    def __repr__(self):
        return f"ProjectionGate(name='PROJECTION', qubits={self._qubits}, state='{self.state}')"


class Measure(BaseGate):
    """Projective measurement of ``qubits`` in the computational basis."""

    name = "MEASURE"

    def __init__(self, qubits=None, tags=None):
        super().__init__(qubits, tags)
        self._freeze()

    def __repr__(self):
        return f"Measure(qubits={self._qubits})"


class FunctionalGate(BaseGate):
    """Applies an arbitrary callback ``f(gate, psi, order) -> (psi, order)``."""

    name = "FUNCTIONAL"

    def __init__(self, f: Callable, qubits, tags=None):
        super().__init__(qubits, tags)
        self.f = f
        self._freeze()

    def __call__(self, psi, order):
        return self.f(self, psi, order)

    def _extra_eq(self, other):
        return self.f is other.f

    def __repr__(self):
        return f"FunctionalGate(f={getattr(self.f, '__name__', self.f)}, qubits={self._qubits})"


def _norm_s(s, nl, nr):
    if s is None:
        s = 1
    s = np.asarray(s, dtype=complex)
    if s.ndim == 0:
        if nl != nr:
            raise ValueError("Scalar s requires the same number of left and right gates")
        s = s * np.eye(nl, dtype=complex)
    elif s.ndim == 1:
        s = np.diag(s)
    if s.shape != (nl, nr):
        raise ValueError(f"s must have shape ({nl}, {nr}), got {s.shape}")
    return s


class _TwoSided(BaseGate):
    def __init__(self, left, right=None, s=None, qubits=None, tags=None):
        left = tuple(left)
        right = left if right is None else tuple(right)
        s = _norm_s(s, len(left), len(right))
        if qubits is None:
            qubits = _union_qubits(left + right)
        super().__init__(qubits, tags)
        self.left = left
        self.right = right
        self.s = s
        self._freeze()

    @property
    def gates(self):
        return self.left, self.right

    def _map_children(self, f):
        return self._copy(left=tuple(map(f, self.left)), right=tuple(map(f, self.right)))

    relabel = StochasticGate.relabel
    on = StochasticGate.on

    def _extra_eq(self, other):
        return self.left == other.left and self.right == other.right and np.array_equal(self.s, other.s)


class SchmidtGate(_TwoSided):
    """Operator ``sum_ij s_ij L_i (x) R_j`` with ``L_i``/``R_j`` on disjoint qubits."""

    name = "SCHMIDT"
    is_matrix_gate = True

    def __init__(self, left, right, s=None, tags=None):
        super().__init__(left, right, s, tags=tags)
        lq, rq = _union_qubits(self.left), _union_qubits(self.right)
        if set(lq) & set(rq):
            raise BadPartition("Left and right gates must act on disjoint qubits")
        object.__setattr__(self, "_qubits", lq + rq)

    @property
    def left_qubits(self):
        return _union_qubits(self.left)

    @property
    def right_qubits(self):
        return _union_qubits(self.right)

    def matrix(self):
        return schmidt_merge(self).matrix()

    def adj(self):
        return self._copy(
            left=tuple(g.adj() for g in self.left),
            right=tuple(g.adj() for g in self.right),
            s=self.s.conj(),
        )

    def __repr__(self):
        return f"SchmidtGate(n_terms={self.s.shape}, qubits={self._qubits})"


class KrausSuperGate(_TwoSided):
    """Superoperator ``rho -> sum_ij s_ij L_i rho R_j^dagger``.

    ``right`` defaults to ``left`` and ``s`` to the identity, giving the
    usual Kraus form ``sum_i K_i rho K_i^dagger``.
    """

    name = "KRAUS"
    is_superoperator = True

    def __repr__(self):
        return f"KrausSuperGate(name='{self.name}', qubits={self._qubits}, n_terms={self.s.shape})"


class MatrixSuperGate(BaseGate):
    """Superoperator given as a 4^n x 4^n matrix acting on the row-major vec(rho)."""

    name = "MATRIX_SUPER"
    is_superoperator = True

    def __init__(self, matrix, qubits, tags=None):
        super().__init__(qubits, tags)
        matrix = np.array(matrix, dtype=complex)
        d = 4 ** len(self._qubits)
        if matrix.shape != (d, d):
            raise ValueError(f"Superoperator matrix must have shape ({d}, {d})")
        matrix.setflags(write=False)
        self.Map = matrix
        self._freeze()

    def _extra_eq(self, other):
        return np.array_equal(self.Map, other.Map)

    def __repr__(self):
        return f"MatrixSuperGate(qubits={self._qubits})"


def _union_qubits(gates) -> tuple:
    seen = {}
    for g in gates:
        for q in _require_qubits(g):
            seen.setdefault(q, None)
    return tuple(seen)


def is_superoperator(gate) -> bool:
    return bool(getattr(gate, "is_superoperator", False))


# ------------------------------------------------------------ utilities ----


def is_clifford(gate: BaseGate, atol: float = 1e-8) -> bool:
    """True if conjugation by ``gate`` maps every Pauli string to a signed Pauli string."""
    from .clifford import pauli_transfer

    m = gate.matrix()
    if not _is_unitary(m, atol):
        raise NotUnitary(f"{gate!r} is not unitary")
    T = pauli_transfer(m, atol=atol).T
    nz = np.abs(T) > atol
    if not np.all(nz.sum(axis=0) == 1):
        return False
    return bool(np.allclose(np.abs(T[nz]), 1, atol=atol))


def schmidt_decompose(gate: BaseGate, left_qubits, atol: float = 1e-12) -> SchmidtGate:
    """Operator Schmidt decomposition of ``gate`` across ``left_qubits`` | rest.

    The right-hand qubits keep their relative order from ``gate.qubits``.
    """
    qubits = list(_require_qubits(gate))
    left_qubits = list(_as_qubits(left_qubits))
    if not left_qubits or set(left_qubits) - set(qubits) or len(left_qubits) == len(qubits):
        raise BadPartition(f"{left_qubits} is not a proper non-empty subset of {tuple(qubits)}")
    right_qubits = [q for q in qubits if q not in left_qubits]
    k, nl, nr = len(qubits), len(left_qubits), len(right_qubits)
    pl = [qubits.index(q) for q in left_qubits]
    pr = [qubits.index(q) for q in right_qubits]
    t = gate.matrix().reshape((2,) * (2 * k))
    t = np.transpose(t, pl + [p + k for p in pl] + pr + [p + k for p in pr])
    u, sv, vh = np.linalg.svd(t.reshape(4**nl, 4**nr), full_matrices=False)
    keep = sv > atol
    u, sv, vh = u[:, keep], sv[keep], vh[keep]
    left = [MatrixGate(u[:, i].reshape(2**nl, 2**nl), left_qubits) for i in range(len(sv))]
    right = [MatrixGate(vh[i].reshape(2**nr, 2**nr), right_qubits) for i in range(len(sv))]
    return SchmidtGate(left, right, s=np.diag(sv))


def schmidt_merge(schmidt: SchmidtGate) -> Gate:
    """Collapse a :class:`SchmidtGate` into a single MATRIX gate on left + right qubits."""
    lq, rq = schmidt.left_qubits, schmidt.right_qubits
    L = [embed(g.matrix(), g.qubits, lq) for g in schmidt.left]
    R = [embed(g.matrix(), g.qubits, rq) for g in schmidt.right]
    d = 2 ** (len(lq) + len(rq))
    m = np.zeros((d, d), dtype=complex)
    for i, j in zip(*np.nonzero(schmidt.s)):
        m += schmidt.s[i, j] * kron(L[i], R[j])
    return MatrixGate(m, lq + rq)
