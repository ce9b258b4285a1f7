"""Density-matrix simulation by Pauli-string propagation.

An operator ``P`` is pushed through a circuit as ``G P G^dagger`` one
(fused) gate at a time. Each gate is represented by its Pauli transfer
matrix (PTM); a Pauli string whose local word is ``b`` branches into one
child per nonzero entry of column ``b``. Clifford gates never branch, so the
cost grows with the number of non-Clifford gates only. Branches are
traversed depth first, which keeps memory proportional to the circuit
length, and finished branches are accumulated in a hash map.

Pauli strings are packed into a 64-bit integer, two bits per qubit with
qubit 0 in the most significant position (``I=0, X=1, Y=2, Z=3``), which
limits a single expansion to 31 qubits.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .circuit import circuit_matrix, compress
from .errors import (
    BadPauli,
    BranchLimitExceeded,
    NonUnitaryGate,
    NotUnitary,
    TooManyQubits,
)
from .gates import PAULI, BaseGate, is_superoperator
from .linalg import sort_qubits

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

__all__ = [
    "PauliString",
    "pauli_transfer",
    "channel_transfer",
    "expand_pauli",
    "Branch",
    "ExpansionResult",
    "simulate_clifford",
    "reconstruct_density",
    "expectation_on_tokens",
    "MAX_PAULI_QUBITS",
]

MAX_PAULI_QUBITS = 31
_LETTERS = "IXYZ"
_DIGIT = {c: i for i, c in enumerate(_LETTERS)}


# ------------------------------------------------------------ strings ----


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis; ``digits[i]`` in ``0..3`` for ``I, X, Y, Z``."""

    digits: tuple

    def __post_init__(self):
        if any(d not in (0, 1, 2, 3) for d in self.digits):
            raise BadPauli(f"Invalid Pauli digits {self.digits}")

    @classmethod
    def from_str(cls, s: str) -> "PauliString":
        try:
            return cls(tuple(_DIGIT[c] for c in s.upper()))
        except KeyError:
            raise BadPauli(f"'{s}' is not a string over IXYZ") from None

    @classmethod
    def from_code(cls, code: int, n: int) -> "PauliString":
        return cls(tuple((int(code) >> (2 * (n - 1 - i))) & 3 for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.digits)

    @property
    def code(self) -> int:
        c = 0
        for d in self.digits:
            c = (c << 2) | d
        return c

    def matrix(self) -> np.ndarray:
        m = np.ones((1, 1), dtype=complex)
        for d in self.digits:
            m = np.kron(m, PAULI[_LETTERS[d]])
        return m

    def __str__(self):
        return "".join(_LETTERS[d] for d in self.digits)


def _code_to_str(code: int, n: int) -> str:
    return "".join(_LETTERS[(int(code) >> (2 * (n - 1 - i))) & 3] for i in range(n))


def _str_to_code(s: str) -> int:
    return PauliString.from_str(s).code


# ---------------------------------------------------------------- PTMs ----


@lru_cache(maxsize=None)
def _basis(k: int) -> np.ndarray:
    """Stack of the ``4^k`` Pauli strings on ``k`` qubits, qubit 0 most significant."""
    b = np.ones((1, 1, 1), dtype=complex)
    P = np.stack([PAULI[c] for c in _LETTERS])
    for _ in range(k):
        b = np.einsum("aij,bkl->abikjl", b, P).reshape(len(b) * 4, b.shape[1] * 2, b.shape[2] * 2)
    b.setflags(write=False)
    return b


def _sparsify(T, atol):
    T = np.where(np.abs(T) < atol, 0.0, T)
    return T


def pauli_transfer(matrix, k: int | None = None, atol: float = 1e-12, check: bool = True) -> np.ndarray:
    """PTM of a unitary: ``T[a, b] = Tr(sigma_a U sigma_b U^dagger) / 2^k``.

    Column ``b`` lists the expansion of ``U sigma_b U^dagger`` in the Pauli
    basis. Entries below ``atol`` are set to zero.
    """
    U = np.asarray(matrix, dtype=complex)
    d = U.shape[0]
    if k is None:
        k = int(round(np.log2(d)))
    if U.shape != (2**k, 2**k):
        raise ValueError(f"Matrix of shape {U.shape} does not act on {k} qubits")
    if check and not np.allclose(U.conj().T @ U, np.eye(d), atol=1e-8):
        raise NotUnitary("Pauli transfer matrix requires a unitary matrix")
    B = _basis(k)
    conj = U @ B @ U.conj().T  # U sigma_b U^dagger for every b
    T = np.einsum("aij,bji->ab", B, conj) / d
    return _sparsify(T.real, atol)


def channel_transfer(channel, atol: float = 1e-12) -> np.ndarray:
    """PTM of a superoperator gate: ``T[a, b] = Tr(sigma_a Lambda(sigma_b)) / 2^k``.

    Complex in general; real for Hermiticity-preserving maps.
    """
    from .noise import apply_channel

    k = len(channel.qubits)
    B = _basis(k)
    out = np.stack([apply_channel(channel, b) for b in B])
    T = np.einsum("aij,bji->ab", B, out) / 2**k
    if np.max(np.abs(T.imag), initial=0) < atol:
        T = T.real
    return np.where(np.abs(T) < atol, 0, T)


# ------------------------------------------------------------ branches ----


@dataclass
class Branch:
    pauli: PauliString
    weight: complex
    position: int = 0


def expand_pauli(branch: Branch, ptm: np.ndarray, qubit_positions: Sequence[int], atol: float = 1e-8) -> list[Branch]:
    """Children of ``branch`` after one gate with transfer matrix ``ptm``.

    The local word ``b`` is read from the branch's digits at
    ``qubit_positions`` (first position most significant); one child is
    emitted per row ``a`` with ``|ptm[a, b]| >= atol``, in ascending ``a``.
    """
    k = len(qubit_positions)
    if ptm.shape != (4**k, 4**k):
        raise ValueError("PTM arity does not match the number of qubit positions")
    digits = list(branch.pauli.digits)
    b = 0
    for p in qubit_positions:
        b = 4 * b + digits[p]
    out = []
    for a in np.nonzero(np.abs(ptm[:, b]) >= atol)[0]:
        child = list(digits)
        for j, p in enumerate(qubit_positions):
            child[p] = (int(a) >> (2 * (k - 1 - j))) & 3
        out.append(Branch(PauliString(tuple(child)), branch.weight * ptm[a, b], branch.position + 1))
    return out


# -------------------------------------------------------------- kernel ----


@njit(cache=True, nogil=True)
def _ht_slot(keys, code):
    mask = keys.shape[0] - 1
    h = (code ^ (code >> 29)) * 2654435761
    i = h & mask
    while keys[i] != -1 and keys[i] != code:
        i = (i + 1) & mask
    return i


@njit(cache=True, nogil=True)
def _ht_add(keys, vals, count, code, w):
    """Add ``w`` to entry ``code``; returns (keys, vals, count), growing when half full."""
    i = _ht_slot(keys, code)
    if keys[i] == -1:
        keys[i] = code
        vals[i] = w
        count += 1
        if 2 * count > keys.shape[0]:
            new_keys = np.full(2 * keys.shape[0], -1, dtype=np.int64)
            new_vals = np.zeros(2 * keys.shape[0], dtype=np.complex128)
            for j in range(keys.shape[0]):
                if keys[j] != -1:
                    s = _ht_slot(new_keys, keys[j])
                    new_keys[s] = keys[j]
                    new_vals[s] = vals[j]
            keys, vals = new_keys, new_vals
    else:
        vals[i] += w
    return keys, vals, count


@njit(cache=True, nogil=True)
def _dfs(n, codes0, weights0, pos0, g_k, g_pos, g_ptr, indptr, rows, vals, max_branches):
    """Depth-first expansion of the initial branches through gates ``pos..G-1``.

    Returns ``(keys, values, count, explored, overflow)``; the hash table may
    contain empty (-1) slots.
    """
    n_gates = g_k.shape[0]
    max_children = 1
    for g in range(n_gates):
        base = g_ptr[g]
        for b in range(4 ** g_k[g]):
            c = indptr[base + b + 1] - indptr[base + b]
            if c > max_children:
                max_children = c
    cap = codes0.shape[0] + (n_gates + 1) * max_children
    st_code = np.empty(cap, dtype=np.int64)
    st_w = np.empty(cap, dtype=np.complex128)
    st_pos = np.empty(cap, dtype=np.int64)
    top = 0
    for i in range(codes0.shape[0] - 1, -1, -1):
        st_code[top] = codes0[i]
        st_w[top] = weights0[i]
        st_pos[top] = pos0[i]
        top += 1

    keys = np.full(64, -1, dtype=np.int64)
    tvals = np.zeros(64, dtype=np.complex128)
    count = 0
    explored = 0
    while top > 0:
        top -= 1
        code = st_code[top]
        w = st_w[top]
        g = st_pos[top]
        if g == n_gates:
            keys, tvals, count = _ht_add(keys, tvals, count, code, w)
            continue
        k = g_k[g]
        b = 0
        cleared = code
        for j in range(k):
            s = 2 * (n - 1 - g_pos[g, j])
            b = 4 * b + ((code >> s) & 3)
            cleared &= ~(np.int64(3) << s)
        base = g_ptr[g]
        lo = indptr[base + b]
        hi = indptr[base + b + 1]
        explored += hi - lo
        if explored > max_branches:
            return keys, tvals, count, explored, True
        # push in descending order so that ascending rows are popped first
        for t in range(hi - 1, lo - 1, -1):
            a = rows[t]
            child = cleared
            for j in range(k):
                s = 2 * (n - 1 - g_pos[g, j])
                child |= np.int64((a >> (2 * (k - 1 - j))) & 3) << s
            st_code[top] = child
            st_w[top] = w * vals[t]
            st_pos[top] = g + 1
            top += 1
    return keys, tvals, count, explored, False


# ----------------------------------------------------------- compiling ----


@dataclass
class _Program:
    n: int
    g_k: np.ndarray
    g_pos: np.ndarray
    g_ptr: np.ndarray
    indptr: np.ndarray
    rows: np.ndarray
    vals: np.ndarray
    n_fused: int


def _fingerprint(m: np.ndarray) -> bytes:
    q = np.round(np.concatenate([m.real.ravel(), m.imag.ravel()]) * 1e12).astype(np.int64)
    return m.shape[0].to_bytes(4, "little") + q.tobytes()


def _compile(circuit, qubits, compress_level, atol, cache):
    pos = {q: i for i, q in enumerate(qubits)}
    gates = list(circuit)
    for g in gates:
        if not (g.is_matrix_gate or is_superoperator(g)):
            raise NonUnitaryGate(f"{g!r} has no matrix or channel representation")
    if compress_level > 0:
        widest = max((len(g.qubits) for g in gates if not is_superoperator(g)), default=1)
        groups = compress(gates, max(compress_level, widest))
    else:
        groups = [[g] for g in gates]

    g_k, g_pos, cols = [], [], []
    for grp in groups:
        if len(grp) == 1 and is_superoperator(grp[0]):
            ch = grp[0]
            gq = list(ch.qubits)
            T = channel_transfer(ch, atol=0)
        else:
            gq = sort_qubits({q for g in grp for q in g.qubits})
            m = circuit_matrix(grp, gq)
            key = _fingerprint(m)
            if key not in cache:
                if not np.allclose(m.conj().T @ m, np.eye(len(m)), atol=1e-8):
                    raise NonUnitaryGate(f"Fused gate on {gq} is not unitary")
                cache[key] = pauli_transfer(m, check=False, atol=0)
            T = cache[key]
        g_k.append(len(gq))
        g_pos.append([pos[q] for q in gq])
        cols.append(T)

    kmax = max(g_k, default=1)
    pos_arr = np.zeros((len(g_k), kmax), dtype=np.int64)
    for i, p in enumerate(g_pos):
        pos_arr[i, : len(p)] = p
    g_ptr, indptr, rows, vals = [], [0], [], []
    for T in cols:
        g_ptr.append(len(indptr) - 1)
        for b in range(T.shape[1]):
            nz = np.nonzero(np.abs(T[:, b]) >= atol)[0]
            rows.extend(nz.tolist())
            vals.extend(T[nz, b].tolist())
            indptr.append(len(rows))
    return _Program(
        n=len(qubits),
        g_k=np.asarray(g_k, dtype=np.int64),
        g_pos=pos_arr,
        g_ptr=np.asarray(g_ptr, dtype=np.int64),
        indptr=np.asarray(indptr, dtype=np.int64),
        rows=np.asarray(rows, dtype=np.int64),
        vals=np.asarray(vals, dtype=np.complex128),
        n_fused=len(groups),
    )


def _children(prog: _Program, code: int, w: complex, g: int):
    n, k = prog.n, int(prog.g_k[g])
    shifts = [2 * (n - 1 - int(p)) for p in prog.g_pos[g, :k]]
    b = 0
    cleared = int(code)
    for s in shifts:
        b = 4 * b + ((int(code) >> s) & 3)
        cleared &= ~(3 << s)
    base = int(prog.g_ptr[g])
    lo, hi = int(prog.indptr[base + b]), int(prog.indptr[base + b + 1])
    out = []
    for t in range(lo, hi):
        a = int(prog.rows[t])
        child = cleared
        for j, s in enumerate(shifts):
            child |= ((a >> (2 * (k - 1 - j))) & 3) << s
        out.append((child, w * prog.vals[t]))
    return out


# ------------------------------------------------------------- results ----


@dataclass
class ExpansionResult:
    """Pauli expansion ``sum_P w_P P`` of the evolved operator."""

    terms: dict
    qubits: list
    stats: dict = field(default_factory=dict)

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def to_dict(self) -> dict:
        return {
            "terms": {p: [float(w.real), float(w.imag)] for p, w in self.terms.items()},
            "info": {
                "n_explored_branches": int(self.stats.get("n_explored_branches", 0)),
                "runtime (s)": float(self.stats.get("runtime_s", 0.0)),
            },
        }

    @classmethod
    def from_json(cls, text: str, qubits=None) -> "ExpansionResult":
        d = json.loads(text)
        terms = {p: complex(*w) for p, w in d["terms"].items()}
        n = len(next(iter(terms))) if terms else 0
        info = d.get("info", {})
        stats = {"n_explored_branches": info.get("n_explored_branches", 0), "runtime_s": info.get("runtime (s)", 0.0)}
        return cls(terms, list(qubits) if qubits is not None else list(range(n)), stats)


def _initial_terms(initial, qubits) -> dict:
    """Normalise the accepted initial operator formats to ``{code: weight}``."""
    n = len(qubits)
    if isinstance(initial, PauliString):
        initial = str(initial)
    if isinstance(initial, str):
        if len(initial) != n:
            raise BadPauli(f"Pauli string '{initial}' does not match {n} qubits")
        return {_str_to_code(initial): 1.0 + 0j}
    if isinstance(initial, Mapping):
        vals = list(initial.values())
        if vals and all(isinstance(v, str) for v in vals):
            pos = {q: i for i, q in enumerate(qubits)}
            digits = ["I"] * n
            for q, p in initial.items():
                if q not in pos:
                    raise BadPauli(f"Unknown qubit {q!r}")
                digits[pos[q]] = p
            return {_str_to_code("".join(digits)): 1.0 + 0j}
        out = {}
        for p, w in initial.items():
            if len(p) != n:
                raise BadPauli(f"Pauli string '{p}' does not match {n} qubits")
            code = _str_to_code(p)
            out[code] = out.get(code, 0) + complex(w)
        return out
    raise BadPauli(f"Unsupported initial operator {initial!r}")


def simulate_clifford(
    circuit: Sequence[BaseGate],
    initial_paulis,
    compress_level: int = 4,
    atol: float = 1e-8,
    parallel: bool = False,
    *,
    qubits: Sequence | None = None,
    max_branches: int = 10**9,
    threads: int | None = None,
) -> ExpansionResult:
    """Evolve ``P -> U P U^dagger`` and return its Pauli expansion.

    Parameters
    ----------
    circuit
        Unitary gates (or channels, which are applied through their PTM).
    initial_paulis
        A Pauli string over ``qubits`` (``'XZI'``), a ``{qubit: 'X'}``
        mapping, or a weighted sum ``{'XZI': 0.5, 'III': 0.5}``.
    compress_level
        Maximum width of the fused gates; ``0`` disables fusion.
    atol
        PTM entries below this magnitude are dropped; controls branching.
    parallel
        Seed a breadth-first frontier and expand it on a thread pool.
    max_branches
        Abort with :class:`BranchLimitExceeded` beyond this many branches.
    """
    t0 = time.perf_counter()
    if qubits is None:
        qubits = sort_qubits({q for g in circuit for q in g.qubits})
    qubits = list(qubits)
    n = len(qubits)
    if n > MAX_PAULI_QUBITS:
        raise TooManyQubits(f"{n} qubits exceeds the Pauli-expansion limit of {MAX_PAULI_QUBITS}")
    init = _initial_terms(initial_paulis, qubits)
    prog = _compile(circuit, qubits, int(compress_level), atol, _PTM_CACHE)

    codes = np.fromiter(init.keys(), dtype=np.int64, count=len(init))
    weights = np.fromiter(init.values(), dtype=np.complex128, count=len(init))
    explored = 0
    if parallel:
        from .statevector import num_threads

        workers = num_threads(threads)
        frontier = [(int(c), complex(w), 0) for c, w in zip(codes, weights)]
        done = []
        while frontier and len(frontier) < 4 * workers:
            nxt = []
            for c, w, g in frontier:
                if g == len(prog.g_k):
                    done.append((c, w, g))
                    continue
                kids = _children(prog, c, w, g)
                explored += len(kids)
                nxt.extend((kc, kw, g + 1) for kc, kw in kids)
            if explored > max_branches:
                raise BranchLimitExceeded(f"More than {max_branches} branches")
            frontier = nxt
        frontier = frontier + done
        chunks = [frontier[i::workers] for i in range(workers)]
        chunks = [c for c in chunks if c]

        def run(chunk):
            return _dfs(
                n,
                np.array([c for c, _, _ in chunk], dtype=np.int64),
                np.array([w for _, w, _ in chunk], dtype=np.complex128),
                np.array([g for _, _, g in chunk], dtype=np.int64),
                prog.g_k, prog.g_pos, prog.g_ptr, prog.indptr, prog.rows, prog.vals,
                max_branches - explored,
            )

        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [
            _dfs(n, codes, weights, np.zeros(len(codes), dtype=np.int64),
                 prog.g_k, prog.g_pos, prog.g_ptr, prog.indptr, prog.rows, prog.vals, max_branches)
        ]

    acc: dict[int, complex] = {}
    for keys, vals, _, exp, overflow in parts:
        explored += int(exp)
        if overflow or explored > max_branches:
            raise BranchLimitExceeded(f"More than {max_branches} branches")
        sel = keys != -1
        for c, w in zip(keys[sel].tolist(), vals[sel].tolist()):
            acc[c] = acc.get(c, 0) + w
    terms = {_code_to_str(c, n): acc[c] for c in sorted(acc) if abs(acc[c]) >= atol}
    stats = {
        "n_explored_branches": explored,
        "runtime_s": time.perf_counter() - t0,
        "n_fused_gates": prog.n_fused,
        "n_terms": len(terms),
    }
    return ExpansionResult(terms, qubits, stats)


_PTM_CACHE: dict = {}


def reconstruct_density(result: ExpansionResult, max_qubits: int = 10) -> np.ndarray:
    """Dense ``sum_P w_P P`` of an expansion result."""
    n = result.n_qubits
    if n > max_qubits:
        raise TooManyQubits(f"{n} qubits exceeds the reconstruction cap of {max_qubits}")
    out = np.zeros((2**n, 2**n), dtype=complex)
    for p, w in result.terms.items():
        out += w * PauliString.from_str(p).matrix()
    return out


_TOKEN_EXPECT = {
    "0": {"Z": 1.0},
    "1": {"Z": -1.0},
    "+": {"X": 1.0},
    "-": {"X": -1.0},
}


def expectation_on_tokens(result: ExpansionResult, tokens: str) -> complex:
    """``<psi| sum_P w_P P |psi>`` for a product state given by ``'0'``, ``'1'``, ``'+'``, ``'-'`` tokens."""
    if len(tokens) == 1:
        tokens = tokens * result.n_qubits
    if len(tokens) != result.n_qubits:
        raise ValueError(f"Need {result.n_qubits} tokens, got {len(tokens)}")
    total = 0j
    for p, w in result.terms.items():
        v = w
        for c, t in zip(p, tokens):
            if c == "I":
                continue
            if t not in _TOKEN_EXPECT:
                raise ValueError(f"Token '{t}' is not a product-state token")
            v *= _TOKEN_EXPECT[t].get(c, 0.0)
            if v == 0:
                break
        total += v
    return total
