"""Tensor-network simulation: build, plan (with slicing) and contract.

Circuits become networks of rank-``2k`` gate tensors plus rank-1 boundary
tensors. Token ``.`` leaves a terminal index open; a letter used on two or
more terminals joins them through a Kronecker delta (a hyper-index shared by
every tensor touching it), which is how partial traces are taken.

Planning is greedy pairwise contraction with randomised restarts. When the
largest intermediate exceeds ``max_largest_intermediate`` entries, indices
are sliced (fixed to 0/1 and summed over) until it fits.
"""

from __future__ import annotations

import heapq
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import Circuit, SuperCircuit
from .errors import BadToken, CapTooSmall, LetterUsedOnce, MethodUnsupportedForInput, NonFiniteResult
from .gates import BaseGate, is_superoperator
from .statevector import _TOKENS, num_threads

__all__ = [
    "Tensor",
    "TensorNetwork",
    "ContractionPlan",
    "build_network",
    "plan_contraction",
    "contract",
    "simulate_tn",
]

DEFAULT_MAX_LARGEST_INTERMEDIATE = 2**28


@dataclass
class Tensor:
    data: np.ndarray
    indices: tuple

    def __post_init__(self):
        self.indices = tuple(self.indices)
        if len(set(self.indices)) != len(self.indices):
            raise ValueError(f"Repeated index in tensor: {self.indices}")
        if self.data.ndim != len(self.indices):
            raise ValueError("Tensor rank does not match its number of indices")


@dataclass
class TensorNetwork:
    tensors: list[Tensor]
    open_indices: list
    hyper_groups: dict = field(default_factory=dict)  # label -> original terminal indices

    def index_count(self) -> dict:
        count: dict = {}
        for t in self.tensors:
            for i in t.indices:
                count[i] = count.get(i, 0) + 1
        return count


@dataclass
class ContractionPlan:
    path: list  # SSA pairs; leaves are 0..n_leaves-1, each contraction appends a new id
    sliced_indices: frozenset
    est_flops: float
    largest_intermediate: int
    n_leaves: int

    @property
    def n_slices(self) -> int:
        return 2 ** len(self.sliced_indices)


# ----------------------------------------------------------------- build ----

_LETTERS = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")


def _check_tokens(tokens: str, n: int, which: str) -> str:
    if len(tokens) == 1 and n != 1:
        tokens = tokens * n
    if len(tokens) != n:
        raise BadToken(f"{which} state needs {n} tokens, got {len(tokens)} ('{tokens}')")
    bad = set(tokens) - set(_TOKENS) - _LETTERS - {"."}
    if bad:
        raise BadToken(f"Invalid {which} tokens: {sorted(bad)}")
    return tokens


def build_network(
    circuit: Sequence[BaseGate], initial_tokens: str, final_tokens: str, qubits: Sequence | None = None
) -> TensorNetwork:
    """Tensor network for ``<final| circuit |initial>``.

    Tokens are one character per qubit (``qubits`` order, default sorted
    circuit qubits): ``0 1 + -`` fix the terminal, ``.`` leaves it open and
    letters join every terminal sharing that letter (initial and final
    tokens share the same letter namespace). Open indices are ordered final
    terminals first, then initial ones, each in qubit order.
    """
    circuit = list(circuit)
    order = list(qubits) if qubits is not None else Circuit(circuit).all_qubits()
    n = len(order)
    initial_tokens = _check_tokens(initial_tokens, n, "initial")
    final_tokens = _check_tokens(final_tokens, n, "final")
    counter = itertools.count()
    wire = {q: next(counter) for q in order}
    tensors: list[Tensor] = []
    open_in, open_out = [], []
    letters: dict[str, list] = {}

    def terminal(tok, label, conj, open_list):
        if tok in _TOKENS:
            v = _TOKENS[tok]
            tensors.append(Tensor(v.conj() if conj else v.copy(), (label,)))
        elif tok == ".":
            open_list.append(label)
        else:
            letters.setdefault(tok, []).append(label)

    for q, tok in zip(order, initial_tokens):
        terminal(tok, wire[q], False, open_in)
    for g in circuit:
        if is_superoperator(g) or not g.is_matrix_gate:
            raise MethodUnsupportedForInput(f"{g!r} cannot be represented as a tensor")
        k = len(g.qubits)
        outs = [next(counter) for _ in range(k)]
        ins = [wire[q] for q in g.qubits]
        tensors.append(Tensor(np.asarray(g.matrix(), dtype=complex).reshape((2,) * (2 * k)), outs + ins))
        for q, o in zip(g.qubits, outs):
            wire[q] = o
    for q, tok in zip(order, final_tokens):
        terminal(tok, wire[q], True, open_out)

    hyper = {}
    rename = {}
    for letter, labels in sorted(letters.items()):
        if len(labels) == 1:
            raise LetterUsedOnce(f"Letter '{letter}' is used only once")
        h = ("delta", letter)
        hyper[h] = tuple(labels)
        for lab in labels:
            rename[lab] = h
    if rename:
        tensors = [_rename(t, rename) for t in tensors]
        present = {i for t in tensors for i in t.indices}
        for h in hyper:
            if h not in present:
                # delta over wires touching no tensor: a bare trace of identity
                tensors.append(Tensor(np.array(2.0 + 0j), ()))
    return TensorNetwork(tensors, open_out + open_in, hyper)


def _rename(t: Tensor, rename: dict) -> Tensor:
    idx = [rename.get(i, i) for i in t.indices]
    if len(set(idx)) == len(idx):
        return Tensor(t.data, tuple(idx))
    uniq = list(dict.fromkeys(idx))
    sub = [uniq.index(i) for i in idx]
    return Tensor(np.einsum(t.data, sub, list(range(len(uniq)))), tuple(uniq))


# ------------------------------------------------------------------ plan ----


def _size(indices, sliced) -> int:
    return 2 ** sum(1 for i in indices if i not in sliced)


def _greedy(leaves, open_set, sliced, rng, temperature):
    """One greedy pass. Returns (path, flops, largest intermediate)."""
    tensors = {i: frozenset(ix) for i, ix in enumerate(leaves)}
    where: dict = {}
    for tid, ix in tensors.items():
        for i in ix:
            where.setdefault(i, set()).add(tid)

    def result_of(a, b):
        ia, ib = tensors[a], tensors[b]
        keep = set()
        for i in ia | ib:
            if i in open_set or len(where[i] - {a, b}) > 0:
                keep.add(i)
        return frozenset(keep)

    def score(a, b):
        r = result_of(a, b)
        sa, sb, sr = _size(tensors[a], sliced), _size(tensors[b], sliced), _size(r, sliced)
        s = sr - sa - sb
        if temperature > 0:
            s -= temperature * (sa + sb) * rng.gumbel()
        return (s, min(a, b), max(a, b))

    heap = []
    seen = set()
    for i, ts in where.items():
        for a, b in itertools.combinations(sorted(ts), 2):
            if (a, b) not in seen:
                seen.add((a, b))
                heapq.heappush(heap, score(a, b))
    path = []
    flops = 0.0
    largest = max((_size(ix, sliced) for ix in tensors.values()), default=1)
    nxt = len(leaves)
    while len(tensors) > 1:
        pair = None
        while heap:
            _, a, b = heapq.heappop(heap)
            if a in tensors and b in tensors:
                pair = (a, b)
                break
        if pair is None:
            # disconnected components: outer product of the two smallest
            a, b = sorted(tensors, key=lambda t: (_size(tensors[t], sliced), t))[:2]
            pair = (min(a, b), max(a, b))
        a, b = pair
        r = result_of(a, b)
        flops += _size(tensors[a] | tensors[b], sliced)
        for i in tensors[a] | tensors[b]:
            where[i] -= {a, b}
        del tensors[a], tensors[b]
        tensors[nxt] = r
        for i in r:
            where[i].add(nxt)
        sz = _size(r, sliced)
        largest = max(largest, sz)
        path.append(pair)
        for i in r:
            for other in where[i]:
                if other != nxt:
                    heapq.heappush(heap, score(min(other, nxt), max(other, nxt)))
        nxt += 1
    return path, flops, largest


def _replay(leaves, open_set, path):
    """Index sets of every intermediate produced by ``path``."""
    tensors = {i: frozenset(ix) for i, ix in enumerate(leaves)}
    count: dict = {}
    for ix in tensors.values():
        for i in ix:
            count[i] = count.get(i, 0) + 1
    out = []
    nxt = len(leaves)
    for a, b in path:
        ia, ib = tensors.pop(a), tensors.pop(b)
        for i in ia:
            count[i] -= 1
        for i in ib:
            count[i] -= 1
        r = frozenset(i for i in ia | ib if i in open_set or count[i] > 0)
        for i in r:
            count[i] += 1
        tensors[nxt] = r
        out.append((ia, ib, r))
        nxt += 1
    return out


def _best_path(leaves, open_set, sliced, seed, n_trials):
    best = None
    for trial in range(max(1, n_trials)):
        rng = np.random.default_rng([seed, trial])
        path, flops, largest = _greedy(leaves, open_set, sliced, rng, 0.0 if trial == 0 else 0.5)
        key = (flops, largest, trial)
        if best is None or key < best[0]:
            best = (key, path, flops, largest)
    return best[1], best[2], best[3]


def plan_contraction(
    network: TensorNetwork,
    max_largest_intermediate: int = DEFAULT_MAX_LARGEST_INTERMEDIATE,
    seed: int = 0,
    n_trials: int = 8,
    min_slices: int = 0,
) -> ContractionPlan:
    """Find a pairwise contraction order whose intermediates fit in the cap.

    The cheapest (estimated flops) of ``n_trials`` greedy passes is kept; the
    first pass is deterministic, later ones add Gumbel noise to the scores.
    While the largest intermediate exceeds ``max_largest_intermediate``
    entries, the non-open index shared by the most oversized tensors is
    sliced and the path is recomputed. ``min_slices`` forces at least that
    many sliced indices.
    """
    leaves = [t.indices for t in network.tensors]
    open_set = frozenset(network.open_indices)
    for ix in leaves:
        if 2 ** len(ix) > max_largest_intermediate:
            raise CapTooSmall(f"A tensor of rank {len(ix)} exceeds the cap of {max_largest_intermediate}")
    sliced: set = set()
    while True:
        path, flops, largest = _best_path(leaves, open_set, sliced, seed, n_trials)
        if largest <= max_largest_intermediate and len(sliced) >= min_slices:
            break
        # over the cap: count oversized tensors; only forcing slices: weight every tensor by size
        over = largest > max_largest_intermediate
        tensors = leaves + [r for _, _, r in _replay(leaves, open_set, path)]
        freq: dict = {}
        for ix in tensors:
            size = _size(ix, sliced)
            if over and size <= max_largest_intermediate:
                continue
            for i in ix:
                if i not in open_set and i not in sliced:
                    freq[i] = freq.get(i, 0) + (1 if over else size)
        if not freq:
            raise CapTooSmall(
                f"Cannot reach largest intermediate <= {max_largest_intermediate} with "
                f"{max(min_slices, len(sliced) + 1)} sliced indices (open indices cannot be sliced)"
            )
        sliced.add(min(freq, key=lambda i: (-freq[i], repr(i))))
    return ContractionPlan(path, frozenset(sliced), float(flops) * 2 ** len(sliced), int(largest), len(leaves))


# -------------------------------------------------------------- contract ----


def _pair(a, ia, b, ib, out):
    """Contract two tensors; indices in both and in ``out`` are batch (hyper) indices."""
    sa, sb, so = set(ia), set(ib), set(out)
    # sum indices private to one operand and absent from the output first
    drop_a = [k for k, i in enumerate(ia) if i not in sb and i not in so]
    if drop_a:
        a = a.sum(axis=tuple(drop_a))
        ia = [i for i in ia if i in sb or i in so]
    drop_b = [k for k, i in enumerate(ib) if i not in sa and i not in so]
    if drop_b:
        b = b.sum(axis=tuple(drop_b))
        ib = [i for i in ib if i in sa or i in so]
    sa, sb = set(ia), set(ib)
    batch = [i for i in ia if i in sb and i in so]
    summed = [i for i in ia if i in sb and i not in so]
    free_a = [i for i in ia if i not in sb]
    free_b = [i for i in ib if i not in sa]
    a = np.transpose(a, [ia.index(i) for i in batch + free_a + summed])
    b = np.transpose(b, [ib.index(i) for i in batch + summed + free_b])
    nb, nfa, ns, nfb = 2 ** len(batch), 2 ** len(free_a), 2 ** len(summed), 2 ** len(free_b)
    r = np.matmul(a.reshape(nb, nfa, ns), b.reshape(nb, ns, nfb))
    res_ix = batch + free_a + free_b
    r = r.reshape((2,) * len(res_ix))
    return np.transpose(r, [res_ix.index(i) for i in out])


def _contract_slice(network, plan, steps, assignment):
    fixed = dict(zip(sorted(plan.sliced_indices, key=repr), assignment))
    arrays = {}
    for k, t in enumerate(network.tensors):
        data, ix = t.data, list(t.indices)
        sel = [fixed[i] if i in fixed else slice(None) for i in ix]
        if fixed and any(i in fixed for i in ix):
            data = data[tuple(sel)]
            ix = [i for i in ix if i not in fixed]
        arrays[k] = (data, ix)
    nxt = plan.n_leaves
    for (a, b), (_, _, r) in zip(plan.path, steps):
        da, ia = arrays.pop(a)
        db, ib = arrays.pop(b)
        out = [i for i in ia + [j for j in ib if j not in ia] if i in r and i not in fixed]
        arrays[nxt] = (_pair(da, ia, db, ib, out), out)
        nxt += 1
    (data, ix), = arrays.values()
    opened = list(network.open_indices)
    extra = [k for k, i in enumerate(ix) if i not in opened]
    if extra:
        data = data.sum(axis=tuple(extra))
        ix = [i for i in ix if i in opened]
    return np.transpose(data, [ix.index(i) for i in opened]) if opened else data


def _tree_sum(parts):
    parts = list(parts)
    while len(parts) > 1:
        parts = [parts[i] + parts[i + 1] if i + 1 < len(parts) else parts[i] for i in range(0, len(parts), 2)]
    return parts[0]


def contract(network: TensorNetwork, plan: ContractionPlan, parallel: bool = False, threads: int | None = None) -> Tensor:
    """Contract ``network`` along ``plan``; returns a tensor over the open indices."""
    if plan.n_leaves != len(network.tensors):
        raise ValueError("Plan was produced for a different network")
    steps = _replay([t.indices for t in network.tensors], frozenset(network.open_indices), plan.path)
    assignments = list(itertools.product((0, 1), repeat=len(plan.sliced_indices)))
    workers = num_threads(threads) if parallel else 1
    if workers > 1 and len(assignments) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda s: _contract_slice(network, plan, steps, s), assignments))
    else:
        parts = [_contract_slice(network, plan, steps, s) for s in assignments]
    data = np.asarray(_tree_sum(parts))
    if not np.all(np.isfinite(data)):
        raise NonFiniteResult("Contraction produced non-finite values")
    return Tensor(data, tuple(network.open_indices))


def simulate_tn(
    circuit: Sequence[BaseGate],
    initial: str = "0",
    final: str | None = None,
    *,
    qubits: Sequence | None = None,
    max_largest_intermediate: int = DEFAULT_MAX_LARGEST_INTERMEDIATE,
    n_trials: int = 8,
    seed: int = 0,
    parallel: bool = False,
    threads: int | None = None,
    min_slices: int = 0,
    return_info: bool = False,
):
    """Simulate by tensor contraction; returns an array over the open indices.

    Circuits containing superoperator gates are first doubled (see
    :func:`circsim.noise.to_doubled_circuit`); tokens then cover the ``n``
    row qubits followed by the ``n`` column qubits (an ``n``-token string is
    used for both halves). ``final`` defaults to
    all-open, giving the full output state (or density matrix).
    """
    if isinstance(circuit, SuperCircuit) or any(is_superoperator(g) for g in circuit):
        from .noise import to_doubled_circuit

        n = len(qubits) if qubits is not None else len(SuperCircuit(circuit).all_qubits())
        circuit, qubits = to_doubled_circuit(circuit, qubits)
        # n-token strings describe a product state and are repeated for the columns
        if n > 1 and len(initial) == n:
            initial = initial * 2
        if final is not None and n > 1 and len(final) == n:
            final = final * 2
    circuit = list(circuit)
    order = list(qubits) if qubits is not None else Circuit(circuit).all_qubits()
    if final is None:
        final = "." * len(order)
    net = build_network(circuit, initial, final, order)
    plan = plan_contraction(net, max_largest_intermediate, seed=seed, n_trials=n_trials, min_slices=min_slices)
    out = contract(net, plan, parallel=parallel, threads=threads).data
    if return_info:
        return out, {"plan": plan, "network": net, "qubits": order}
    return out
