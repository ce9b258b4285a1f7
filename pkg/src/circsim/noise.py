"""Noise channels, doubling of superoperator circuits and trajectory sampling.

Channels are :class:`~circsim.gates.KrausSuperGate` specialisations. A
density matrix ``rho`` over qubits ``Q`` is handled as a pure state over the
doubled register ``[(q, 'row') for q in Q] + [(q, 'col') for q in Q]``,
i.e. ``vec(rho)`` in row-major order. In that picture ``L rho R^dagger``
becomes the matrix ``L (x) conj(R)``, so any backend able to evolve states
can evolve density matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import Circuit, SuperCircuit
from .errors import (
    MethodUnsupportedForInput,
    NotKrausForm,
    ParamOutOfRange,
    ZeroNormBranch,
)
from .gates import (
    PAULI,
    BaseGate,
    FunctionalGate,
    KrausSuperGate,
    MatrixGate,
    MatrixSuperGate,
    Measure,
    StochasticGate,
    is_superoperator,
)
from .linalg import embed, kron, sort_qubits

__all__ = [
    "GlobalPauliChannel",
    "LocalPauliChannel",
    "GlobalDepolarizingChannel",
    "LocalDepolarizingChannel",
    "DephasingChannel",
    "AmplitudeDampingChannel",
    "kraus_ops",
    "kraus_form",
    "validate_cptp",
    "apply_channel",
    "to_doubled_gate",
    "to_doubled_circuit",
    "row",
    "col",
    "add_depolarizing_noise",
    "attach_noise",
    "simulate_density_matrix",
    "sample_trajectories",
    "TrajectoryResult",
]


def row(q):
    return (q, "row")


def col(q):
    return (q, "col")


def _pauli_basis(n: int) -> list[np.ndarray]:
    """All 4^n Pauli strings; qubit 0 is the most significant base-4 digit."""
    basis = [np.ones((1, 1), dtype=complex)]
    for _ in range(n):
        basis = [np.kron(b, PAULI[p]) for b in basis for p in "IXYZ"]
    return basis


def _check_prob(p, name="p"):
    p = float(p)
    if not 0 <= p <= 1:
        raise ParamOutOfRange(f"{name}={p} must lie in [0, 1]")
    return p


def _drop_zero_terms(ops, s, atol=0.0):
    """Drop diagonal terms with zero weight (only for diagonal ``s``)."""
    if np.count_nonzero(s - np.diag(np.diag(s))):
        return ops, s
    keep = [i for i in range(len(ops)) if abs(s[i, i]) > atol]
    return [ops[i] for i in keep], np.diag(np.diag(s)[keep])


class _Channel(KrausSuperGate):
    """A Kraus channel built from dense operators on ``qubits``."""

    def __init__(self, qubits, ops, s, right_ops=None, tags=None):
        qubits = tuple(qubits)
        left = [MatrixGate(m, qubits) for m in ops]
        right = None if right_ops is None else [MatrixGate(m, qubits) for m in right_ops]
        super().__init__(left, right, s, qubits=qubits, tags=tags)


class GlobalPauliChannel(_Channel):
    """``rho -> sum_ij s_ij P_i rho P_j`` over all Pauli strings ``P`` on ``qubits``."""

    name = "GLOBAL_PAULI"

    def __init__(self, qubits, s, tags=None):
        n = len(tuple(qubits))
        s = np.asarray(s, dtype=complex)
        if s.ndim == 1:
            s = np.diag(s)
        if s.shape != (4**n, 4**n):
            raise ValueError(f"s must have shape ({4**n}, {4**n})")
        ops, s = _drop_zero_terms(_pauli_basis(n), s)
        super().__init__(qubits, ops, s, tags=tags)


class GlobalDepolarizingChannel(_Channel):
    """``rho -> (1 - p) rho + p I / d`` acting jointly on ``qubits``."""

    name = "GLOBAL_DEPOLARIZING"

    def __init__(self, qubits, p, tags=None):
        n = len(tuple(qubits))
        self_p = _check_prob(p)
        w = np.full(4**n, self_p / 4**n)
        w[0] += 1 - self_p
        ops, s = _drop_zero_terms(_pauli_basis(n), np.diag(w).astype(complex))
        super().__init__(qubits, ops, s, tags=tags)
        object.__setattr__(self, "p", self_p)


class _LocalChannel(_Channel):
    """Independent single-qubit channels, one per qubit."""

    def __init__(self, channels, tags=None):
        qubits = tuple(q for c in channels for q in c.qubits)
        ops, s = [np.ones((1, 1), dtype=complex)], np.ones((1, 1), dtype=complex)
        for c in channels:
            L = [g.matrix() for g in c.left]
            ops = [np.kron(a, b) for a in ops for b in L]
            s = np.kron(s, c.s)
        super().__init__(qubits, ops, s, tags=tags)


def _per_qubit(qubits, value):
    qubits = tuple(qubits)
    if np.ndim(value) == 0:
        return [value] * len(qubits)
    value = list(value)
    if len(value) != len(qubits):
        raise ValueError("Need one parameter per qubit or a single shared value")
    return value


class LocalDepolarizingChannel(_LocalChannel):
    """Single-qubit depolarizing noise applied independently to each qubit."""

    name = "LOCAL_DEPOLARIZING"

    def __init__(self, qubits, p, tags=None):
        chans = [GlobalDepolarizingChannel([q], pq) for q, pq in zip(qubits, _per_qubit(qubits, p))]
        super().__init__(chans, tags)


class LocalPauliChannel(_LocalChannel):
    """Single-qubit Pauli channels (``s`` is 4x4, or length-4 diagonal) on each qubit."""

    name = "LOCAL_PAULI"

    def __init__(self, qubits, s, tags=None):
        qubits = tuple(qubits)
        s = np.asarray(s, dtype=complex)
        per = [s] * len(qubits) if s.shape in ((4,), (4, 4)) else list(s)
        if len(per) != len(qubits):
            raise ValueError("Need one Pauli weight set per qubit or a single shared one")
        chans = [GlobalPauliChannel([q], sq) for q, sq in zip(qubits, per)]
        super().__init__(chans, tags)


class DephasingChannel(_Channel):
    """``rho -> (1 - p) rho + p sigma rho sigma`` on one qubit."""

    name = "DEPHASING"

    def __init__(self, qubits, p, pauli: str = "Z", tags=None):
        qubits = tuple(qubits) if not isinstance(qubits, (int, str)) else (qubits,)
        if len(qubits) != 1:
            raise ValueError("DephasingChannel acts on a single qubit")
        p = _check_prob(p)
        pauli = pauli.upper()
        if pauli not in ("X", "Y", "Z"):
            raise ValueError("pauli must be one of X, Y, Z")
        ops, s = _drop_zero_terms([PAULI["I"], PAULI[pauli]], np.diag([1 - p, p]).astype(complex))
        super().__init__(qubits, ops, s, tags=tags)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "pauli", pauli)


class AmplitudeDampingChannel(_Channel):
    """Amplitude damping with rate ``gamma``; ``excitation_rate`` > 0 gives the generalised channel.

    Kraus weights are ``1 - excitation_rate`` on the decay pair and
    ``excitation_rate`` on the excitation pair.
    """

    name = "AMPLITUDE_DAMPING"

    def __init__(self, qubits, gamma, excitation_rate=0.0, tags=None):
        qubits = tuple(qubits) if not isinstance(qubits, (int, str)) else (qubits,)
        if len(qubits) != 1:
            raise ValueError("AmplitudeDampingChannel acts on a single qubit")
        g = _check_prob(gamma, "gamma")
        r = _check_prob(excitation_rate, "excitation_rate")
        ops = [
            np.array([[1, 0], [0, np.sqrt(1 - g)]], dtype=complex),
            np.array([[0, np.sqrt(g)], [0, 0]], dtype=complex),
            np.array([[np.sqrt(1 - g), 0], [0, 1]], dtype=complex),
            np.array([[0, 0], [np.sqrt(g), 0]], dtype=complex),
        ]
        w = np.array([1 - r, 1 - r, r, r])
        keep = [i for i in range(4) if w[i] > 0 and np.any(ops[i])]
        super().__init__(qubits, [ops[i] for i in keep], np.diag(w[keep]).astype(complex), tags=tags)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "excitation_rate", r)


# ------------------------------------------------------------ algebra ----


def _same_sides(channel) -> bool:
    return channel.right is channel.left or channel.right == channel.left


def kraus_ops(channel: KrausSuperGate):
    """Return ``(L, R, s)`` as dense matrices on ``channel.qubits``."""
    q = channel.qubits
    L = [embed(g.matrix(), g.qubits, q) for g in channel.left]
    R = L if _same_sides(channel) else [embed(g.matrix(), g.qubits, q) for g in channel.right]
    return L, R, channel.s


def apply_channel(channel, rho: np.ndarray) -> np.ndarray:
    """Dense ``sum_ij s_ij L_i rho R_j^dagger`` for ``rho`` over ``channel.qubits``."""
    if isinstance(channel, MatrixSuperGate):
        d = rho.shape[0]
        return (channel.Map @ rho.reshape(-1)).reshape(d, d)
    L, R, s = kraus_ops(channel)
    out = np.zeros_like(rho, dtype=complex)
    for i, j in zip(*np.nonzero(s)):
        out += s[i, j] * L[i] @ rho @ R[j].conj().T
    return out


def _choi(channel) -> np.ndarray:
    d = 2 ** len(channel.qubits)
    J = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[a, b] = 1
            J += np.kron(e, apply_channel(channel, e))
    return J


def kraus_form(channel, atol: float = 1e-10) -> list[np.ndarray]:
    """Proper Kraus operators ``K_m`` with ``Lambda(rho) = sum_m K_m rho K_m^dagger``.

    Uses the eigendecomposition of ``s`` when the left and right operators
    coincide, otherwise that of the Choi matrix. Raises :class:`NotKrausForm`
    when the relevant matrix is not positive semidefinite.
    """
    if isinstance(channel, KrausSuperGate) and _same_sides(channel):
        L, _, s = kraus_ops(channel)
        if not np.allclose(s, s.conj().T, atol=atol):
            raise NotKrausForm("Coefficient matrix s is not Hermitian")
        w, v = np.linalg.eigh(s)
        if w.min() < -atol:
            raise NotKrausForm(f"Coefficient matrix s is indefinite (min eigenvalue {w.min():.3g})")
        L = np.array(L)
        return [np.sqrt(wm) * np.tensordot(v[:, m], L, axes=1) for m, wm in enumerate(w) if wm > atol]
    d = 2 ** len(channel.qubits)
    w, v = np.linalg.eigh(_choi(channel))
    if w.min() < -atol:
        raise NotKrausForm(f"Map is not completely positive (min Choi eigenvalue {w.min():.3g})")
    # J = sum_ab |a><b| (x) Lambda(|a><b|); eigvec (a, i) -> K[i, a]
    return [np.sqrt(wm) * v[:, m].reshape(d, d).T for m, wm in enumerate(w) if wm > atol]


def validate_cptp(channel, atol: float = 1e-8) -> bool:
    """True iff the channel is completely positive and trace preserving."""
    ks = kraus_form(channel, atol=min(atol, 1e-10))
    d = 2 ** len(channel.qubits)
    total = sum((k.conj().T @ k for k in ks), np.zeros((d, d), dtype=complex))
    return bool(np.allclose(total, np.eye(d), atol=atol, rtol=0))


# ------------------------------------------------------------ doubling ----


def to_doubled_gate(gate: BaseGate, labels=(row, col)) -> BaseGate:
    """Matrix gate acting on vec(rho) over ``[row(q)...] + [col(q)...]``.

    Superoperators map to ``sum_ij s_ij L_i (x) conj(R_j)``; a matrix gate
    ``G`` maps to ``G (x) conj(G)``.
    """
    to_row, to_col = labels
    q = gate.qubits
    qubits = [to_row(x) for x in q] + [to_col(x) for x in q]
    if isinstance(gate, MatrixSuperGate):
        return MatrixGate(gate.Map, qubits)
    if isinstance(gate, KrausSuperGate):
        L, R, s = kraus_ops(gate)
        d = 2 ** len(q)
        m = np.zeros((d * d, d * d), dtype=complex)
        for i, j in zip(*np.nonzero(s)):
            m += s[i, j] * np.kron(L[i], R[j].conj())
        return MatrixGate(m, qubits)
    if isinstance(gate, StochasticGate):
        m = sum(p * np.kron(embed(g.matrix(), g.qubits, q), embed(g.matrix(), g.qubits, q).conj())
                for p, g in zip(gate.p, gate.gates))
        return MatrixGate(m, qubits)
    if isinstance(gate, Measure):
        d = 2 ** len(q)
        m = np.zeros((d * d, d * d), dtype=complex)
        for b in range(d):
            m[b * d + b, b * d + b] = 1
        return MatrixGate(m, qubits)
    if isinstance(gate, FunctionalGate) or not gate.is_matrix_gate:
        raise MethodUnsupportedForInput(f"{gate!r} cannot be applied to a density matrix")
    g = gate.matrix()
    return MatrixGate(np.kron(g, g.conj()), qubits)


def to_doubled_circuit(circuit: Sequence[BaseGate], qubits: Sequence | None = None, labels=(row, col)):
    """Turn a (super)circuit on ``n`` qubits into a regular circuit on ``2n`` qubits.

    Returns ``(circuit, order)`` with ``order`` the row labels followed by the
    column labels. Matrix gates are emitted as two separate gates, ``G`` on
    the rows and ``conj(G)`` on the columns; everything else goes through
    :func:`to_doubled_gate`.
    """
    to_row, to_col = labels
    if qubits is None:
        qubits = sort_qubits({q for g in circuit for q in g.qubits})
    qubits = list(qubits)
    out = Circuit()
    for g in circuit:
        if g.is_matrix_gate and not is_superoperator(g):
            m = g.matrix()
            out.append(MatrixGate(m, [to_row(x) for x in g.qubits]))
            out.append(MatrixGate(m.conj(), [to_col(x) for x in g.qubits]))
        else:
            out.append(to_doubled_gate(g, labels))
    return out, [to_row(q) for q in qubits] + [to_col(q) for q in qubits]


# ----------------------------------------------------------- attaching ----


def add_depolarizing_noise(circuit: Sequence[BaseGate], probs=(0.0, 0.0)) -> SuperCircuit:
    """Insert a global depolarizing channel on each gate's qubits after the gate.

    ``probs = (p1, p2)``: ``p1`` for one-qubit gates, ``p2`` for everything wider.
    """
    p1, p2 = (_check_prob(p) for p in probs)
    out = SuperCircuit()
    for g in circuit:
        out.append(g)
        if not is_superoperator(g):
            out.append(GlobalDepolarizingChannel(g.qubits, p1 if len(g.qubits) == 1 else p2))
    return out


def attach_noise(circuit: Sequence[BaseGate], make_channel, filter=None) -> SuperCircuit:
    """Append ``make_channel(gate)`` after every gate for which ``filter(gate)`` holds."""
    out = SuperCircuit()
    for g in circuit:
        out.append(g)
        if not is_superoperator(g) and (filter is None or filter(g)):
            ch = make_channel(g)
            if ch is not None:
                out.append(ch)
    return out


# ----------------------------------------------------------- simulation ----


def _dm_initial(initial, n):
    """Turn a density-matrix initial state into vec(rho) or a 2n token string."""
    if isinstance(initial, str):
        if len(initial) == n and n != 1:
            initial = initial * 2
        return initial
    a = np.asarray(initial, dtype=complex)
    d = 2**n
    if a.size == d:  # pure state vector
        a = np.outer(a.ravel(), a.ravel().conj())
    if a.size != d * d:
        raise ValueError(f"Initial density matrix must have {d * d} entries")
    return a.reshape(-1)


def simulate_density_matrix(
    circuit: Sequence[BaseGate],
    initial="0",
    final: str | None = None,
    method: str = "evolution",
    *,
    qubits: Sequence | None = None,
    **opts,
):
    """Simulate a (super)circuit on density matrices with any backend.

    ``method='evolution'`` returns the ``(2^n, 2^n)`` density matrix;
    ``'tn'`` returns the tensor over the open indices of ``final`` (a
    ``2n``-token string, rows then columns, e.g. ``'.ab.ab'``);
    ``'clifford'`` takes ``initial`` as a Pauli operator and returns an
    :class:`~circsim.clifford.ExpansionResult`.
    """
    if qubits is None:
        qubits = sort_qubits({q for g in circuit for q in g.qubits})
    qubits = list(qubits)
    n = len(qubits)
    if method == "clifford":
        from .clifford import simulate_clifford

        if final is not None:
            raise MethodUnsupportedForInput("final state is not supported by the clifford method")
        return simulate_clifford(circuit, initial, qubits=qubits, **opts)
    doubled, order = to_doubled_circuit(circuit, qubits)
    init = _dm_initial(initial, n)
    if method == "evolution":
        from .statevector import simulate_statevector

        if final is not None:
            raise MethodUnsupportedForInput("final state requires method='tn'")
        state = simulate_statevector(doubled, init, qubits=order, **opts)
        return state.to_array().reshape(2**n, 2**n)
    if method == "tn":
        from .tensornet import simulate_tn

        if not isinstance(init, str):
            raise MethodUnsupportedForInput("tn requires token initial states")
        if final is not None and len(final) == n and n != 1:
            final = final * 2
        return simulate_tn(doubled, init, final, qubits=order, **opts)
    raise MethodUnsupportedForInput(f"Unknown method '{method}'")


# ---------------------------------------------------------- trajectories ----


@dataclass
class TrajectoryResult:
    mean: np.ndarray | float
    sem: np.ndarray | float | None
    n_samples: int


def _apply_batch(psi, m, axes):
    """Apply ``m`` to a batch of states ``psi`` of shape (batch, 2, ..., 2)."""
    k = len(axes)
    t = np.reshape(m, (2,) * (2 * k))
    out = np.tensordot(psi, t, axes=([a + 1 for a in axes], list(range(k, 2 * k))))
    # tensordot appends the new axes at the end
    return np.moveaxis(out, list(range(out.ndim - k, out.ndim)), [a + 1 for a in axes])


def sample_trajectories(
    circuit: Sequence[BaseGate],
    initial="0",
    n_samples: int = 1000,
    rng: np.random.Generator | int | None = None,
    *,
    observable=None,
    qubits: Sequence | None = None,
) -> TrajectoryResult:
    """Unravel the channels of ``circuit`` into pure-state trajectories.

    At every channel each trajectory picks Kraus operator ``K_i`` with
    probability ``||K_i psi||^2`` and is renormalised. With ``observable``
    (a Pauli string over ``qubits``) the result holds the sample mean of
    ``<psi|P|psi>`` and its standard error; otherwise the mean projector
    ``|psi><psi|`` (an estimate of the density matrix).

    Shot ``i`` draws its random numbers from ``default_rng(seed + i)``, so
    each trajectory is reproducible on its own; the shots are then advanced
    together as one vectorised batch.
    """
    from .statevector import _as_state

    if qubits is None:
        qubits = sort_qubits({q for g in circuit for q in g.qubits})
    qubits = list(qubits)
    n = len(qubits)
    pos = {q: i for i, q in enumerate(qubits)}
    if isinstance(rng, np.random.Generator):
        seed = int(rng.integers(2**62))
    else:
        seed = 0 if rng is None else int(rng)
    n_draws = sum(1 for g in circuit if is_superoperator(g) or isinstance(g, StochasticGate))
    draws = np.empty((n_samples, n_draws))
    for i in range(n_samples):
        draws[i] = np.random.default_rng(seed + i).random(n_draws)
    k_draw = 0
    psi0 = _as_state(initial, qubits).to_array().reshape((2,) * n)
    psi = np.broadcast_to(psi0, (n_samples,) + psi0.shape).copy()
    for g in circuit:
        axes = [pos[q] for q in g.qubits]
        if is_superoperator(g):
            ks = kraus_form(g)
            branches = np.stack([_apply_batch(psi, k, axes) for k in ks])
            p = np.sum(np.abs(branches.reshape(len(ks), n_samples, -1)) ** 2, axis=2)
            tot = p.sum(axis=0)
            if np.any(tot < 1e-14):
                raise ZeroNormBranch("Every Kraus branch has zero probability")
            cdf = np.cumsum(p / tot, axis=0)
            u = draws[:, k_draw]
            k_draw += 1
            pick = np.minimum((u[None, :] > cdf).sum(axis=0), len(ks) - 1)
            psi = branches[pick, np.arange(n_samples)]
            norm = np.sqrt(p[pick, np.arange(n_samples)])
            psi /= norm.reshape((-1,) + (1,) * n)
        elif isinstance(g, StochasticGate):
            cdf = np.cumsum(g.p)
            pick = np.minimum(np.searchsorted(cdf, draws[:, k_draw], side="right"), len(g.gates) - 1)
            k_draw += 1
            new = psi.copy()
            for i, sub in enumerate(g.gates):
                sel = pick == i
                if np.any(sel):
                    new[sel] = _apply_batch(psi[sel], sub.matrix(), [pos[q] for q in sub.qubits])
            psi = new
        elif g.is_matrix_gate:
            psi = _apply_batch(psi, g.matrix(), axes)
        else:
            raise MethodUnsupportedForInput(f"{g!r} is not supported in trajectory sampling")
    flat = psi.reshape(n_samples, -1)
    if observable is None:
        rho = np.einsum("si,sj->ij", flat, flat.conj()) / n_samples
        return TrajectoryResult(rho, None, n_samples)
    from .statevector import _parse_pauli

    phi = psi
    for q, p in _parse_pauli(observable, qubits):
        phi = _apply_batch(phi, PAULI[p], [pos[q]])
    vals = np.einsum("si,si->s", flat.conj(), phi.reshape(n_samples, -1)).real
    sem = vals.std(ddof=1) / np.sqrt(n_samples) if n_samples > 1 else 0.0
    return TrajectoryResult(float(vals.mean()), float(sem), n_samples)
