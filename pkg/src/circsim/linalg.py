"""Small dense linear-algebra helpers on qubit-indexed tensors.

Convention used everywhere in the package: for a list of qubits
``(q0, q1, ..., q_{k-1})`` the first qubit is the most significant bit of the
matrix/vector index, i.e. ``index = b0 * 2**(k-1) + ... + b_{k-1}``.
"""

from __future__ import annotations

from functools import reduce
from typing import Hashable, Iterable, Sequence

import numpy as np


def sort_qubits(qubits: Iterable[Hashable]) -> list:
    """Sort qubit labels, falling back to a type-aware key for mixed labels."""
    qubits = list(qubits)
    try:
        return sorted(qubits)
    except TypeError:
        return sorted(qubits, key=lambda q: (type(q).__name__, repr(q)))


def kron(*matrices) -> np.ndarray:
    if not matrices:
        return np.ones((1, 1))
    return reduce(np.kron, matrices)


def apply_on_axes(psi: np.ndarray, matrix: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Apply a 2^k x 2^k ``matrix`` to the tensor ``psi`` along ``axes``.

    ``psi`` has one axis of dimension 2 per qubit (possibly followed by extra
    batch axes). Returns a new tensor with the same axis layout.
    """
    k = len(axes)
    m = np.reshape(matrix, (2,) * (2 * k))
    out = np.tensordot(m, psi, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def embed(matrix: np.ndarray, qubits: Sequence, order: Sequence) -> np.ndarray:
    """Return ``matrix`` (acting on ``qubits``) as a dense matrix over ``order``."""
    n = len(order)
    pos = {q: i for i, q in enumerate(order)}
    axes = [pos[q] for q in qubits]
    eye = np.eye(2**n, dtype=np.result_type(matrix, np.complex128)).reshape((2,) * n + (2**n,))
    return apply_on_axes(eye, matrix, axes).reshape(2**n, 2**n)


def reorder_matrix(matrix: np.ndarray, qubits: Sequence, new_qubits: Sequence) -> np.ndarray:
    """Permute the qubit axes of ``matrix`` from ``qubits`` order to ``new_qubits``."""
    qubits, new_qubits = list(qubits), list(new_qubits)
    if qubits == new_qubits:
        return matrix
    k = len(qubits)
    perm = [qubits.index(q) for q in new_qubits]
    t = np.reshape(matrix, (2,) * (2 * k))
    t = np.transpose(t, perm + [p + k for p in perm])
    return t.reshape(2**k, 2**k)


def global_phase_close(a: np.ndarray, b: np.ndarray, atol: float = 1e-8) -> bool:
    """True if ``a`` equals ``b`` up to a global phase, within ``atol``.

    Compares ``a @ b^dagger`` against ``lambda * I`` where ``lambda`` is its
    largest-modulus diagonal entry.
    """
    if a.shape != b.shape:
        return False
    p = a @ b.conj().T
    d = np.diag(p)
    lam = d[np.argmax(np.abs(d))]
    if abs(abs(lam) - 1) > atol:
        return False
    return bool(np.allclose(p, lam * np.eye(len(p)), atol=atol, rtol=0))
