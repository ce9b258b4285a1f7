"""JSON round-tripping for gates, channels and circuits.

Gate objects look like::

    {"name": "RX", "qubits": [0], "params": [0.5], "power": 1, "adjoint": false,
     "tags": {}, "matrix": null}

``params`` entries may be ``{"sym": "theta"}`` for unbound parameters and
``matrix`` is a flat row-major list of ``[re, im]`` pairs. Channels use::

    {"channel": "depolarizing", "qubits": [0, 1], "params": {"p": 0.01}}

with ``channel`` one of ``depolarizing``, ``dephasing``,
``amplitude_damping``, ``pauli`` or ``kraus``. A circuit file is
``{"qubits": [...], "gates": [...]}``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .circuit import Circuit, SuperCircuit
from .gates import BaseGate, Gate, Measure, Projection, Symbol, make_gate

__all__ = [
    "gate_to_dict",
    "gate_from_dict",
    "circuit_to_dict",
    "circuit_from_dict",
    "dumps",
    "loads",
    "load_circuit",
    "save_circuit",
    "SchemaError",
]


class SchemaError(ValueError):
    """Malformed circuit/gate JSON; the message names the offending field."""


def _matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[float(z.real), float(z.imag)] for z in m.ravel()]


def _matrix_from_json(data, field="matrix") -> np.ndarray:
    try:
        a = np.asarray(data, dtype=float)
        if a.ndim != 2 or a.shape[1] != 2:
            raise ValueError
        z = a[:, 0] + 1j * a[:, 1]
    except (TypeError, ValueError):
        raise SchemaError(f"'{field}' must be a list of [re, im] pairs") from None
    d = int(round(np.sqrt(len(z))))
    if d * d != len(z):
        raise SchemaError(f"'{field}' does not describe a square matrix")
    return z.reshape(d, d)


def _qubit_from_json(q):
    # JSON has no tuples; nested lists become tuples so labels stay hashable
    return tuple(_qubit_from_json(x) for x in q) if isinstance(q, list) else q


def _qubit_to_json(q):
    return [_qubit_to_json(x) for x in q] if isinstance(q, tuple) else q


# --------------------------------------------------------------- gates ----


def gate_to_dict(gate: BaseGate) -> dict:
    """JSON-ready description of a registry gate, projection, measurement or channel."""
    from . import noise

    qubits = [_qubit_to_json(q) for q in gate.qubits]
    if isinstance(gate, noise._Channel):
        return _channel_to_dict(gate, qubits)
    if isinstance(gate, Projection):
        return {"name": "PROJECTION", "qubits": qubits, "state": gate.state,
                "renormalize": gate.renormalize, "tags": gate.tags}
    if isinstance(gate, Measure):
        return {"name": "MEASURE", "qubits": qubits, "tags": gate.tags}
    if not isinstance(gate, Gate):
        raise SchemaError(f"{type(gate).__name__} has no JSON representation")
    params = [{"sym": p.name} if isinstance(p, Symbol) else float(p) for p in gate.params]
    power = {"sym": gate.power.name} if isinstance(gate.power, Symbol) else gate.power
    out = {"name": gate.name, "qubits": qubits, "params": params, "power": power,
           "adjoint": gate.adjoint, "tags": gate.tags}
    if gate.name == "MATRIX":
        out["matrix"] = _matrix_to_json(gate.matrix_override)
    return out


def _param(p, field):
    if isinstance(p, dict):
        if set(p) != {"sym"} or not isinstance(p["sym"], str):
            raise SchemaError(f"'{field}' symbol must look like {{\"sym\": name}}")
        return Symbol(p["sym"])
    if isinstance(p, bool) or not isinstance(p, (int, float)):
        raise SchemaError(f"'{field}' must be a number or {{\"sym\": name}}")
    return p


def gate_from_dict(d: dict) -> BaseGate:
    """Inverse of :func:`gate_to_dict`."""
    if not isinstance(d, dict):
        raise SchemaError("gate entries must be JSON objects")
    if "channel" in d:
        return _channel_from_dict(d)
    if "name" not in d:
        raise SchemaError("gate is missing 'name'")
    if "qubits" not in d or not isinstance(d["qubits"], list):
        raise SchemaError(f"gate '{d.get('name')}' is missing a 'qubits' list")
    name = str(d["name"]).upper()
    qubits = [_qubit_from_json(q) for q in d["qubits"]]
    tags = d.get("tags") or {}
    if name == "PROJECTION":
        return make_gate(name, qubits, state=str(d.get("state", "")),
                         renormalize=bool(d.get("renormalize", False)), tags=tags)
    if name == "MEASURE":
        return make_gate(name, qubits, tags=tags)
    params = [_param(p, "params") for p in d.get("params") or []]
    power = _param(d.get("power", 1), "power")
    matrix = _matrix_from_json(d["matrix"]) if d.get("matrix") is not None else None
    return Gate(name, qubits, params, power=power, adjoint=bool(d.get("adjoint", False)),
                tags=tags, matrix=matrix)


# ------------------------------------------------------------ channels ----


def _channel_to_dict(ch, qubits) -> dict:
    from . import noise

    if isinstance(ch, noise.GlobalDepolarizingChannel):
        return {"channel": "depolarizing", "qubits": qubits, "params": {"p": ch.p}}
    if isinstance(ch, noise.DephasingChannel):
        return {"channel": "dephasing", "qubits": qubits, "params": {"p": ch.p, "pauli": ch.pauli}}
    if isinstance(ch, noise.AmplitudeDampingChannel):
        return {"channel": "amplitude_damping", "qubits": qubits,
                "params": {"gamma": ch.gamma, "excitation_rate": ch.excitation_rate}}
    L, R, s = noise.kraus_ops(ch)
    params = {"left": [_matrix_to_json(m) for m in L], "s": _matrix_to_json(s)}
    if R is not L:
        params["right"] = [_matrix_to_json(m) for m in R]
    return {"channel": "kraus", "qubits": qubits, "params": params}


def _channel_from_dict(d: dict):
    from . import noise
    from .gates import KrausSuperGate, MatrixGate

    kind = d["channel"]
    qubits = [_qubit_from_json(q) for q in d.get("qubits", [])]
    if not qubits:
        raise SchemaError(f"channel '{kind}' is missing 'qubits'")
    params = d.get("params") or {}
    try:
        if kind == "depolarizing":
            if params.get("local", False):
                return noise.LocalDepolarizingChannel(qubits, params["p"])
            return noise.GlobalDepolarizingChannel(qubits, params["p"])
        if kind == "dephasing":
            return noise.DephasingChannel(qubits, params["p"], params.get("pauli", "Z"))
        if kind == "amplitude_damping":
            return noise.AmplitudeDampingChannel(qubits, params["gamma"], params.get("excitation_rate", 0.0))
        if kind == "pauli":
            s = np.asarray(params["s"], dtype=float)
            if params.get("local", False):
                return noise.LocalPauliChannel(qubits, s)
            return noise.GlobalPauliChannel(qubits, s)
        if kind == "kraus":
            left = [MatrixGate(_matrix_from_json(m, "params.left"), qubits) for m in params["left"]]
            right = None
            if "right" in params:
                right = [MatrixGate(_matrix_from_json(m, "params.right"), qubits) for m in params["right"]]
            s = params.get("s")
            if s is not None:
                n_r = len(right) if right is not None else len(left)
                a = np.asarray(s, dtype=float)
                if a.ndim == 2 and a.shape == (len(left) * n_r, 2):
                    s = (a[:, 0] + 1j * a[:, 1]).reshape(len(left), n_r)
                else:
                    s = a
            return KrausSuperGate(left, right, s, qubits=qubits)
    except KeyError as e:
        raise SchemaError(f"channel '{kind}' is missing 'params.{e.args[0]}'") from None
    raise SchemaError(f"unknown channel '{kind}'")


# ------------------------------------------------------------- circuits ----


def circuit_to_dict(circuit, qubits=None) -> dict:
    qubits = list(qubits) if qubits is not None else SuperCircuit(circuit).all_qubits()
    return {"qubits": [_qubit_to_json(q) for q in qubits], "gates": [gate_to_dict(g) for g in circuit]}


def circuit_from_dict(d: dict):
    """Return ``(circuit, qubits)``; a :class:`SuperCircuit` when channels are present."""
    if not isinstance(d, dict) or "gates" not in d:
        raise SchemaError("circuit JSON must be an object with a 'gates' list")
    if not isinstance(d["gates"], list):
        raise SchemaError("'gates' must be a list")
    gates = [gate_from_dict(g) for g in d["gates"]]
    is_super = any(getattr(g, "is_superoperator", False) for g in gates)
    circuit = (SuperCircuit if is_super else Circuit)(gates)
    qubits = d.get("qubits")
    if qubits is None:
        qubits = circuit.all_qubits()
    else:
        if not isinstance(qubits, list):
            raise SchemaError("'qubits' must be a list")
        qubits = [_qubit_from_json(q) for q in qubits]
        missing = set(map(repr, circuit.all_qubits())) - set(map(repr, qubits))
        if missing:
            raise SchemaError(f"'qubits' does not list {sorted(missing)}")
    return circuit, qubits


def dumps(circuit, qubits=None, **kwargs) -> str:
    return json.dumps(circuit_to_dict(circuit, qubits), **kwargs)


def loads(text: str):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e}") from None
    return circuit_from_dict(data)


def load_circuit(path):
    return loads(Path(path).read_text())


def save_circuit(circuit, path, qubits=None):
    Path(path).write_text(dumps(circuit, qubits, indent=1))
