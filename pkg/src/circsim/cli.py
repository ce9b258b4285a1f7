"""``sim`` command line: ``simulate``, ``expect`` and ``bench`` subcommands.

Exit codes: 0 success, 2 bad input, 3 backend failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .errors import BadPauli, BadToken, MethodUnsupportedForInput, SimulationError

EXIT_OK, EXIT_BAD_INPUT, EXIT_BACKEND = 0, 2, 3

# Per-method qubit limits for ``bench``
_BENCH_LIMITS = {"evolution": 26, "tn": 40, "clifford": 31}


class InputError(Exception):
    """Bad user input; the message names the offending field."""


# ------------------------------------------------------------- helpers ----


def _complex_pairs(a):
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _load(path):
    from .serialization import SchemaError, load_circuit

    if path is None:
        raise InputError("--circuit: a circuit file is required")
    try:
        return load_circuit(path)
    except FileNotFoundError:
        raise InputError(f"--circuit: file '{path}' not found") from None
    except (SchemaError, SimulationError, ValueError, TypeError) as e:
        raise InputError(f"--circuit: {e}") from None


def _initial(arg):
    """Token string, or ``@file.json`` holding a list of ``[re, im]`` amplitudes."""
    if arg is None or not arg.startswith("@"):
        return arg if arg is not None else "0"
    try:
        data = json.loads(Path(arg[1:]).read_text())
        a = np.asarray(data, dtype=float)
        return a[..., 0] + 1j * a[..., 1]
    except (OSError, ValueError, IndexError) as e:
        raise InputError(f"--initial: cannot read amplitudes from '{arg[1:]}': {e}") from None


def _opts(args) -> dict:
    opts = {}
    if args.method == "evolution":
        opts["compress"] = args.compress
        opts["seed"] = args.seed
    elif args.method == "tn":
        opts.update(max_largest_intermediate=args.max_intermediate, seed=args.seed, parallel=args.parallel)
    else:
        opts.update(compress=args.compress, atol=args.atol, parallel=args.parallel)
    if args.threads is not None:
        opts["threads"] = args.threads
    return opts


def _check_config(args, n, noisy):
    if args.final is not None and args.method != "tn":
        raise InputError("--final: a final state requires --method tn")
    width = 2 * n if noisy else n
    for field, tok in (("--initial", args.initial), ("--final", args.final)):
        if tok is None or tok.startswith("@") or (args.method == "clifford" and field == "--initial"):
            continue
        if len(tok) not in (1, width) and not (noisy and len(tok) == n):
            raise InputError(f"{field}: expected {width} tokens, got {len(tok)} ('{tok}')")
        allowed = set("01+-") if args.method == "evolution" else set("01+-.") | set(
            "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
        bad = set(tok) - allowed
        if bad:
            raise InputError(f"{field}: invalid tokens {sorted(bad)}")


def _emit(obj, out):
    text = json.dumps(obj)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _set_threads(args):
    if getattr(args, "threads", None) is not None:
        os.environ["SIM_NUM_THREADS"] = str(args.threads)


# ------------------------------------------------------------ commands ----


def cmd_simulate(args) -> int:
    from .simulation import _is_noisy, simulate

    circuit, qubits = _load(args.circuit)
    noisy = _is_noisy(circuit)
    _check_config(args, len(qubits), noisy)
    initial = _initial(args.initial)
    if args.method == "clifford" and initial == "0":
        raise InputError("--initial: the clifford method needs a Pauli string (e.g. 'XZI')")
    out = simulate(circuit, initial, args.final, args.method, qubits=qubits, **_opts(args))
    if args.method == "clifford":
        _emit(out.to_dict(), args.output)
    elif args.method == "evolution":
        if noisy:
            _emit({"order": [str(q) for q in qubits], "density_matrix": _complex_pairs(out)}, args.output)
        else:
            _emit({"order": [str(q) for q in qubits], "amplitudes": _complex_pairs(np.ravel(out))}, args.output)
    else:
        _emit({"open_indices": _open_labels(args, qubits, noisy), "tensor": _complex_pairs(out)}, args.output)
    return EXIT_OK


def _open_labels(args, qubits, noisy):
    labels = [f"{q}" for q in qubits]
    if noisy:
        labels = [f"{q}:row" for q in qubits] + [f"{q}:col" for q in qubits]
    n = len(labels)

    def expand(tok, default):
        if tok is None:
            return default * n
        if len(tok) == 1:
            return tok * n
        if noisy and len(tok) * 2 == n:
            return tok * 2
        return tok

    fin, ini = expand(args.final, "."), expand(args.initial, "0")
    return [f"out:{q}" for q, t in zip(labels, fin) if t == "."] + [
        f"in:{q}" for q, t in zip(labels, ini) if t == "."
    ]


def cmd_expect(args) -> int:
    from .simulation import expectation

    circuit, qubits = _load(args.circuit)
    if args.final is not None:
        raise InputError("--final: not used by expect")
    if args.pauli is None or len(args.pauli) != len(qubits) or set(args.pauli.upper()) - set("IXYZ"):
        raise InputError(f"--pauli: expected {len(qubits)} characters over IXYZ, got '{args.pauli}'")
    initial = args.initial or "0"
    if set(initial) - set("01+-") or len(initial) not in (1, len(qubits)):
        raise InputError(f"--initial: expected {len(qubits)} tokens over 0 1 + -, got '{initial}'")
    value = expectation(circuit, args.pauli.upper(), initial, args.method, qubits=qubits, **_opts(args))
    _emit({"value": value}, args.output)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .clifford import simulate_clifford
    from .generators import CLIFFORD_T_POLICY, LAYERED_POLICY, clifford_t_circuit, layered_circuit
    from .statevector import simulate_statevector
    from .tensornet import simulate_tn

    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise InputError(f"--sizes: expected comma-separated integers, got '{args.sizes}'") from None
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in _BENCH_LIMITS:
            raise InputError(f"--methods: unknown method '{m}'")
    if not sizes:
        raise InputError("--sizes: at least one size is required")
    if args.reps < 1:
        raise InputError("--reps: must be at least 1")
    for s in sizes:
        for m in methods:
            if not 1 <= s <= _BENCH_LIMITS[m]:
                raise InputError(f"--sizes: {s} qubits is outside 1..{_BENCH_LIMITS[m]} for method '{m}'")

    buf = io.StringIO()
    buf.write(f"# seed={args.seed}; evolution/tn circuits: {LAYERED_POLICY} (depth = n_qubits)\n")
    buf.write(f"# clifford circuits: {CLIFFORD_T_POLICY} (n_gates = 8 * n_qubits, non_clifford_fraction = 0.1)\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["size", "method", "mean_runtime_s", "std", "n_gates", "branches_compress0", "branches_compress4"])
    for n in sizes:
        for m in methods:
            times, extra = [], ["", ""]
            if m == "clifford":
                circ = clifford_t_circuit(n, 8 * n, 0.1, seed=args.seed + n)
                pauli = "Z" + "I" * (n - 1)
                for _ in range(args.reps):
                    t0 = time.perf_counter()
                    r4 = simulate_clifford(circ, pauli, compress_level=4, atol=args.atol)
                    times.append(time.perf_counter() - t0)
                r0 = simulate_clifford(circ, pauli, compress_level=0, atol=args.atol)
                extra = [r0.stats["n_explored_branches"], r4.stats["n_explored_branches"]]
            else:
                circ = layered_circuit(n, seed=args.seed + n)
                for _ in range(args.reps):
                    t0 = time.perf_counter()
                    if m == "evolution":
                        simulate_statevector(circ, "0", compress=args.compress, threads=args.threads)
                    else:
                        simulate_tn(circ, "0", "0", max_largest_intermediate=args.max_intermediate,
                                    seed=args.seed, threads=args.threads)
                    times.append(time.perf_counter() - t0)
            writer.writerow([n, m, f"{np.mean(times):.6g}", f"{np.std(times):.6g}", len(circ), *extra])
    if args.output:
        Path(args.output).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


# -------------------------------------------------------------- parser ----


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sim", description="Multi-method quantum circuit simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("-c", "--circuit", help="circuit JSON file")
        sp.add_argument("--method", choices=["evolution", "tn", "clifford"], default="evolution")
        sp.add_argument("--initial", help="initial tokens (tn/evolution), @amplitudes.json, or Pauli string (clifford)")
        sp.add_argument("--final", help="final tokens (tn only)")
        sp.add_argument("--max-intermediate", type=int, default=2**28, dest="max_intermediate",
                        help="largest intermediate tensor allowed before slicing (tn)")
        sp.add_argument("--compress", type=int, default=4, help="gate fusion width (evolution, clifford)")
        sp.add_argument("--parallel", action="store_true")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--atol", type=float, default=1e-8)
        sp.add_argument("--threads", type=int, help="worker threads (overrides SIM_NUM_THREADS)")
        sp.add_argument("-o", "--output", help="write result here instead of stdout")

    s = sub.add_parser("simulate", help="run a circuit and print the result as JSON")
    common(s)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("expect", help="expectation value of a Pauli string")
    common(e)
    e.add_argument("--pauli", required=True, help="Pauli string over IXYZ, one per qubit")
    e.set_defaults(func=cmd_expect)

    b = sub.add_parser("bench", help="time methods on seeded random circuits and write CSV")
    b.add_argument("--sizes", default="4,6,8")
    b.add_argument("--methods", default="evolution,tn,clifford")
    b.add_argument("--reps", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--compress", type=int, default=4)
    b.add_argument("--max-intermediate", type=int, default=2**28, dest="max_intermediate")
    b.add_argument("--atol", type=float, default=1e-8)
    b.add_argument("--threads", type=int)
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse exits with 2 on usage errors
        return int(e.code or 0)
    _set_threads(args)
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (BadToken, BadPauli, MethodUnsupportedForInput) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except Exception as e:  # noqa: BLE001 - anything else is an engine failure
        print(f"backend failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
