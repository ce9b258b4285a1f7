import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from circsim import Circuit, Gate, SuperCircuit
from circsim.cli import main
from circsim.generators import clifford_t_circuit, layered_circuit
from circsim.noise import GlobalDepolarizingChannel
from circsim.serialization import save_circuit

DATA = Path(__file__).parent / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def pairs(a):
    a = np.asarray(a, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


@pytest.fixture
def h_file(tmp_path):
    p = tmp_path / "h.json"
    save_circuit(Circuit([Gate("H", [0])]), p)
    return p


@pytest.fixture
def layered_file(tmp_path):
    p = tmp_path / "layered.json"
    save_circuit(layered_circuit(4, seed=3), p)
    return p


class TestSimulate:
    def test_hadamard(self, capsys, h_file):
        code, out, _ = run(capsys, "simulate", "-c", h_file, "--initial", "0")
        assert code == 0
        d = json.loads(out)
        assert set(d) == {"order", "amplitudes"} and d["order"] == ["0"]
        np.testing.assert_allclose(pairs(d["amplitudes"]), [2**-0.5, 2**-0.5], atol=1e-12)

    def test_tn_open(self, capsys, h_file):
        code, out, _ = run(capsys, "simulate", "-c", h_file, "--method", "tn", "--final", ".")
        d = json.loads(out)
        assert code == 0 and d["open_indices"] == ["out:0"]
        np.testing.assert_allclose(pairs(d["tensor"]), [2**-0.5, 2**-0.5], atol=1e-12)

    def test_grover_file(self, capsys):
        code, out, _ = run(capsys, "simulate", "-c", DATA / "grover.json")
        amps = pairs(json.loads(out)["amplitudes"])
        expected = np.full(8, 0.353553)
        expected[[0, 4]] *= -1
        assert code == 0
        np.testing.assert_allclose(amps.real, expected, atol=1e-6)

    def test_evolution_matches_tn(self, capsys, layered_file):
        _, out, _ = run(capsys, "simulate", "-c", layered_file, "--initial", "+0-1")
        psi = pairs(json.loads(out)["amplitudes"])
        for idx in (0, 5, 11):
            final = format(idx, "04b")
            _, out, _ = run(capsys, "simulate", "-c", layered_file, "--method", "tn", "--initial", "+0-1",
                            "--final", final)
            d = json.loads(out)
            assert d["open_indices"] == []
            assert abs(complex(*d["tensor"]) - psi[idx]) < 1e-8

    def test_clifford_schema(self, capsys, tmp_path):
        p = tmp_path / "ct.json"
        save_circuit(clifford_t_circuit(3, 20, 0.2, seed=1), p)
        code, out, _ = run(capsys, "simulate", "-c", p, "--method", "clifford", "--initial", "ZXI")
        d = json.loads(out)
        assert code == 0 and set(d) == {"terms", "info"}
        assert set(d["info"]) == {"n_explored_branches", "runtime (s)"}
        assert all(len(k) == 3 and len(v) == 2 for k, v in d["terms"].items())

    def test_noisy_density(self, capsys, tmp_path):
        p = tmp_path / "noisy.json"
        save_circuit(Circuit([Gate("X", [0])]), p)
        c = json.loads(p.read_text())
        c["gates"].append({"channel": "depolarizing", "qubits": [0], "params": {"p": 1.0}})
        p.write_text(json.dumps(c))
        code, out, _ = run(capsys, "simulate", "-c", p)
        np.testing.assert_allclose(pairs(json.loads(out)["density_matrix"]), np.eye(2) / 2, atol=1e-12)

    def test_amplitude_file(self, capsys, h_file, tmp_path):
        amp = tmp_path / "amp.json"
        amp.write_text(json.dumps([[0, 0], [1, 0]]))
        _, out, _ = run(capsys, "simulate", "-c", h_file, "--initial", f"@{amp}")
        np.testing.assert_allclose(pairs(json.loads(out)["amplitudes"]), [2**-0.5, -(2**-0.5)], atol=1e-12)

    def test_output_file(self, capsys, h_file, tmp_path):
        out = tmp_path / "out.json"
        code, stdout, _ = run(capsys, "simulate", "-c", h_file, "-o", out)
        assert code == 0 and stdout == "" and "amplitudes" in json.loads(out.read_text())

    def test_deterministic(self, capsys, layered_file):
        a = run(capsys, "simulate", "-c", layered_file, "--seed", "3")[1]
        b = run(capsys, "simulate", "-c", layered_file, "--seed", "3")[1]
        assert a == b


class TestExpect:
    def test_plus_x(self, capsys, h_file):
        _, out, _ = run(capsys, "expect", "-c", h_file, "--initial", "0", "--pauli", "X")
        assert json.loads(out)["value"] == pytest.approx(1)

    def test_zero_z(self, capsys, tmp_path):
        p = tmp_path / "i.json"
        save_circuit(Circuit([Gate("I", [0])]), p)
        for method in ("evolution", "tn", "clifford"):
            _, out, _ = run(capsys, "expect", "-c", p, "--pauli", "Z", "--method", method)
            assert json.loads(out)["value"] == pytest.approx(1)

    @pytest.mark.parametrize("steps", [1, 3, 6])
    def test_decaying_cosine(self, capsys, tmp_path, steps):
        theta, p = 0.4, 0.05
        c = SuperCircuit()
        for _ in range(steps):
            c.append(Gate("RZ", [0], params=[theta]))
            c.append(GlobalDepolarizingChannel([0], p))
        path = tmp_path / "rz.json"
        save_circuit(c, path)
        _, out, _ = run(capsys, "expect", "-c", path, "--initial", "+", "--pauli", "X")
        assert json.loads(out)["value"] == pytest.approx((1 - p) ** steps * np.cos(steps * theta), abs=1e-12)


class TestErrors:
    @pytest.mark.parametrize(
        "argv,field",
        [
            (["simulate", "-c", "missing.json"], "--circuit"),
            (["simulate", "-c", "{h}", "--initial", "0q"], "--initial"),
            (["simulate", "-c", "{h}", "--final", "0"], "--final"),
            (["simulate", "-c", "{h}", "--method", "clifford"], "--initial"),
            (["expect", "-c", "{h}", "--pauli", "XX"], "--pauli"),
            (["bench", "--sizes", "40", "--methods", "evolution"], "--sizes"),
            (["bench", "--methods", "magic"], "--methods"),
        ],
    )
    def test_exit_two(self, capsys, h_file, argv, field):
        code, _, err = run(capsys, *[a.replace("{h}", str(h_file)) for a in argv])
        assert code == 2 and field in err

    def test_bad_schema(self, capsys, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"gates": [{"name": "H"}]}))
        code, _, err = run(capsys, "simulate", "-c", p)
        assert code == 2 and "qubits" in err

    def test_backend_failure(self, capsys, tmp_path):
        p = tmp_path / "wide.json"
        save_circuit(Circuit([Gate("T", [0]), Gate("H", [0])] * 20), p)
        code, _, err = run(capsys, "simulate", "-c", p, "--method", "tn", "--final", ".", "--max-intermediate", "1")
        assert code == 3 and "backend failure" in err


class TestBench:
    def test_one_row(self, capsys):
        code, out, _ = run(capsys, "bench", "--sizes", "4", "--reps", "1", "--methods", "evolution,tn,clifford")
        assert code == 0
        lines = [ln for ln in out.splitlines() if not ln.startswith("#")]
        rows = list(csv.DictReader(io.StringIO("\n".join(lines))))
        assert [r["method"] for r in rows] == ["evolution", "tn", "clifford"]
        assert all(float(r["mean_runtime_s"]) > 0 for r in rows)
        cl = rows[2]
        assert int(cl["branches_compress4"]) <= int(cl["branches_compress0"])
        assert "seed=" in out.splitlines()[0]

    def test_deterministic_structure(self, capsys):
        a = run(capsys, "bench", "--sizes", "3", "--reps", "1", "--methods", "clifford")[1]
        b = run(capsys, "bench", "--sizes", "3", "--reps", "1", "--methods", "clifford")[1]
        strip = lambda s: [r.split(",")[:1] + r.split(",")[4:] for r in s.splitlines()]  # noqa: E731
        assert strip(a) == strip(b)


def test_console_script(h_file):
    r = subprocess.run([sys.executable, "-m", "circsim.cli", "simulate", "-c", str(h_file)],
                       capture_output=True, text=True, check=False)
    assert r.returncode == 0 and "amplitudes" in r.stdout
