import json
import subprocess
import sys

import pytest

from icbrackets.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_derive_toy(capsys):
    code, out, _ = run(capsys, "derive", "examples/toy.lag")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == "1"
    assert doc["config"] == {
        "subcommand": "derive",
        "input": "examples/toy.lag",
        "order": 3,
        "degree": 2,
        "samples": 200,
        "seed": 42,
        "tol": 1e-9,
    }
    assert doc["independent"] == ["x", "y", "z", "px"]
    values = {(b["a"], b["b"]): b["value"] for b in doc["brackets"]}
    assert values[("x", "px")] == "1"
    assert values[("z", "px")] == "exp(-x)"
    assert doc["nullspace_dim"] == 0


def test_derive_self_dual_lattice(capsys):
    code, out, _ = run(capsys, "derive", "--lattice", "sd", "--n", "2", "--a", "1", "--m", "1")
    assert code == 0
    doc = json.loads(out)
    coords = [b for b in doc["brackets"] if not b["a"].startswith("p") and not b["b"].startswith("p")]
    assert len(coords) == 66
    assert len(doc["brackets"]) == 24 * 23 // 2


def test_derive_oscillator(capsys):
    code, out, _ = run(capsys, "derive", "oscillator")
    doc = json.loads(out)
    assert code == 0 and doc["constraints"] == []
    assert doc["brackets"] == [{"a": "q", "b": "pq", "value": "1", "provenance": "solved"}]


def test_verify_suite(capsys):
    code, out, _ = run(capsys, "verify", "examples/toy.lag")
    doc = json.loads(out)
    assert code == 0
    assert [c["name"] for c in doc["checks"]] == ["jacobi", "covariance", "hamilton-equivalence", "trajectory"]
    assert all(c["status"] == "pass" for c in doc["checks"])


def test_verify_single_check(capsys):
    code, out, _ = run(capsys, "verify", "--checks", "jacobi", "examples/oscillator.lag")
    assert code == 0 and len(json.loads(out)["checks"]) == 1


def test_verify_corruption_hook(capsys):
    code, out, err = run(capsys, "verify", "--inject-test-corruption", "examples/toy.lag")
    assert code == 4
    assert "hamilton-equivalence failed" in err
    assert json.loads(out)["config"]["inject_test_corruption"] is True


def test_oracle(capsys):
    code, out, _ = run(capsys, "oracle", "examples/toy.lag")
    doc = json.loads(out)
    assert code == 0 and len(doc["constraints"]) == 2 and doc["deviation"] < 1e-9
    assert {c["class"] for c in doc["constraints"]} == {"second"}
    code, out, _ = run(capsys, "oracle", "examples/oscillator.lag")
    assert code == 0 and json.loads(out)["deviation"] == 0.0


def test_oracle_self_dual(capsys):
    code, out, _ = run(capsys, "oracle", "--lattice", "sd", "--n", "2")
    doc = json.loads(out)
    assert code == 0 and doc["deviation"] < 1e-9
    assert len(doc["constraints"]) == 16


def test_lattice_documents(capsys):
    code, out, _ = run(capsys, "lattice", "sd", "--n", "2", "--a", "1", "--m", "1")
    assert code == 0 and out.count("\ncoord ") == 12
    code, out, _ = run(capsys, "lattice", "dirac", "--n", "2")
    assert code == 0 and out.count(" odd\n") == 16


def test_lattice_rejects_single_site(capsys):
    with pytest.raises(SystemExit) as info:
        main(["lattice", "sd", "--n", "1"])
    assert info.value.code == 2


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.lag"
    bad.write_text("system s\ncoord x even\nL = dx*t\n")
    assert main(["derive", str(bad)]) == 1
    assert main(["derive", str(tmp_path / "missing.lag")]) == 1
    gauge = tmp_path / "gauge.lag"
    gauge.write_text("system g\ncoord x even\ncoord y even\nL = 1/2*(dx - y)^2\n")
    assert main(["derive", str(gauge)]) == 2
    assert main(["oracle", str(gauge)]) == 2
    free = tmp_path / "free.lag"
    free.write_text("system f\ncoord x even\ncoord y even\nL = 1/2*dx^2 + 1/2*dy^2\n")
    assert main(["derive", str(free)]) == 3
    capsys.readouterr()


def test_out_flag(tmp_path, capsys):
    target = tmp_path / "toy.json"
    assert main(["derive", "toy", "--out", str(target)]) == 0
    assert json.loads(target.read_text())["system"] == "toy"
    assert capsys.readouterr().out == ""


def test_determinism(capsys):
    _, a, _ = run(capsys, "derive", "toy", "--seed", "5")
    _, b, _ = run(capsys, "derive", "toy", "--seed", "5")
    _, c, _ = run(capsys, "derive", "toy", "--seed", "6")
    assert a == b
    assert json.loads(a)["brackets"] == json.loads(c)["brackets"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "icbrackets", "lattice", "dirac", "--n", "2"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("system dirac_lattice_2")
