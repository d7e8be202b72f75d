import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from genbunch.cli import FIG2_COLUMNS, main
from genbunch.numkit import haar_unitary, matrix_to_dict
from genbunch.protocol import fourier_network


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_config(tmp_path, obj):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(obj))
    return str(path)


def test_table1_csv_is_byte_stable(capsys):
    code, first, _ = run(capsys, "table1")
    _, second, _ = run(capsys, "table1")
    assert code == 0 and first == second
    rows = list(csv.DictReader(io.StringIO(first)))
    assert rows[0] == {"N": "3", "L": "2", "M": "5", "K": "3"}
    assert rows[-1] == {"N": "20", "L": "14", "M": "200", "K": "186"}


def test_table1_to_file(capsys, tmp_path):
    out = tmp_path / "t.csv"
    assert run(capsys, "table1", "--out", str(out))[0] == 0
    assert out.read_text().startswith("N,L,M,K\n")


def test_fig2_small_run_is_seeded(capsys, tmp_path):
    cfg = write_config(tmp_path, {"n_values": [3, 4]})
    argv = ["fig2", "--config", cfg, "--trials", "20", "--runs", "10", "--seed", "4"]
    code, a, err = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert code == 0 and a == b
    rows = list(csv.DictReader(io.StringIO(a)))
    assert list(rows[0]) == FIG2_COLUMNS and [r["N"] for r in rows] == ["3", "4"]
    assert "resolved config" in err


def test_assess_pass_and_fail(capsys, tmp_path):
    u = fourier_network(4)
    base = {"problem": {"network": matrix_to_dict(u), "input_modes": [0, 1, 2, 3],
                        "output_subset": [0, 1]}, "runs": 3000, "seed": 5}
    code, out, _ = run(capsys, "assess", "--config", write_config(tmp_path, base))
    rep = json.loads(out)
    assert code == 0 and rep["verdict"] == "PASS" and rep["protocol"] == "standard"
    assert set(rep) >= {"runs", "bunched", "predicted", "band", "verdict", "seed"}
    base["source"] = {"kind": "distinguishable"}
    code, out, _ = run(capsys, "assess", "--config", write_config(tmp_path, base))
    assert code == 1 and json.loads(out)["verdict"] == "FAIL"
    code, out, _ = run(capsys, "assess", "--config", write_config(tmp_path, base), "--runs", "0")
    assert code == 1 and json.loads(out)["verdict"] == "INCONCLUSIVE"


def test_assess_haar_network_and_sources(capsys, tmp_path):
    for source in [{"kind": "first_order", "fidelity": 0.999},
                   {"kind": "independent", "fidelity": 0.999},
                   {"kind": "random_phase", "s": 3},
                   {"kind": "multinomial"},
                   {"kind": "fock_mixture", "weights": [1.0], "occupations": [[1, 1, 1]]},
                   {"kind": "pure_product", "gram": matrix_to_dict(np.ones((3, 3)))}]:
        cfg = {"problem": {"network": {"haar": 6}, "input_modes": [0, 1, 2],
                           "output_subset": [0, 1, 2, 3]}, "source": source, "runs": 200}
        code, out, _ = run(capsys, "assess", "--config", write_config(tmp_path, cfg))
        assert code in (0, 1)
        assert json.loads(out)["runs"] == 200


def test_scattershot(capsys, tmp_path):
    cfg = write_config(tmp_path, {"n": 3, "network": {"haar": 5}, "runs": 50})
    code, out, _ = run(capsys, "scattershot", "--config", cfg, "--seed", "2")
    rep = json.loads(out)
    assert code in (0, 1) and rep["protocol"] == "scattershot" and len(rep["inputs"]) == 50


def test_approx_per_from_problem(capsys, tmp_path):
    u = haar_unitary(30, 3)
    cfg = write_config(tmp_path, {
        "kappa": 1, "delta": 1, "truncation_order": 4,
        "problem": {"network": matrix_to_dict(u), "input_modes": [0, 1, 2, 3],
                    "output_subset": list(range(26))}})
    code, out, _ = run(capsys, "approx_per", "--config", cfg)
    rep = json.loads(out)
    assert code == 0 and rep["draws"] == 1
    assert rep["results"][0]["relative_error"] < 1e-10


def test_approx_per_random_draws(capsys, tmp_path):
    cfg = write_config(tmp_path, {"n": 5, "m": 120, "l": 5, "kappa": 1, "delta": 1})
    code, out, _ = run(capsys, "approx_per", "--config", cfg, "--trials", "3")
    assert code == 0 and json.loads(out)["draws"] == 3


def test_loophole_lossy_spectra(capsys, tmp_path):
    code, out, _ = run(capsys, "loophole")
    assert code == 0 and json.loads(out)["all_outputs_in_allowed_set"] is True
    u = 0.7 * haar_unitary(3, 1)
    code, out, _ = run(capsys, "lossy", "--config", write_config(tmp_path, {"network": matrix_to_dict(u)}))
    rep = json.loads(out)
    assert code == 0 and rep["unitarity_error"] < 1e-10 and rep["block_error"] == 0
    code, out, _ = run(capsys, "spectra", "--seed", "3")
    rep = json.loads(out)
    assert code == 0 and rep["min_eig_is_det"] and rep["sym_vector_is_eigen"]


@pytest.mark.parametrize("argv", [
    ["nope"],
    ["table1", "--bogus"],
    ["table1", "--set", "nope=1"],
    ["table1", "--set", "permanent_cap"],
    ["assess"],
    ["table1", "--seed", "-1"],
    ["table1", "--config", "/nonexistent.json"],
])
def test_usage_errors_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_contract_error_exits_2(capsys, tmp_path):
    cfg = write_config(tmp_path, {"problem": {"network": matrix_to_dict(2 * np.eye(2)),
                                              "input_modes": [0], "output_subset": [0]}})
    code, _, err = run(capsys, "assess", "--config", cfg)
    assert code == 2 and "error" in err


def test_set_override_is_applied(capsys, tmp_path):
    cfg = write_config(tmp_path, {"n": 7, "m": 10, "k": 8})
    code, _, err = run(capsys, "spectra", "--config", cfg, "--set", "schur_cap=5")
    assert code == 2 and "exceeds cap 5" in err


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "genbunch.cli", "table1"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.splitlines()[1] == "3,2,5,3"
