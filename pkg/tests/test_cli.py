import csv
import os
import subprocess
import sys
from pathlib import Path

import pytest

from iulab.cli import load_config, run
from iulab.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

HARMONIC = """
[potential]
family = harmonic
[grid]
L_list = 6, 12
h = 0.05
[check.iuc_stability_study]
t = 0.1
{expect}
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_negative_control_exit_codes(tmp_path):
    out = tmp_path / "a"
    assert run(["verify", "--config", write(tmp_path, HARMONIC.format(expect="")),
                "--out", str(out)]) == 1
    report = rows(out / "report.csv")
    assert report[1][0] == "iuc_stability_study" and report[1][4] == "diverging"
    out = tmp_path / "b"
    assert run(["verify", "--config", write(tmp_path, HARMONIC.format(expect="expect = diverging")),
                "--out", str(out)]) == 0


def test_quartic_all_checks_pass(tmp_path):
    out = tmp_path / "out"
    assert run(["verify", "--config", str(CONFIGS / "quartic_all.ini"), "--out", str(out)]) == 0
    report = rows(out / "report.csv")
    assert report[0] == ["check", "anchor", "params", "value", "verdict", "expect", "status"]
    checks = {r[0] for r in report[1:]}
    assert {"rosen_fit", "decay_constant", "gross_monotonicity", "chain_bound_check",
            "radial_supersolution_check", "check_admissibility"} <= checks
    assert all(r[1] for r in report[1:])            # every row names its anchor
    assert all(r[6] == "ok" for r in report[1:])
    for name in ("summary.txt", "rosen_fit.csv", "iuc_stability_study.csv"):
        assert (out / name).exists()


def test_empty_check_list(tmp_path):
    out = tmp_path / "out"
    assert run(["verify", "--config", write(tmp_path, "[potential]\nfamily = power\n"),
                "--out", str(out)]) == 0
    assert rows(out / "report.csv") == [["check", "anchor", "params", "value", "verdict",
                                         "expect", "status"]]


def test_outputs_byte_identical(tmp_path):
    cfg = str(CONFIGS / "quartic_all.ini")
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["verify", "--config", cfg, "--out", str(a), "--seed", "7"]) == 0
    assert run(["verify", "--config", cfg, "--out", str(b), "--seed", "7"]) == 0
    names = sorted(os.listdir(a))
    assert names == sorted(os.listdir(b))
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_seed_changes_samples_and_is_recorded(tmp_path):
    cfg = write(tmp_path, "[grid]\nL = 4\n[check.duality_check]\nsamples = 1\n")
    a, b = tmp_path / "a", tmp_path / "b"
    run(["verify", "--config", cfg, "--out", str(a), "--seed", "1"])
    run(["verify", "--config", cfg, "--out", str(b), "--seed", "2"])
    assert "seed=1" in rows(a / "report.csv")[1][2]
    assert (a / "report.csv").read_bytes() != (b / "report.csv").read_bytes()


@pytest.mark.parametrize("text", [
    "[potential]\nfamily = power\nbogus = 1\n",
    "[nonsense]\n",
    "[check.not_a_check]\n",
    "[check.rosen_fit]\nexpect = maybe\n",
    "[grid]\nh = abc\n",
    "[grid]\nh = 0.1\nn_points = 11\n",
    "[potential]\nfamily = cubic\n",
    "[params]\nd = 2\n",
    "[check.gross_monotonicity]\npath = 2, 1\n",
    "[check.log_sobolev_check]\np = 3\n",
])
def test_config_errors_exit_2(tmp_path, text):
    assert run(["verify", "--config", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 2
    with pytest.raises(ConfigError):
        load_config(text, is_text=True)


def test_missing_config_and_bad_seed(tmp_path):
    assert run(["verify", "--config", str(tmp_path / "none.ini")]) == 2
    cfg = write(tmp_path, "[grid]\nL = 4\n")
    assert run(["verify", "--config", cfg, "--out", str(tmp_path / "o"), "--seed", "-1"]) == 2


def test_capacity_exit_3(tmp_path):
    cfg = write(tmp_path, "[grid]\nn = 3\nL = 10\nh = 0.1\n")
    assert run(["ground-state", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_convergence_exit_3(tmp_path):
    cfg = write(tmp_path, "[grid]\nL = 4\n[spectral]\nj = 4\ntol = 1e-30\n")
    assert run(["ground-state", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_ground_state_and_kernel_outputs(tmp_path):
    cfg = write(tmp_path, "[grid]\nL = 3\nh = 0.1\n[times]\nt_list = 0.5, 1\n")
    out = tmp_path / "o"
    assert run(["ground-state", "--config", cfg, "--out", str(out), "--threads", "1"]) == 0
    gs = rows(out / "ground_state_L3.csv")
    assert gs[0] == ["index", "x0", "phi"] and len(gs) == 60
    assert rows(out / "eigenpairs_L3.csv")[0] == ["j", "lambda", "residual"]
    out = tmp_path / "k"
    assert run(["kernel", "--config", cfg, "--out", str(out)]) == 0
    assert len(rows(out / "kernel_L3_t0.5.csv")) == 59
    assert [r[0] for r in rows(out / "report.csv")[1:]] == ["iuc_constant"] * 2


def test_check_potential(tmp_path):
    out = tmp_path / "o"
    assert run(["check-potential", "--config", str(CONFIGS / "quartic_all.ini"),
                "--out", str(out)]) == 0
    assert rows(out / "check_admissibility.csv")[0][:3] == ["r", "Q", "I"]
    cfg = write(tmp_path, "[potential]\nfamily = harmonic\n")
    assert run(["check-potential", "--config", cfg, "--out", str(tmp_path / "h")]) == 1


def test_box_convergence_study(tmp_path):
    out = tmp_path / "o"
    assert run(["study", "--config", str(CONFIGS / "box_study.ini"), "--out", str(out)]) == 0
    table = rows(out / "convergence.csv")
    assert table[0] == ["h", "L", "E0", "C_t", "gamma_hat", "C_decay", "order"]
    orders = [float(r[6]) for r in table[2:]]
    assert all(1.8 <= p <= 2.2 for p in orders)


def test_study_needs_a_sweep(tmp_path):
    cfg = write(tmp_path, "[grid]\nL = 4\n")
    assert run(["study", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, "[grid]\nL = 3\nh = 0.1\n")
    res = subprocess.run([sys.executable, "-m", "iulab", "ground-state", "--config", cfg,
                          "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
