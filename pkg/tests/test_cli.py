import json
import math
import subprocess
import sys

import pytest

from fqlab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out else None), err


def test_analyze_kurasov_sarnak(capsys):
    code, rep, _ = run(capsys, "analyze", "--example", "kurasov-sarnak", "--omega", "1,1.41421356")
    assert code == 0 and rep["unfolded"]["verdict"] is True
    assert rep["predicted_density"] == pytest.approx(1 + 2 * 1.41421356, rel=1e-12)
    assert rep["period_group"] == "aperiodic" and "assumption" in rep


def test_analyze_ex42_reports_bkk_four(capsys):
    code, rep, _ = run(capsys, "analyze", "--example", "ex42", "--n", "2", "--delta", "0.5")
    assert code == 0
    assert rep["mixed_volume"] == "2" and rep["bkk_number"] == "4"
    assert rep["predicted_density"] == 4.0


def test_report_echoes_config_and_seed(capsys):
    _, rep, _ = run(capsys, "example", "--example", "poisson", "--seed", "7")
    assert rep["seed"] == 7 and rep["config"]["seed"] == 7 and rep["config"]["example"] == "poisson"


def test_malformed_json_is_an_input_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"m": 1, "n": ')
    code, rep, err = run(capsys, "analyze", "--input", str(bad))
    assert code == 2 and rep is None and "input error" in err


def test_missing_file_is_an_input_error(tmp_path, capsys):
    code, _, err = run(capsys, "analyze", "--input", str(tmp_path / "nope.json"))
    assert code == 2 and "cannot read" in err


def test_schema_error_names_the_field(tmp_path, capsys):
    doc = tmp_path / "s.json"
    doc.write_text(json.dumps({"m": 1, "n": 1, "polys": [{"terms": [{"exp": [1, 2], "coef": [1, 0]}]}]}))
    code, _, err = run(capsys, "analyze", "--input", str(doc))
    assert code == 2 and "exp" in err


@pytest.mark.parametrize("argv", [
    ["analyze", "--example", "ex42", "--b=-1/2,-1/2"],
    ["analyze", "--example", "ex41", "--b=1/2,-1/2"],
    ["analyze", "--example", "ex42", "--delta", "1"],
    ["analyze", "--example", "kurasov-sarnak", "--omega", "1"],
    ["analyze", "--example", "no-such-example"],
])
def test_out_of_range_parameters_exit_two(argv, capsys):
    assert run(capsys, *argv)[0] == 2


def test_bad_flag_values_exit_two(capsys):
    with pytest.raises(SystemExit) as info:
        main(["density", "--example", "poisson", "--tol", "-1"])
    assert info.value.code == 2
    capsys.readouterr()


def test_example_output_round_trips_through_input(tmp_path, capsys):
    _, rep, _ = run(capsys, "example", "--example", "ex42", "--b=-1/4,-1/4")
    path = tmp_path / "ex42.json"
    path.write_text(json.dumps(rep["system"]))
    code, a, _ = run(capsys, "analyze", "--input", str(path))
    assert code == 0 and a["bkk_number"] == "4" and a["rationality_rank"] == 2


def test_psf_check_poisson(capsys):
    code, rep, _ = run(capsys, "psf-check", "--example", "poisson")
    assert code == 0 and rep["verdict"] == "pass" and rep["abs_gap"] < 1e-8
    for r in rep["routes"]:
        assert r["max_pair_gap"] < 1e-8


def test_psf_check_refuses_nonreal_system(capsys):
    code, rep, _ = run(capsys, "psf-check", "--example", "sine-pair", "--omega", "1,3/2")
    assert code == 1 and rep["verdict"] != "pass"


def test_stability_exit_codes_follow_verdicts(capsys):
    code, rep, _ = run(capsys, "stability", "--example", "sine-pair", "--omega", "1,3/2")
    assert code == 1 and rep["m_stability"]["verdict"] == "violated"
    assert rep["m_stability"]["witness"]["x"] is not None
    code, rep, _ = run(capsys, "stability", "--example", "ex41")
    assert code == 0 and rep["m_stability"]["verdict"] == "consistent"
    assert rep["halfspace_rows"]["verdict"] is False


def test_zeros_artifacts_are_byte_identical(tmp_path, capsys):
    argv = ["zeros", "--example", "kurasov-sarnak", "--R", "5", "--out", str(tmp_path)]
    assert run(capsys, *argv)[0] == 0
    first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    assert set(first) == {"zeros.csv", "zeros.json"}
    assert run(capsys, *argv)[0] == 0
    assert {p.name: p.read_bytes() for p in tmp_path.iterdir()} == first
    header = first["zeros.csv"].decode().splitlines()[0]
    assert header == "re_1,im_1,multiplicity,residual"


def test_density_poisson(capsys):
    code, rep, _ = run(capsys, "density", "--example", "poisson", "--R", "20")
    assert code == 0 and rep["relative_gap"] < 0.05


def test_spectrum_periodic_writes_csv(tmp_path, capsys):
    code, rep, _ = run(capsys, "spectrum", "--example", "ex42", "--b=-1/4,-1/4", "--cutoff", "3",
                       "--out", str(tmp_path))
    assert code == 0 and rep["periodic"] and abs(int(rep["det_B"])) == 4
    assert rep["vertex_route"]["max_atom_gap"] < 1e-7
    lines = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "s_1,s_2,re_a,im_a" and len(lines) == rep["atoms"] + 1


@pytest.mark.slow
def test_spectrum_ex41_rational_approximations(capsys):
    code, rep, _ = run(capsys, "spectrum", "--example", "ex41", "--rational-q", "10,50")
    assert code == 0 and rep["denominators"] == [10, 50]
    assert rep["zero_set"] == ["bkk_count_attained"] * 2
    g = rep["gaps_to_direct"]
    assert g[1] < g[0] and rep["cauchy_gaps"][0] < 1e-5


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "fqlab.cli", "analyze", "--example", "poisson"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    rep = json.loads(proc.stdout)
    assert rep["bkk_number"] == "1" and math.isclose(rep["predicted_density"], 1.0)
