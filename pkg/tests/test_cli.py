import csv
import io

import numpy as np
import pytest

from roadharvest.cli import main
from roadharvest.metrics import throughput
from roadharvest.scenario import Platoon, build_scenario


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_throughput_matches_library(capsys):
    code, out, _ = run(capsys, "throughput", "--d0", "50")
    assert code == 0
    (row,) = table(out)
    expect = throughput(build_scenario(traffic=Platoon(50.0))).theta_kbit
    assert float(row["theta_kbit_s"]) == pytest.approx(expect, rel=1e-9)
    assert "# scenario traffic = platoon:50" in out


def test_reruns_are_byte_identical(capsys):
    args = ("simulate", "--cycles", "2000", "--seed", "4", "--mu", "1/25")
    a = run(capsys, *args)[1]
    b = run(capsys, *args)[1]
    # wall-clock time is the only field allowed to differ
    ra, rb = table(a)[0], table(b)[0]
    ra.pop("elapsed_s"), rb.pop("elapsed_s")
    assert ra == rb
    assert [x for x in a.splitlines() if x.startswith("#")] == [x for x in b.splitlines() if x.startswith("#")]


def test_save_config_round_trip(tmp_path, capsys):
    ini = tmp_path / "c.ini"
    _, first, _ = run(capsys, "throughput", "--Pt", "80", "--d0", "100", "--save-config", str(ini))
    _, again, _ = run(capsys, "throughput", "-c", str(ini))
    assert table(first) == table(again)


def test_output_file(tmp_path, capsys):
    target = tmp_path / "out.csv"
    code, out, _ = run(capsys, "efficiency", "-o", str(target))
    assert code == 0
    assert "upsilon" in target.read_text()


def test_dump_matrix(tmp_path, capsys):
    target = tmp_path / "m.csv"
    assert run(capsys, "throughput", "--dump-matrix", str(target))[0] == 0
    M = np.loadtxt(target, delimiter=",", comments="#")
    assert M.shape == (101, 101)
    np.testing.assert_allclose(M.sum(axis=1), 1.0, atol=1e-12)


def test_blackout_command(capsys):
    code, out, _ = run(capsys, "blackout", "--d0", "50", "--Pt", "60", "--ell", "4")
    assert code == 0
    assert 0.0 < float(table(out)[0]["P_BO_analytic"]) < 0.05


@pytest.mark.parametrize(
    "argv",
    [
        ("blackout",),  # Poisson traffic
        ("throughput", "--Pt", "-3"),
        ("throughput", "-c", "/nonexistent.ini"),
        ("sweep", "--grid", "speed=1,2"),
        ("simulate", "--sources", "closest_only,all_within"),
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "error" in err


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_error_message_names_parameter(capsys):
    _, _, err = run(capsys, "throughput", "--Pt", "-3")
    assert "scenario" in err and "'Pt'" in err


def test_sweep_command(capsys):
    code, out, _ = run(capsys, "sweep", "--grid", "ell=1:3", "--grid", "Pt=20,40")
    assert code == 0
    rows = table(out)
    assert len(rows) == 6
    assert [r["ell_m"] for r in rows[:3]] == ["1", "2", "3"]


def test_validate_cdf(capsys):
    code, out, _ = run(capsys, "validate-cdf", "--draws", "20000", "--ell", "2")
    assert code == 0 and float(table(out)[0]["ks_distance"]) < 0.05


def test_reproduce_list(capsys):
    code, out, _ = run(capsys, "reproduce", "--list")
    assert code == 0 and "fig5" in out and "tradeoff" in out


def test_reproduce_quick(tmp_path, capsys):
    code, _, _ = run(capsys, "reproduce", "fig4", "--quick", "--out-dir", str(tmp_path))
    assert code == 0
    text = (tmp_path / "fig4.csv").read_text()
    assert text.startswith("# roadharvest") and "quick = true" in text
