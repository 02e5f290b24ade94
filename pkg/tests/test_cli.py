import json
import math
import subprocess
import sys

import numpy as np
import pytest

from measdisc.cli import emit_figure_data, main
from measdisc.io import dumps, format_float, read_matrix, write_matrix
from measdisc.qmat import haar_unitary, named_family


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def exit_code(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    return exc.value.code


def test_distance_hadamard(capsys):
    code, out, _ = run(["distance", "--family", "hadamard"], capsys)
    assert code == 0
    obj = json.loads(out)
    assert abs(obj["measurement_distance"] - math.sqrt(2)) < 1e-6
    assert obj["queries_for_perfect"] == 2


def test_queries_rotation(capsys):
    code, out, _ = run(["queries", "--family", "rotation", "--param", "0.6283185"], capsys)
    assert code == 0 and json.loads(out)["queries_for_perfect"] == 3


def test_queries_unbounded(capsys):
    code, out, _ = run(["queries", "--family", "identity", "--dim", "3"], capsys)
    assert code == 0 and json.loads(out)["queries_for_perfect"] == "unbounded"


def test_unambiguous_identity(capsys):
    code, out, _ = run(["unambiguous", "--family", "identity", "--assisted"], capsys)
    assert code == 0 and json.loads(out)["probability"] == 0.0


def test_unambiguous_hadamard_two_copies(capsys):
    code, out, _ = run(["unambiguous", "--family", "hadamard", "-N", "2"], capsys)
    obj = json.loads(out)
    assert code == 0 and obj["probability"] == 1.0
    assert obj["gamma"] == [1, 4] and obj["delta"] == [2, 3]


def test_discriminator(capsys):
    code, out, _ = run(["discriminator", "--family", "hadamard", "-N", "2"], capsys)
    obj = json.loads(out)
    assert code == 0 and obj["passed"] and obj["case"] == "perfect"
    assert obj["residual"] <= 1e-7


def test_discriminator_identity_fails(capsys):
    code, _, err = run(["discriminator", "--family", "identity"], capsys)
    assert code == 3 and "SaddleInfeasible" in err


def test_figure_multishot(capsys):
    code, out, _ = run(["figure", "--kind", "multishot_curve", "--family", "hadamard"], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "N,distance"
    vals = [tuple(float(t) for t in ln.split(",")) for ln in lines[1:]]
    assert [v[0] for v in vals] == [1, 2, 3, 4]
    assert abs(vals[0][1] - math.sqrt(2)) < 1e-6 and all(v[1] == 2 for v in vals[1:])


def test_figure_arc_geometry():
    header, rows = emit_figure_data("arc_geometry", named_family("hadamard"))
    assert header == ["quantity", "index", "value"]
    got = {r[0]: r[2] for r in rows if r[0] != "eigenphase"}
    assert abs(got["chord"] - math.sqrt(2)) < 1e-6
    assert abs(got["p_u_assisted"] - (1 - 1 / math.sqrt(2))) < 1e-6


def test_figure_haar_histogram(capsys):
    code, out, _ = run(["figure", "--kind", "haar_histogram", "--dim", "5", "--samples", "2000",
                        "--seed", "1"], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "bin_left,bin_right,count"
    assert sum(int(ln.split(",")[2]) for ln in lines[1:]) == 2000


def test_figure_histogram_needs_seed(capsys):
    code, _, _ = run(["figure", "--kind", "haar_histogram"], capsys)
    assert code == 2


def test_haar_study_csv_and_seed(capsys):
    assert exit_code(["haar-study", "--dim", "3"]) == 2
    code, out, _ = run(["haar-study", "--dim", "4", "--samples", "100", "--seed", "2",
                        "--format", "csv"], capsys)
    assert code == 0 and out.splitlines()[0] == "bin_left,bin_right,count"


def test_beta_check_warning(capsys):
    code, out, _ = run(["beta-check", "--dim", "3", "--samples", "10", "--seed", "0"], capsys)
    assert code == 3 and json.loads(out)["insufficient_samples"] is True


def test_adaptive_check(capsys, tmp_path):
    code, out, _ = run(["adaptive-check", "--family", "hadamard", "--seed", "3", "--trials", "4"], capsys)
    obj = json.loads(out)
    assert code == 0 and obj["violations"] == 0
    assert obj["max_adaptive_value"] <= obj["multishot_distance"] + 1e-8


def test_oracle(capsys):
    code, out, _ = run(["oracle", "--family", "hadamard", "--seed", "0", "--resolution", "200"], capsys)
    obj = json.loads(out)
    assert code == 0 and obj["difference"] < 5e-3
    assert abs(obj["grid_upsilon"] - math.pi / 2) < obj["grid_step"]


def test_usage_errors():
    assert exit_code(["distance"]) == 2
    assert exit_code(["distance", "--family", "hadamard", "--bogus"]) == 2
    assert exit_code(["distance", "--family", "nope"]) == 2
    assert exit_code(["distance", "--family", "hadamard", "--matrix", "x.json"]) == 2
    assert exit_code(["oracle", "--family", "hadamard"]) == 2
    assert exit_code(["adaptive-check", "--family", "hadamard"]) == 2


@pytest.mark.parametrize("content", [
    '{"d": 2, "re": [[1, 0], [0]], "im": [[0, 0], [0, 0]]}',
    '{"d": 2, "re": [[1, 0, 0], [0, 1, 0]], "im": [[0, 0, 0], [0, 0, 0]]}',
    '{"d": 3, "re": [[1, 0], [0, 1]], "im": [[0, 0], [0, 0]]}',
    '{"d": 2, "re": [[1, 0], [0, 1]]',
    '{"d": 2, "re": [[1, 0], [0, 2]], "im": [[0, 0], [0, 0]]}',
    '{"d": 2, "re": [["a", 0], [0, 1]], "im": [[0, 0], [0, 0]]}',
    '[1, 2]',
])
def test_malformed_matrix(tmp_path, capsys, content):
    path = tmp_path / "m.json"
    path.write_text(content)
    code, _, err = run(["distance", "--matrix", str(path)], capsys)
    assert code == 2 and "error" in err


def test_missing_matrix_file(tmp_path, capsys):
    code, _, _ = run(["distance", "--matrix", str(tmp_path / "absent.json")], capsys)
    assert code == 2


def test_unknown_family_param(capsys):
    code, _, _ = run(["distance", "--family", "rotation"], capsys)
    assert code == 2


def test_matrix_round_trip(tmp_path):
    for s in range(5):
        m = haar_unitary(3, s).matrix
        path = tmp_path / f"u{s}.json"
        write_matrix(path, m)
        assert np.array_equal(read_matrix(path), m)


def test_save_matrix_round_trip(tmp_path, capsys):
    path = tmp_path / "h.json"
    code, _, _ = run(["distance", "--family", "fourier", "--dim", "3", "--save-matrix", str(path)], capsys)
    assert code == 0
    assert np.array_equal(read_matrix(path), named_family("fourier", 3).matrix)
    # reading the saved file reproduces the report
    a = run(["distance", "--matrix", str(path)], capsys)[1]
    b = run(["distance", "--family", "fourier", "--dim", "3"], capsys)[1]
    assert a == b


def test_determinism(capsys):
    argv = ["haar-study", "--dim", "4", "--samples", "150", "--seed", "11"]
    a = run(argv, capsys)[1]
    b = run(argv, capsys)[1]
    assert a == b


def test_out_file(tmp_path, capsys):
    path = tmp_path / "r.json"
    code, out, _ = run(["queries", "--family", "hadamard", "--out", str(path)], capsys)
    assert code == 0 and out == ""
    assert json.loads(path.read_text())["queries_for_perfect"] == 2


def test_float_format():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(-0.0) == "0.0"
    assert format_float(2.0) == "2.0"
    assert float(format_float(math.pi)) == math.pi
    assert dumps({"a": [1.0, 2]}) == '{\n  "a": [1.0, 2]\n}\n'


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "measdisc.cli", "queries", "--family", "hadamard"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["queries_for_perfect"] == 2
