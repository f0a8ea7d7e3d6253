import json
import subprocess
import sys

import pytest

from opramsey.cli import main, parse_space


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_epi_count(capsys):
    code, out, _ = run(["epi", "count", "3", "2"], capsys)
    assert code == 0
    assert json.loads(out)["payload"] == {"count": 3}


def test_cbnorm_of_identity(capsys):
    code, out, _ = run(["cbnorm", "--map", '{"builtin": "identity", "space": "M2"}', "--no-witness"], capsys)
    assert code == 0
    assert json.loads(out)["payload"]["value"] == pytest.approx(1.0, abs=1e-6)


def test_infeasible_sdp_is_a_result_not_an_error(tmp_path, capsys):
    prob = {
        "block_dims": [1],
        "objective": [{"rows": 1, "cols": 1, "data": [[1.0, 0.0]]}],
        "constraints": [{"coeffs": [{"rows": 1, "cols": 1, "data": [[1.0, 0.0]]}], "rhs": -1.0}],
    }
    f = tmp_path / "p.json"
    f.write_text(json.dumps(prob))
    code, out, _ = run(["sdp", "solve", "--in", f"@{f}"], capsys)
    assert code == 0
    assert json.loads(out)["payload"]["status"] == "infeasible"


@pytest.mark.parametrize(
    "argv,code",
    [
        (["bogus"], 64),
        (["epi"], 64),
        (["epi", "list", "10", "3", "--limit", "5"], 3),
        (["cbnorm", "--map", '{"builtin": "identity", "space": "nope"}'], 2),
        (["sdp", "solve", "--in", "@/nonexistent.json"], 2),
    ],
)
def test_exit_codes(argv, code, capsys):
    assert run(argv, capsys)[0] == code


def test_replay_is_identical(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["amalgamate", "--x", "linf1", "--y", "linf2", "--z", "linf2", "--class", "Osy",
                 "--delta", "0.05", "--seed", "3", "--out", str(out)]) == 0
    code, text, _ = run(["replay", str(out)], capsys)
    assert code == 0
    assert json.loads(text)["payload"]["identical"] is True


def test_replay_detects_tampering(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["epi", "count", "4", "2", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    rep["payload"]["count"] = 8
    out.write_text(json.dumps(rep))
    code, text, _ = run(["replay", str(out)], capsys)
    assert code == 1
    assert json.loads(text)["payload"]["identical"] is False


def test_csv_format(capsys):
    code, out, _ = run(["choi", "--map", '{"builtin": "transpose", "q": 2}', "--format", "csv"], capsys)
    assert code == 0
    assert out.splitlines()[1] == "row,col,re,im"


def test_space_shorthand():
    assert parse_space("M2,3").blocks == ((2, 3),)
    assert parse_space("linf2(M2)").blocks == ((2, 2), (2, 2))
    assert parse_space("osy:linf3").category == "Osy"


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "opramsey.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
