import json

import pytest

from ghostspec.cli import InputError, format_complex, main, parse_complex


@pytest.mark.parametrize("text,value", [
    ("26.9376+6.9215i", 26.9376 + 6.9215j), ("3.8741i", 3.8741j), ("-2", -2 + 0j),
    ("1-i", 1 - 1j), ("-i", -1j), ("1e-3+2.5E1i", 0.001 + 25j), (" 4 - 2i ", 4 - 2j)])
def test_parse_complex(text, value):
    assert parse_complex(text) == value


@pytest.mark.parametrize("text", ["", "abc", "1+2", "1+2j", "i+1", "2ii"])
def test_parse_complex_rejects(text):
    with pytest.raises(InputError):
        parse_complex(text)


def test_format_round_trip():
    z = 26.93763187833925 + 6.921499468727206j
    assert parse_complex(format_complex(z)) == pytest.approx(z, rel=1e-9)


def test_examples_list(capsys):
    assert main(["examples", "list"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 4
    assert lines[0].startswith("exa1") and "q=40" in lines[0] and "26.9376+6.9215i" in lines[0]
    assert lines[3].startswith("exa4") and "±3.8741i" in lines[3]


def test_solve_json(tmp_path):
    out = tmp_path / "s.json"
    code = main(["solve", "--example", "exa1", "--box", "0,60,0.5,30", "--out", str(out)])
    assert code == 0
    d = json.loads(out.read_text())
    assert d["M"] == 1 and d["N"] == 4 and d["bound_ok"]
    lam = complex(d["nonreal"][0]["re"], d["nonreal"][0]["im"])
    assert abs(lam - (26.9376 + 6.9215j)) < 1e-3


def test_solve_csv_deterministic(tmp_path, capsys):
    args = ["solve", "--example", "exa2", "--box=-5,5,0.5,30", "--format", "csv"]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert main(args) == 0
    assert capsys.readouterr().out == first
    assert first.splitlines()[0] == "kind,re,im,residual,multiplicity"


def test_input_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", "--problem", str(bad)]) == 2
    bad.write_text(json.dumps({"a": 1, "b": 0}))
    assert main(["solve", "--problem", str(bad)]) == 2
    assert main(["solve", "--problem", str(tmp_path / "missing.json")]) == 2
    assert main(["solve", "--example", "exa1", "--box", "0,1,-1,2"]) == 2
    assert main(["solve", "--example", "nope"]) == 2
    assert main(["analyze", "--example", "exa1", "--lambda", "5"]) == 2
    assert main(["analyze", "--example", "exa1", "--lambda", "x+yi"]) == 2
    assert main(["verify"]) == 2
    assert main(["solve"]) == 2
    capsys.readouterr()


def test_problem_file_round_trip(tmp_path, examples):
    f = tmp_path / "p.json"
    f.write_text(examples["exa4"].problem.to_json())
    assert main(["solve", "--problem", str(f), "--box=-5,5,0.5,20",
                 "--out", str(tmp_path / "o.json")]) == 0
    assert "3.874" in (tmp_path / "o.json").read_text()


def test_analyze_writes_table(tmp_path):
    out = tmp_path / "g.json"
    code = main(["analyze", "--example", "exa3", "--lambda", "6.2962i", "--out", str(out)])
    assert code == 0
    d = json.loads(out.read_text())
    assert d["G_sign"] == "negative"
    rows = (tmp_path / "g.csv").read_text().splitlines()
    assert rows[0] == "x,phi,psi,G"
    assert len(rows) - 1 >= 1000


def test_analyze_csv_to_stdout(capsys):
    assert main(["analyze", "--example", "exa1", "--lambda", "26.9376+6.9215i",
                 "--format", "csv"]) == 0
    assert capsys.readouterr().out.startswith("x,phi,psi,G\n")


def test_plotdata(capsys):
    assert main(["plotdata", "--example", "exa2", "--lambda", "12.3076i", "--refine",
                 "--samples", "11"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "x,Re y,Im y,Re y',Im y'"
    assert len(lines) == 12
    assert [float(v) for v in lines[1].split(",")[1:3]] == [0.0, 0.0]


def test_verify_example(capsys):
    assert main(["verify", "--example", "exa2"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("PASS exa2") and "1/1 passed" in out


def test_verify_random_small(capsys):
    assert main(["verify", "--random", "3", "--seed", "11"]) == 0
    assert "3/3 passed" in capsys.readouterr().out
