import csv
import io
import json
from fractions import Fraction

import pytest

from combcache.cli import CURVE_HEADER, EXIT_FAIL, EXIT_OK, EXIT_USAGE, main

NET42 = ["--relays", "4", "--degree", "2", "--files", "6"]


def run(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:  # argparse rejects malformed command lines itself
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("t, scheme, load", [("2", "base", "7/15"), ("3", "improved", "47/160"),
                                             ("3", "base", "3/10")])
def test_plan_summary_and_json(capsys, t, scheme, load):
    code, out, err = run(capsys, "plan", *NET42, "--t", t, "--scheme", scheme)
    assert code == EXIT_OK
    assert f"max_link_load={load}" in err
    data = json.loads(out)
    assert data["max_link_load"] == load
    assert data["params"]["scheme"] == scheme


def test_plan_single_user(capsys):
    code, _, err = run(capsys, "plan", "--relays", "3", "--degree", "3", "--files", "1", "--t", "0")
    assert code == EXIT_OK and "max_link_load=1/3" in err


def test_plan_to_file(capsys, tmp_path):
    path = tmp_path / "p.json"
    code, out, _ = run(capsys, "plan", *NET42, "--t", "2", "--out", str(path))
    assert code == EXIT_OK and "7/15" in out
    assert json.loads(path.read_text())["file_packets"] > 0


def test_verify_params(capsys):
    code, out, _ = run(capsys, "verify", *NET42, "--t", "3", "--scheme", "improved")
    assert code == EXIT_OK and "PASS" in out


def test_verify_plan_file_and_tampering(capsys, tmp_path):
    path = tmp_path / "p.json"
    assert main(["plan", *NET42, "--t", "2", "--out", str(path)]) == EXIT_OK
    capsys.readouterr()
    code, out, _ = run(capsys, "verify", "--plan", str(path))
    assert code == EXIT_OK and "PASS" in out

    data = json.loads(path.read_text())
    victim = next(e["id"] for e in data["transmissions"] if e["link"]["type"] == "server_relay")
    data["transmissions"] = [e for e in data["transmissions"] if e["id"] != victim]
    path.write_text(json.dumps(data))
    code, out, _ = run(capsys, "verify", "--plan", str(path))
    assert code == EXIT_FAIL
    assert "UNDECODABLE" in out and "FAIL" in out


def test_verify_rejects_edited_lengths(capsys, tmp_path):
    path = tmp_path / "p.json"
    main(["plan", *NET42, "--t", "2", "--out", str(path)])
    data = json.loads(path.read_text())
    data["transmissions"][0]["length_pkts"] += 1
    path.write_text(json.dumps(data))
    capsys.readouterr()
    assert run(capsys, "verify", "--plan", str(path))[0] == EXIT_USAGE


def test_verify_grid(capsys, tmp_path):
    out_csv = tmp_path / "grid.csv"
    code, out, _ = run(capsys, "verify", "--grid", "--min-relays", "2", "--max-relays", "3",
                       "--max-degree", "2", "--out", str(out_csv))
    assert code == EXIT_OK
    rows = list(csv.DictReader(out_csv.open()))
    assert rows and all(r["ok"] == "1" for r in rows)


@pytest.mark.parametrize("argv", [
    ["plan", *NET42, "--t", "9"],
    ["plan", "--relays", "2", "--degree", "3", "--files", "1", "--t", "0"],
    ["plan", *NET42, "--t", "2", "--demand", "1,2,3"],
    ["plan", *NET42, "--t", "2", "--demand", "1,2,3,4,5,7"],
    ["plan", *NET42],
    ["verify", *NET42],
    ["verify", "--plan", "/nonexistent/plan.json"],
    ["curve", *NET42, "--schemes", "fancy"],
    ["curve", *NET42, "--M", "9"],
    ["frobnicate"],
])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == EXIT_USAGE


def parse_curve(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


def frac(row, name):
    i = CURVE_HEADER.index(name + "_num")
    return Fraction(int(row[i]), int(row[i + 1]))


def test_curve_header_is_exact(capsys):
    code, out, _ = run(capsys, "curve", *NET42)
    assert code == EXIT_OK
    assert out.splitlines()[0] == (
        "t,M_num,M_den,load_base_num,load_base_den,load_improved_num,load_improved_den,"
        "eq4_num,eq4_den,cutset_num,cutset_den,gap_num,gap_den")


def test_curve_small_values(capsys):
    _, rows = parse_curve(run(capsys, "curve", *NET42)[1])
    by_t = {r[0]: r for r in rows}
    assert frac(by_t["2"], "load_base") == Fraction(7, 15)
    assert frac(by_t["3"], "load_base") == Fraction(3, 10)
    assert frac(by_t["3"], "load_improved") == Fraction(47, 160)
    assert frac(by_t["2"], "eq4") == Fraction(2, 3)
    assert frac(by_t["2"], "gap") == Fraction(7, 5)
    assert frac(by_t["0"], "load_base") == Fraction(3, 2)


def test_curve_off_grid_memory(capsys):
    _, rows = parse_curve(run(capsys, "curve", *NET42, "--M", "5/2", "--schemes", "base")[1])
    assert len(rows) == 1 and rows[0][0] == "~5/2"
    assert frac(rows[0], "load_base") == (Fraction(7, 15) + Fraction(3, 10)) / 2
    assert rows[0][CURVE_HEADER.index("load_improved_num")] == ""


def test_curve_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["curve", *NET42, "--out", str(a)]) == EXIT_OK
    assert main(["curve", *NET42, "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_bounds(capsys):
    code, out, _ = run(capsys, "bounds", *NET42)
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 7
    row = next(r for r in rows if r["t"] == "2")
    assert row["load"] == "7/15" and row["eq4"] == "2/3" and row["within"] == "1"
