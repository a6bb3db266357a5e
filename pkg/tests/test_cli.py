import json
import subprocess
import sys

import pytest

from mpclp.cli import RunRecord, dumps, main
from mpclp.instance import read_instance
from mpclp.oracle import enumerate_optimal


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_json_matches_oracle(data_dir, capsys):
    path = f"{data_dir}/toy4.native"
    code, out, _ = run(["solve", "--instance", path, "--k", "2", "--theta", "0", "--output", "json"], capsys)
    assert code == 0
    rec = json.loads(out)
    value, _ = enumerate_optimal(read_instance(path, "native", 2, 0.0))
    assert rec["best_value"] == pytest.approx(value, abs=1e-9)
    assert rec["status"] == "optimal"


def test_vanilla_versus_full_setting(data_dir, capsys):
    path = f"{data_dir}/toy6.native"
    recs = []
    for cuts in ("submodular,oa", "submodular,eoa,ls"):
        code, out, _ = run(["solve", "--instance", path, "--k", "3", "--cuts", cuts, "--output", "json"], capsys)
        assert code == 0
        recs.append(json.loads(out))
    assert recs[0]["best_value"] == pytest.approx(recs[1]["best_value"], abs=1e-9)
    assert recs[1]["root_lpg_pct"] <= recs[0]["root_lpg_pct"] + 1e-9
    assert recs[0]["setting"] == "vanilla" and recs[1]["setting"] == "+E+L"


def test_missing_k_is_usage_error(data_dir, capsys):
    code, _, err = run(["solve", "--instance", f"{data_dir}/toy4.native"], capsys)
    assert code == 1 and "--k" in err


def test_unreadable_file_and_bad_flags(capsys):
    assert run(["solve", "--instance", "/nonexistent.native", "--k", "2"], capsys)[0] == 1
    assert run(["solve", "--instance", "x", "--k", "two"], capsys)[0] == 1
    assert run(["verify", "--suite", "nope"], capsys)[0] == 1
    assert run(["bench", "--instances", "/nonexistent/*.native"], capsys)[0] == 1


def test_pmed_needs_theta(data_dir, capsys):
    assert run(["solve", "--instance", f"{data_dir}/tiny.pmed", "--format", "pmed", "--k", "2"], capsys)[0] == 1
    code, out, _ = run(
        ["solve", "--instance", f"{data_dir}/tiny.pmed", "--format", "pmed", "--k", "2", "--theta", "0.2", "--output", "json"],
        capsys,
    )
    assert code == 0 and json.loads(out)["best_value"] == pytest.approx(4.923555555555556, abs=1e-9)


def test_time_limit_exit_code(data_dir, capsys):
    code, out, _ = run(["solve", "--instance", f"{data_dir}/toy6.native", "--k", "3", "--time-limit", "1e-9"], capsys)
    assert code in (0, 2)
    assert ("time_limit" in out) == (code == 2)


def test_json_round_trip_and_byte_identical(data_dir, capsys):
    args = ["solve", "--instance", f"{data_dir}/toy6.native", "--k", "3", "--output", "json", "--omit-timing", "--seed", "3"]
    _, a, _ = run(args, capsys)
    _, b, _ = run(args, capsys)
    assert a == b
    rec = RunRecord.from_dict(json.loads(a))
    assert dumps(rec.to_dict()) + "\n" == a


def test_table_output_and_verbose_log(data_dir, capsys, tmp_path):
    lp_path = tmp_path / "relax.lp"
    code, out, err = run(
        ["solve", "--instance", f"{data_dir}/toy6.native", "--k", "3", "--verbose", "--write-lp", str(lp_path)], capsys
    )
    assert code == 0 and "best_value" in out
    first = json.loads(err.splitlines()[0])
    assert set(first) == {"node", "depth", "bound", "cuts", "incumbent"}
    assert lp_path.read_text().startswith("\\ toy6\nMaximize")


def test_bench_default_grid_two_settings(data_dir, capsys, tmp_path):
    out_json = tmp_path / "bench.json"
    code, out, _ = run(
        ["bench", "--instances", f"{data_dir}/toy*.native", "--settings", "vanilla;+E+L", "--json-out", str(out_json), "--omit-timing"],
        capsys,
    )
    assert code == 0
    doc = json.loads(out_json.read_text())
    assert len(doc["records"]) == 24
    assert {(r["theta"], r["setting"]) for r in doc["records"]} == {
        (t, s) for t in (0.2, 0.5, 0.8) for s in ("vanilla", "+E+L")
    }
    rows = doc["summary"]
    assert len(rows) == 4 and all(r["runs"] == 6 and r["S"] == 6 for r in rows)
    assert "setting" in out.splitlines()[0]


def test_bench_parallel_matches_sequential(data_dir, capsys):
    base = ["bench", "--instances", f"{data_dir}/toy4.native", "--settings", "+E", "--thetas", "0.5", "--output", "json", "--omit-timing"]
    _, seq, _ = run(base, capsys)
    _, par, _ = run(base + ["--jobs", "2"], capsys)
    assert seq == par


def test_bench_aggregates_over_solved_only():
    from mpclp.cli import aggregate

    def rec(status, t, n, gap):
        return RunRecord("a", None, None, 0.5, 2, "vanilla", status, 1.0, [1], 1.0, gap, n, {}, 1.0, 0.0, t, 3, 3, 12)

    rows = aggregate([rec("optimal", 1.0, 10, 0.0), rec("optimal", 3.0, 30, 0.0), rec("time_limit", 100.0, 999, 4.0)])
    assert rows[0]["S"] == 2 and rows[0]["T"] == 2.0 and rows[0]["N"] == 20.0 and rows[0]["G"] == 4.0


def test_verify_suites(capsys):
    code, out, _ = run(["verify", "--suite", "lemmas", "--cases", "1000"], capsys)
    assert code == 0 and out.startswith("PASS lemmas")
    code, out, _ = run(["verify", "--suite", "facets", "--cases", "30"], capsys)
    assert code == 0
    code, out, _ = run(["verify", "--suite", "oracle", "--cases", "20"], capsys)
    assert code == 0
    code, out, _ = run(["verify", "--suite", "cuts", "--cases", "20", "--dump-cuts"], capsys)
    assert code == 0
    dumps_ = [json.loads(l) for l in out.splitlines() if l.startswith("{")]
    assert dumps_ and all(d["violation"] <= 1e-9 for d in dumps_)
    assert {"kind", "customer", "rhs", "y", "z", "violation"} <= set(dumps_[0])


def test_module_entry_point(data_dir):
    proc = subprocess.run(
        [sys.executable, "-m", "mpclp", "solve", "--instance", f"{data_dir}/toy4.native", "--k", "2", "--output", "json"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["status"] == "optimal"


def test_time_limit_env(monkeypatch, data_dir, capsys):
    monkeypatch.setenv("MPCLP_TIME_LIMIT", "1e-9")
    code, _, _ = run(["solve", "--instance", f"{data_dir}/toy6.native", "--k", "3"], capsys)
    assert code in (0, 2)
