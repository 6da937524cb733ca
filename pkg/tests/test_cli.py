import io
import json

import pytest

from l2stream.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, REPORT_FIELDS, SEED_ENV, main

SMALL = ["--C", "2", "--rows", "3", "--groups", "1", "--buckets", "256"]


def run_cli(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_run_zero_updates_reports_failure(tmp_path):
    f = write(tmp_path, "z.txt", "SAMPLER-STREAM v1\nmodel=m1 n=8 d=1 eps=0.25 seed=1 R=20\nXVEC 1\nQ\n")
    code, out = run_cli("run", f, *SMALL)
    assert code == EXIT_FAIL
    assert json.loads(out)["error"] == "AllRepetitionsFailed"


def test_run_one_sparse_and_determinism(tmp_path):
    f = write(tmp_path, "s.txt", "SAMPLER-STREAM v1\nmodel=m1 n=8 d=1 eps=0.25 seed=1 R=500\n"
                                 "XVEC 1\nU A 6 1 4\nQ\nU A 2 1 1\nU A 2 1 -1\nQ\n")
    code, out = run_cli("run", f, *SMALL)
    assert code == EXIT_OK
    recs = [json.loads(line) for line in out.splitlines()]
    assert [r["index"] for r in recs] == [6, 6]
    assert recs[0]["estimate"] == pytest.approx(4.0)
    assert run_cli("run", f, *SMALL)[1] == out


def test_run_tensor_pairs(tmp_path):
    f = write(tmp_path, "t.txt", "SAMPLER-STREAM v1\nmodel=tensor n=2 d=2 eps=0.25 seed=3 R=500\n"
                                 "XVEC 1 0 0 0\nA2ROW 1 1 0\nA2ROW 2 0 1\nU A1 2 1 1\nQ\n")
    code, out = run_cli("run", f, *SMALL)
    assert code == EXIT_OK
    assert json.loads(out)["index"] == [2, 1]


def test_input_errors_exit_2(tmp_path, capsys):
    bad = write(tmp_path, "b.txt", "SAMPLER-STREAM v1\nmodel=m1 n=4 d=1 eps=0.25 seed=1\nU B 1 1 1\n")
    assert run_cli("run", bad)[0] == EXIT_INPUT
    assert "line 3" in capsys.readouterr().err
    assert run_cli("run", str(tmp_path / "missing.txt"))[0] == EXIT_INPUT
    with pytest.raises(SystemExit) as e:
        main(["nope"])
    assert e.value.code == 2


def test_verify_dist_vector_report():
    code, out = run_cli("verify-dist", "--vector", "3", "4", "--trials", "3000", "--seed", "5", *SMALL)
    rep = json.loads(out)
    assert code == EXIT_OK and rep["pass"]
    assert set(REPORT_FIELDS) <= set(rep)
    assert sum(rep["frequencies"]) == pytest.approx(1.0)
    assert rep["exact"] == [0.36, 0.64]
    again = json.loads(run_cli("verify-dist", "--vector", "3", "4", "--trials", "3000", "--seed", "5", *SMALL)[1])
    rep.pop("wall_seconds"), again.pop("wall_seconds")
    assert rep == again


def test_verify_dist_index_bit0(tmp_path):
    code, text = run_cli("gen", "index", "--d", "8", "--i", "3", "--bit", "0", "--seed", "2", "--R", "500")
    f = write(tmp_path, "i.txt", text)
    code, out = run_cli("verify-dist", f, "--trials", "200", *SMALL)
    rep = json.loads(out)
    assert rep["frequencies"][8] >= 0.95


def test_verify_dist_softmax(tmp_path):
    _, text = run_cli("gen", "disjointness", "--n", "16", "--set-a", "2", "5", "--set-b", "5", "7")
    f = write(tmp_path, "d.txt", text)
    code, out = run_cli("verify-dist", f, "--sampler", "softmax", "--trials", "5000", "--tv-threshold", "0.02")
    rep = json.loads(out)
    assert code == EXIT_OK and rep["frequencies"][4] >= 0.75


def test_verify_dist_failure_exit(tmp_path):
    code, out = run_cli("verify-dist", "--vector", "1", "1", "1", "1", "--trials", "50",
                        "--tv-threshold", "0.0001", "--seed", "1", *SMALL)
    assert code == EXIT_FAIL and json.loads(out)["pass"] is False


def test_gen_seed_env_and_flag(monkeypatch):
    args = ["gen", "random", "--model", "m1", "--n", "8", "--d", "2", "--updates", "20"]
    monkeypatch.setenv(SEED_ENV, "41")
    env = run_cli(*args)[1]
    assert "seed=41" in env.splitlines()[1]
    assert run_cli(*args)[1] == env
    flag = run_cli(*args, "--seed", "3")[1]
    assert "seed=3" in flag.splitlines()[1] and flag != env
    monkeypatch.setenv(SEED_ENV, "oops")
    assert run_cli(*args)[0] == EXIT_INPUT


def test_gen_index_replays_to_planted(tmp_path):
    _, text = run_cli("gen", "index", "--d", "32", "--i", "7", "--bit", "1", "--R", "800", "--C", "2",
                      "--rows", "3", "--groups", "1", "--buckets", "256")
    code, out = run_cli("run", write(tmp_path, "g.txt", text))
    assert code == EXIT_OK and json.loads(out)["index"] == 7


def test_bench_update_table():
    code, out = run_cli("bench-update", "--model", "m2", "--n", "64", "128", "--updates", "20", "--R", "4")
    rep = json.loads(out)
    assert code == EXIT_OK
    assert [r["n"] for r in rep["results"]] == [64, 128]
    assert all(r["ns_per_update"] > 0 for r in rep["results"])
