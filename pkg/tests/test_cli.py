import json
import os

import pytest

from iqswitch.cli import (
    CSV_HEADER,
    REFERENCE_MAX_THROUGHPUT,
    _warn_expensive,
    build_parser,
    derive_seed,
    main,
)


def run_cli(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestRun:
    def test_smoke_row(self, capsys):
        code, out, err = run_cli(
            ["run", "--alg", "swqps", "--pattern", "uniform", "--n", "8",
             "--t", "8", "--load", "0.5", "--seed", "1",
             "--max-slots", "20000"], capsys)
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == CSV_HEADER
        fields = lines[1].split(",")
        assert fields[:8] == ["swqps", "uniform", "8", "8", "0.5",
                              "bernoulli", "", "1"]
        assert fields[12] == "true"
        assert len(fields) == len(CSV_HEADER.split(","))

    def test_bad_load_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--load", "1.5"])
        assert exc.value.code == 2
        err = capsys.readouterr().err
        assert "load must be in [0,1]" in err

    def test_bad_algorithm_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--alg", "serena"])
        assert exc.value.code == 2

    def test_mwm_large_n_accepted_with_warning(self):
        args = build_parser().parse_args(
            ["run", "--alg", "mwm", "--n", "512"])
        assert args.alg == "mwm" and args.n == 512
        with pytest.warns(RuntimeWarning, match="O\\(N\\^3\\)"):
            _warn_expensive("mwm", 512)

    def test_out_file(self, tmp_path, capsys):
        out = tmp_path / "row.csv"
        code, stdout, _ = run_cli(
            ["run", "--alg", "islip", "--n", "4", "--load", "0.4",
             "--max-slots", "8000", "--out", str(out)], capsys)
        assert code == 0
        assert out.read_text() == stdout


class TestSweep:
    def test_grid_shape_and_determinism(self, tmp_path, capsys):
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        argv = ["sweep", "--algs", "swqps,islip", "--patterns",
                "uniform,diag", "--loads", "0.3,0.6", "--ns", "4",
                "--ts", "4", "--seed", "5", "--max-slots", "4000",
                "--workers", "2"]
        code1, _, err1 = run_cli(argv + ["--out", str(out1)], capsys)
        code2, _, _ = run_cli(argv + ["--out", str(out2)], capsys)
        assert code1 == code2 == 0
        rows1 = out1.read_text().splitlines()
        assert rows1[0] == CSV_HEADER
        assert len(rows1) == 1 + 2 * 2 * 2
        assert out1.read_text() == out2.read_text()
        assert "done" in err1

    def test_replications_use_distinct_seeds(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        code, _, _ = run_cli(
            ["sweep", "--algs", "islip", "--patterns", "uniform",
             "--loads", "0.5", "--ns", "4", "--ts", "4", "--reps", "3",
             "--max-slots", "4000", "--workers", "1", "--out", str(out)],
            capsys)
        assert code == 0
        rows = out.read_text().splitlines()[1:]
        seeds = [r.split(",")[7] for r in rows]
        assert len(rows) == 3
        assert len(set(seeds)) == 3

    def test_unwritable_output_fails_before_running(self, capsys):
        code, _, err = run_cli(
            ["sweep", "--algs", "islip", "--patterns", "uniform",
             "--loads", "0.5", "--ns", "4",
             "--out", "/nonexistent-dir/x.csv"], capsys)
        assert code == 3
        assert "not writable" in err

    def test_spec_file(self, tmp_path, capsys):
        spec = {"algs": ["islip"], "patterns": ["uniform"],
                "loads": [0.2, 0.4], "ns": [4], "ts": [4],
                "reps": 1, "seed": 9, "max_slots": 4000,
                "out": str(tmp_path / "s.csv")}
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(spec))
        code, _, _ = run_cli(["sweep", "--spec", str(path), "--workers", "1"],
                             capsys)
        assert code == 0
        rows = (tmp_path / "s.csv").read_text().splitlines()
        assert len(rows) == 3

    def test_unknown_algorithm_in_grid(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["sweep", "--algs", "bogus", "--out", "/tmp/x.csv"])
        assert exc.value.code == 2


class TestTable1:
    def test_reference_values_shape(self):
        assert set(REFERENCE_MAX_THROUGHPUT) == {"swqps", "sbqps", "islip",
                                                 "qps1"}
        for row in REFERENCE_MAX_THROUGHPUT.values():
            assert set(row) == {"uniform", "quasidiag", "logdiag", "diag"}

    def test_small_scale_table(self, tmp_path, capsys):
        # tiny N and horizon: exercises the plumbing, not the values
        out = tmp_path / "t.csv"
        code, stdout, _ = run_cli(
            ["table1", "--n", "4", "--t", "4", "--slots", "3000",
             "--workers", "1", "--out", str(out)], capsys)
        assert code == 0
        assert "largest absolute deviation" in stdout
        rows = out.read_text().splitlines()
        assert rows[0] == "algorithm,pattern,measured,reference,deviation"
        assert len(rows) == 17


class TestSeedDerivation:
    def test_stable_and_distinct(self):
        a = derive_seed(1, "swqps", "uniform", 64, 16, 0.5, "bernoulli", None, 0)
        b = derive_seed(1, "swqps", "uniform", 64, 16, 0.5, "bernoulli", None, 0)
        c = derive_seed(1, "swqps", "uniform", 64, 16, 0.5, "bernoulli", None, 1)
        d = derive_seed(2, "swqps", "uniform", 64, 16, 0.5, "bernoulli", None, 0)
        assert a == b
        assert len({a, c, d}) == 3
