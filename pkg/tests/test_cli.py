import csv
import io
import json
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from moebius_lab.cli import GridSpec, RunConfig, run


def run_capture(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture(scope="module")
def table_path(tmp_path_factory, small_table):
    path = tmp_path_factory.mktemp("tables") / "t.bin"
    small_table.save(path)
    return str(path)


class TestCommands:
    def test_g_eval(self, capsys):
        code, out, _ = run_capture(capsys, "g-eval", "--x", "3", "--nmax", "100")
        assert code == 0
        (row,) = rows(out)
        assert float(row["value"]) == pytest.approx(1 / 6, abs=1e-16)
        assert list(row) == ["x", "value", "error", "engine", "flags"]

    def test_riesz_small_x(self, capsys):
        code, out, _ = run_capture(capsys, "riesz", "--x", "1e-6", "--tolerance", "1e-12")
        assert code == 0
        (row,) = rows(out)
        assert float(row["value"]) == pytest.approx(6.0793e-7, rel=1e-4)
        assert float(row["error"]) <= 1e-12

    def test_hardy_grid(self, capsys):
        code, out, _ = run_capture(capsys, "hardy", "--grid", "1:10:4:log")
        assert code == 0 and len(rows(out)) == 4

    def test_star_alpha_is_riesz(self, capsys):
        _, out, _ = run_capture(capsys, "star", "--phi", "alpha", "--x", "1")
        assert float(rows(out)[0]["value"]) == pytest.approx(0.0439818046882665, abs=1e-12)

    def test_star_coefficient_file(self, capsys, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("1 1\n")
        _, out, _ = run_capture(capsys, "star", "--phi", str(path), "--x", "1")
        assert float(rows(out)[0]["value"]) == pytest.approx(0.6079271018540267, abs=1e-15)

    def test_sieve_save_and_env_load(self, capsys, tmp_path, monkeypatch):
        path = tmp_path / "d.bin"
        code, out, _ = run_capture(capsys, "sieve", "--nmax", "10", "--save", str(path))
        assert code == 0 and "mu=1;M=-1" in out
        monkeypatch.setenv("MOEBIUS_LAB_TABLE", str(path))
        code, out, _ = run_capture(capsys, "g-eval", "--x", "10")
        assert code == 0 and float(rows(out)[0]["value"]) == pytest.approx(19 / 210, abs=1e-16)

    def test_gconv_from_dump(self, capsys, table_path):
        code, out, _ = run_capture(capsys, "gconv", "--load", table_path, "--x", "1", "--phi", "beta",
                                   "--tolerance", "1e-4")
        assert code == 0 and rows(out)[0]["engine"] == "gconv:u-pieces"

    def test_l2_diag_json(self, capsys, table_path):
        code, out, _ = run_capture(capsys, "l2-diag", "--load", table_path, "--grid", "10:10000:4:log",
                                   "--format", "json")
        doc = json.loads(out)
        assert code == 0 and doc["report"]["cutoffs"] == [10, 100, 1000, 10000]
        assert doc["columns"] == ["x", "value", "error", "engine", "flags"]

    def test_fit_decay(self, capsys, table_path):
        code, out, _ = run_capture(capsys, "fit-decay", "--load", table_path, "--target", "g",
                                   "--grid", "100:10000:200:log")
        assert code == 0 and rows(out)[0]["engine"] == "table:g"

    def test_scan_signs(self, capsys):
        code, out, _ = run_capture(capsys, "scan-signs", "--target", "riesz", "--grid", "0.5:3:60:log")
        assert code == 0
        assert all(r["flags"] in ("counted", "uncertain") for r in rows(out))

    def test_mellin_g(self, capsys, table_path):
        code, out, _ = run_capture(capsys, "mellin", "--load", table_path, "--s", "0.5", "--x", "100",
                                   "--phi", "alpha", "--tolerance", "1e-3")
        assert code == 0
        g, a, ga = rows(out)
        assert [r["engine"] for r in (g, a, ga)] == ["mellin:g-telescoped", "mellin:alpha", "mellin:Galpha-split"]
        product = float(g["value"]) * float(a["value"])
        assert abs(float(ga["value"]) - product) <= float(ga["error"]) + 2 * float(g["error"])

    def test_mellin_outside_strip_exits_3(self, capsys, table_path):
        code, _, err = run_capture(capsys, "mellin", "--load", table_path, "--s", "2", "--phi", "alpha")
        assert code == 3 and "ContractError" in err

    def test_output_file(self, capsys, tmp_path):
        out = tmp_path / "o.csv"
        assert run(["riesz", "--x", "1", "--output", str(out)]) == 0
        assert out.read_text().startswith("x,value,error,engine,flags\n")


class TestExitCodes:
    @pytest.mark.parametrize("argv", [
        ["riesz"],
        ["riesz", "--grid", "1:2:x:log"],
        ["riesz", "--grid", "0:2:3:log"],
        ["nope"],
        ["riesz", "--x", "1", "--tolerance", "-1"],
        ["mellin", "--nmax", "10"],
    ])
    def test_usage_errors(self, capsys, argv):
        assert run(argv) == 2

    def test_compute_error(self, capsys):
        code, _, err = run_capture(capsys, "g-eval", "--x", "200", "--nmax", "100")
        assert code == 3 and "RangeError" in err

    def test_tail_error_names_bound(self, capsys, table_path):
        code, _, err = run_capture(capsys, "gconv", "--load", table_path, "--x", "500", "--phi", "alpha",
                                   "--tolerance", "1e-12")
        assert code == 3 and "K >=" in err

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "moebius_lab", "g-eval", "--x", "2.5", "--nmax", "10"],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0 and "0.5" in proc.stdout


class TestDeterminism:
    def test_identical_output(self, capsys, table_path):
        argv = ["gconv", "--load", table_path, "--grid", "0.5:4:6:log", "--phi", "beta", "--tolerance", "1e-4",
                "--format", "json"]
        assert run(argv + ["--threads", "1"]) == 0
        a = capsys.readouterr().out
        assert run(argv + ["--threads", "4"]) == 0
        b = capsys.readouterr().out
        assert a == b


class TestRunConfig:
    def test_round_trip_example(self):
        cfg = RunConfig("mellin", 1000, 160, 1e-9, 1e-10, GridSpec(1.0, 10.0, 5, "log"), (1.5,), (1j, 2 + 0j),
                        (1.0,), "alpha", "", "json", "out.json")
        assert RunConfig.from_canonical(cfg.canonical()) == cfg

    @given(
        st.sampled_from(["riesz", "gconv", "verify", "l2-diag"]),
        st.integers(1, 10**8),
        st.floats(1e-30, 1, allow_nan=False),
        st.lists(st.floats(1e-6, 1e6, allow_nan=False), max_size=4),
        st.one_of(st.none(), st.tuples(st.floats(1e-3, 1.0), st.floats(1.0, 1e4), st.integers(2, 500),
                                       st.sampled_from(["log", "lin"]))),
        st.sampled_from(["alpha", "beta", "coeffs.txt"]),
        st.sampled_from(["csv", "json"]),
    )
    def test_round_trip(self, sub, nmax, tol, xs, grid, phi, fmt):
        g = GridSpec(*grid) if grid and grid[0] < grid[1] else None
        cfg = RunConfig(sub, nmax, 128, tol, 1e-8, g, tuple(xs), (), (), phi, "", fmt, "-")
        assert RunConfig.from_canonical(cfg.canonical()) == cfg
        assert RunConfig.from_canonical(cfg.canonical()).canonical() == cfg.canonical()

    @pytest.mark.parametrize("text", ["1:2:3", "1:2:3:cubic", "2:1:3:lin", "-1:2:3:log", "1:1:3:lin"])
    def test_grid_rejected(self, text):
        with pytest.raises(ValueError):
            GridSpec.parse(text)
