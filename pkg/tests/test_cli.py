import numpy as np
import pytest

from changeplane import FamilyKind, Scenario, generate
from changeplane.cli import NUMERIC_EXIT, USAGE_EXIT, main


@pytest.fixture
def glm_csv(tmp_path):
    """CSV drawn from the binomial benchmark design, raw columns only."""
    sc = Scenario(family=FamilyKind("binomial"), dims=(2, 2, 3), n=150,
                  kappa=0.0, seed=17)
    ds = generate(sc)
    path = tmp_path / "data.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("y,x1,z1,z2\n")
        for i in range(ds.n):
            fh.write(f"{ds.y[i]:.17g},{ds.x_base[i, 1]:.17g},"
                     f"{ds.z_group[i, 1]:.17g},{ds.z_group[i, 2]:.17g}\n")
    return path


def run_cli(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestTestCommand:
    def test_wast_happy_path(self, glm_csv, capsys, tmp_path):
        out_csv = tmp_path / "result.csv"
        code, out, _ = run_cli(
            ["test", str(glm_csv), "--family", "binomial",
             "--response", "y", "--baseline", "x1", "--diff", "x1",
             "--grouping", "z1,z2", "--boot", "50", "--seed", "9",
             "--output", str(out_csv)], capsys)
        assert code == 0
        assert "# seed=9" in out
        assert "statistic=" in out and "p_value=" in out
        assert ("decision=reject" in out) or ("decision=fail-to-reject" in out)
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0].startswith("method,family,n,")
        assert lines[1].startswith("wast,binomial,150,50,")

    def test_sst_happy_path(self, glm_csv, capsys):
        code, out, _ = run_cli(
            ["test", str(glm_csv), "--method", "sst", "--family", "binomial",
             "--response", "y", "--baseline", "x1", "--diff", "x1",
             "--grouping", "z1,z2", "--boot", "40", "--grid-k", "50",
             "--seed", "3"], capsys)
        assert code == 0
        assert "method=sst" in out

    def test_deterministic_output(self, glm_csv, capsys):
        argv = ["test", str(glm_csv), "--family", "binomial",
                "--response", "y", "--baseline", "x1", "--diff", "x1",
                "--grouping", "z1,z2", "--boot", "30", "--seed", "4"]
        _, out1, _ = run_cli(argv, capsys)
        _, out2, _ = run_cli(argv, capsys)
        assert out1 == out2

    def test_missing_column_usage_exit(self, glm_csv, capsys):
        code, _, err = run_cli(
            ["test", str(glm_csv), "--family", "binomial",
             "--response", "y", "--baseline", "nope", "--diff", "x1",
             "--grouping", "z1", "--seed", "1"], capsys)
        assert code == USAGE_EXIT
        assert "nope" in err

    def test_invalid_response_values(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("y,x,z\n0,1,0.3\n2,0,0.1\n1,1,-0.2\n")
        code, _, err = run_cli(
            ["test", str(path), "--family", "binomial", "--response", "y",
             "--baseline", "x", "--diff", "x", "--grouping", "z",
             "--seed", "1"], capsys)
        assert code == USAGE_EXIT

    def test_singular_design_numeric_exit(self, tmp_path, capsys):
        path = tmp_path / "sing.csv"
        rows = "\n".join(f"{i * 0.5},1,2,{i * 0.1}" for i in range(20))
        path.write_text("y,x1,x2,z\n" + rows + "\n")
        # x2 = 2 * x1 = constant -> collinear with the injected intercept
        code, _, err = run_cli(
            ["test", str(path), "--family", "gaussian", "--response", "y",
             "--baseline", "x1,x2", "--diff", "x1", "--grouping", "z",
             "--seed", "1"], capsys)
        assert code == NUMERIC_EXIT

    def test_beta_weight_with_scalar_grouping(self, tmp_path, capsys):
        rng = np.random.default_rng(2)
        path = tmp_path / "scalar.csv"
        with open(path, "w") as fh:
            fh.write("y,x,z\n")
            for _ in range(60):
                fh.write(f"{rng.standard_normal():.17g},"
                         f"{rng.standard_normal():.17g},"
                         f"{rng.random():.17g}\n")
        code, out, _ = run_cli(
            ["test", str(path), "--family", "gaussian", "--response", "y",
             "--baseline", "x", "--diff", "x", "--grouping", "z",
             "--no-intercept-grouping", "--weight", "beta",
             "--beta-lambda1", "2", "--beta-lambda2", "2",
             "--boot", "30", "--seed", "5"], capsys)
        assert code == 0
        assert "p_value=" in out


class TestSimulateCommand:
    def test_simulate_writes_csv(self, tmp_path, capsys):
        out_csv = tmp_path / "size.csv"
        code, out, err = run_cli(
            ["simulate", "--family", "binomial", "--dims", "2,2,3",
             "--n", "60", "--reps", "3", "--boot", "10", "--seed", "8",
             "--output", str(out_csv)], capsys)
        assert code == 0
        assert "running size study" in err  # progress goes to stderr
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == "kappa,n,method,rate,reps,stderr"
        assert len(lines) == 2

    def test_config_file_defaults_and_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "study.cfg"
        cfg.write_text("n = 50\nreps = 2\nboot = 10\n# comment\nkappa = 0.0\n")
        out_csv = tmp_path / "size.csv"
        code, out, _ = run_cli(
            ["simulate", "--family", "gaussian", "--seed", "2",
             "--config", str(cfg), "--reps", "3",
             "--output", str(out_csv)], capsys)
        assert code == 0
        row = out_csv.read_text().strip().splitlines()[1].split(",")
        assert row[1] == "50"   # n from config
        assert row[4] == "3"    # reps overridden by the flag

    def test_threads_do_not_change_numbers(self, tmp_path, capsys):
        outs = []
        for threads, name in ((1, "a.csv"), (2, "b.csv")):
            out_csv = tmp_path / name
            code, *_ = run_cli(
                ["simulate", "--family", "gaussian", "--dims", "2,2,3",
                 "--n", "60", "--reps", "4", "--boot", "10", "--seed", "6",
                 "--threads", str(threads), "--output", str(out_csv)], capsys)
            assert code == 0
            outs.append(out_csv.read_bytes())
        assert outs[0] == outs[1]

    def test_missing_config_file(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["simulate", "--family", "gaussian", "--seed", "1",
             "--config", str(tmp_path / "absent.cfg")], capsys)
        assert code == USAGE_EXIT


class TestPowerCommand:
    def test_power_table(self, tmp_path, capsys):
        out_csv = tmp_path / "power.csv"
        code, out, _ = run_cli(
            ["power", "--family", "gaussian", "--dims", "2,2,3", "--n", "80",
             "--reps", "3", "--boot", "10", "--kappa-grid", "0,1",
             "--methods", "wast,sst", "--grid-k", "30", "--seed", "12",
             "--output", str(out_csv)], capsys)
        assert code == 0
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == "kappa,n,method,rate,reps,stderr"
        assert len(lines) == 5  # 2 kappas x 2 methods
        assert "# seed=12" in out
