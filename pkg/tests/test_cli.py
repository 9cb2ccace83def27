import json
import math

import pytest

from fganneal.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv)
    return code, json.loads(out)


class TestAnnealedCommand:
    def test_parity_3_6(self, capsys):
        code, doc = run_json(capsys, "annealed", "--regular", "3", "6",
                             "--factor", "parity", "--restarts", "2")
        assert code == 0
        assert doc["value"] == pytest.approx(0.346574, abs=5e-7)
        assert doc["design_rate"] == pytest.approx(0.346574, abs=5e-7)
        assert doc["converged"] is True
        assert "provenance" in doc and "config" in doc

    def test_ones_2_2(self, capsys):
        code, doc = run_json(capsys, "annealed", "--regular", "2", "2",
                             "--factor", "f1", "--restarts", "1")
        assert code == 0
        assert doc["value"] == pytest.approx(math.log(2), abs=1e-10)

    def test_poisson_not_equal(self, capsys):
        code, doc = run_json(capsys, "annealed", "--poisson", "1.0", "2",
                             "--factor", "not-equal", "--restarts", "1")
        assert code == 0
        assert doc["value"] == pytest.approx(0.0, abs=1e-9)

    def test_bits_toggle(self, capsys):
        code, doc = run_json(capsys, "annealed", "--regular", "3", "6",
                             "--factor", "parity", "--restarts", "1", "--bits")
        assert code == 0
        assert doc["value"] == pytest.approx(0.5, abs=1e-9)

    def test_field_flag(self, capsys):
        code, doc = run_json(capsys, "annealed", "--regular", "3", "6",
                             "--factor", "parity", "--restarts", "1",
                             "--field", "1.0,1.0")
        assert code == 0
        assert doc["value"] == pytest.approx(0.346574, abs=5e-7)

    def test_unknown_factor_is_config_error(self, capsys):
        code, _ = run(capsys, "annealed", "--regular", "3", "6", "--factor", "nope")
        assert code == 2

    def test_missing_ensemble_is_config_error(self, capsys):
        code, _ = run(capsys, "annealed", "--factor", "parity")
        assert code == 2


class TestGrowthRateCommand:
    def test_csv_shape_and_determinism(self, capsys, tmp_path):
        args = ("growth-rate", "--regular", "6", "12", "--factor", "binary-csp:1",
                "--grid", "15", "--max-iters", "800", "--restarts", "1",
                "--threads", "2", "--no-plot")
        code, out1 = run(capsys, *args)
        assert code == 0
        code, out2 = run(capsys, *args)
        assert out1 == out2  # byte-stable given the seed
        lines = out1.strip().splitlines()
        assert lines[0] == "nu1,value,converged,iterations,solver"
        assert len(lines) == 16
        row = lines[8].split(",")  # nu1 = 0.5
        assert row[0] == "0.5"
        assert row[2] in ("true", "false")

    def test_figure_rendered_next_to_csv(self, tmp_path, capsys):
        out = tmp_path / "curve.csv"
        code, _ = run(capsys, "growth-rate", "--regular", "4", "8",
                      "--factor", "binary-csp:1", "--grid", "9",
                      "--max-iters", "500", "--restarts", "1",
                      "--out", str(out))
        assert code == 0
        assert out.exists()
        png = tmp_path / "curve.png"
        assert png.exists() and png.stat().st_size > 1000

    def test_explicit_plot_path(self, tmp_path, capsys):
        fig = tmp_path / "fig.png"
        code, _ = run(capsys, "growth-rate", "--regular", "4", "8",
                      "--factor", "binary-csp:1", "--grid", "9",
                      "--max-iters", "500", "--restarts", "1",
                      "--plot", str(fig))
        assert code == 0
        assert fig.exists()

    def test_general_q_emits_marginal_slices(self, capsys):
        code, out = run(capsys, "growth-rate", "--regular", "3", "4",
                        "--factor", "ones", "--q", "3", "--grid", "5",
                        "--max-iters", "400", "--restarts", "1", "--no-plot")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "slice_symbol,t,value,converged,iterations,solver"
        assert len(lines) == 1 + 3 * 5  # one slice per symbol
        # t = 0 on every slice is the uniform type: value log 3
        for ln in lines[1:]:
            sym, t, value = ln.split(",")[:3]
            if t == "0":
                assert float(value) == pytest.approx(math.log(3), abs=1e-9)


class TestStabilityCommand:
    def test_k2(self, capsys):
        code, doc = run_json(capsys, "stability", "--binary-csp", "20", "2")
        assert code == 0
        assert doc["value"] == pytest.approx(0.859049, abs=5e-7)
        assert doc["stable"] is True

    def test_k3(self, capsys):
        code, doc = run_json(capsys, "stability", "--binary-csp", "20", "3")
        assert code == 0
        assert doc["value"] == pytest.approx(1.825917, abs=5e-7)
        assert doc["stable"] is False

    def test_k1_documents_discrepancy(self, capsys):
        code, doc = run_json(capsys, "stability", "--binary-csp", "20", "1")
        assert code == 0
        assert doc["value"] == pytest.approx(0.213882, abs=5e-6)
        assert "0.23883" in doc["note"]
        assert doc["exact"] == "46189/215955"  # 92378/431910 reduced

    def test_general_factor(self, capsys):
        code, doc = run_json(capsys, "stability", "--factor", "f1", "--r", "6")
        assert code == 0
        assert doc["value"] == pytest.approx(0.0, abs=1e-12)


class TestOracleCommand:
    def test_exact_not_equal(self, capsys):
        code, doc = run_json(capsys, "oracle", "--N", "2", "--regular", "2", "2",
                             "--factor", "not-equal", "--exact",
                             "--restarts", "1")
        assert code == 0
        assert doc["expected_z"] == pytest.approx(4 / 3, abs=1e-15)
        assert doc["routes_equal"] is True

    def test_ones_gives_q_to_n(self, capsys):
        code, doc = run_json(capsys, "oracle", "--N", "4", "--regular", "2", "2",
                             "--factor", "f1", "--restarts", "1")
        assert code == 0
        assert doc["expected_z"] == pytest.approx(16.0, abs=1e-12)

    def test_parity_gap_reported(self, capsys):
        code, doc = run_json(capsys, "oracle", "--N", "8", "--regular", "2", "4",
                             "--factor", "parity", "--restarts", "1")
        assert code == 0
        assert doc["finite_size_gap"] > 0

    def test_budget_exceeded_exit(self, capsys):
        code, _ = run(capsys, "oracle", "--N", "24", "--regular", "10", "20",
                      "--factor", "binary-csp:1")
        assert code == 4


class TestRsCommand:
    def test_parity_equality_check(self, capsys):
        code, doc = run_json(capsys, "rs", "--regular", "3", "6", "--factor",
                             "parity", "--pop", "400", "--sweeps", "8",
                             "--samples", "2000", "--restarts", "2")
        assert code == 0
        assert doc["within_tolerance"] is True

    def test_ones(self, capsys):
        code, doc = run_json(capsys, "rs", "--regular", "2", "3", "--factor",
                             "ones", "--pop", "300", "--sweeps", "5",
                             "--samples", "1500", "--restarts", "1")
        assert code == 0
        assert doc["value"] == pytest.approx(math.log(2), abs=1e-6)

    def test_init_library(self, capsys):
        code, doc = run_json(capsys, "rs", "--regular", "6", "12", "--factor",
                             "binary-csp:1", "--pop", "300", "--sweeps", "4",
                             "--samples", "1200", "--inits", "--restarts", "2")
        assert code == 0
        assert len(doc["fixed_points"]) == 3


class TestMomentsCommand:
    def test_pair_moment(self, capsys):
        code, doc = run_json(capsys, "moments", "--regular", "2", "2",
                             "--factor", "not-equal", "--n", "2",
                             "--restarts", "1", "--max-iters", "1500")
        assert code == 0
        assert doc["value"] == pytest.approx(0.0, abs=1e-9)

    def test_budget_exit(self, capsys):
        code, _ = run(capsys, "moments", "--regular", "10", "20",
                      "--factor", "binary-csp:1", "--n", "2")
        assert code == 4


class TestConfigFile:
    def test_flags_override_file(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("regular = 3 6\nfactor = parity\nrestarts = 1\nbits = false\n")
        code, doc = run_json(capsys, "annealed", "--config", str(cfg))
        assert code == 0
        assert doc["value"] == pytest.approx(0.346574, abs=5e-7)
        # explicit flag beats the file
        code, doc = run_json(capsys, "annealed", "--config", str(cfg),
                             "--factor", "f1", "--regular", "2", "2")
        assert code == 0
        assert doc["value"] == pytest.approx(math.log(2), abs=1e-10)
