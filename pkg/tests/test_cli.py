import json

import numpy as np
import pytest

from normscaler.cli import build_parser, main
from normscaler.model import DesignSpec, TargetSpec, gen_instance
from normscaler.solver import solve_min_lp


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


class TestSolveCommand:
    def test_end_to_end_matches_api(self, capsys):
        code, doc = _run(capsys, [
            "solve", "--p", "1.5", "--n", "20", "--d", "100",
            "--target", "e1", "--sigma", "0", "--seed", "1",
        ])
        assert code == 0
        assert doc["feas_residual"] <= 1e-8
        assert set(doc["norms"]) == {"1.0", "1.5"}
        # the CLI is a thin adapter: values equal the library call exactly
        inst = gen_instance(TargetSpec(), DesignSpec.fixed(100), 0.0, 20, 1)
        sol = solve_min_lp(inst.X, inst.Y, 1.5)
        assert doc["norms"]["1.5"] == pytest.approx(
            float(np.sum(np.abs(sol.w_hat) ** 1.5) ** (1 / 1.5)), rel=1e-12)

    def test_p2_path(self, capsys):
        code, doc = _run(capsys, ["solve", "--p", "2", "--n", "10", "--d", "40", "--seed", "3"])
        assert code == 0 and doc["converged"]


class TestTheoryCommand:
    def test_passthrough_values(self, capsys):
        code, doc = _run(capsys, [
            "theory", "--p", "1.5", "--target", "e1", "--sigma", "0.1",
            "--kappa", "9", "--n", "1000",
        ])
        assert code == 0
        assert doc["r_star"] == pytest.approx(1.0)
        tau_q = (1 + 0.1**2) ** 1.5
        kappa_bulk = (9000 - 1) / 1000
        assert doc["n_star"] == pytest.approx((kappa_bulk * tau_q) ** 2, rel=1e-12)
        assert doc["regime"] == "spike"


class TestCalibrateCommand:
    def test_single_alpha(self, capsys):
        code, doc = _run(capsys, ["calibrate", "--alpha", "0.229"])
        assert code == 0
        assert abs(doc["p_eff"] - 1.9) <= 0.07

    def test_inverse(self, capsys):
        code, doc = _run(capsys, ["calibrate", "--p-target", "1.5"])
        assert code == 0
        assert 0.0664 / 1.5 <= doc["alpha"] <= 0.0664 * 1.5

    def test_curve_to_file(self, capsys, tmp_path):
        out = tmp_path / "curve.csv"
        code, doc = _run(capsys, ["calibrate", "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "alpha,p_eff,stderr"
        assert len(lines) == 1 + len(doc["points"])


class TestOtherCommands:
    def test_gen(self, capsys):
        code, doc = _run(capsys, ["gen", "--n", "5", "--d", "20", "--seed", "9"])
        assert code == 0 and doc["n"] == 5 and doc["d"] == 20

    def test_dln_train(self, capsys):
        code, doc = _run(capsys, [
            "dln-train", "--alpha", "5", "--lr", "3e-4", "--n", "10", "--d", "50",
            "--sigma", "0", "--seed", "2", "--loss-tol", "1e-9",
        ])
        assert code == 0
        assert doc["status"] == "interpolated"

    def test_diagnose(self, capsys):
        code, doc = _run(capsys, ["diagnose", "--n", "50", "--d", "500", "--seed", "4", "--q", "3"])
        assert code == 0
        assert doc["bulk_defined"]

    def test_sweep_from_recipe(self, capsys, tmp_path):
        recipe = {
            "experiment_id": "cli_smoke",
            "target": {"kind": "single_spike"},
            "design": {"mode": "fixed_d", "d": 40},
            "sigma_list": [0.0],
            "selector": {"kind": "explicit_p", "p_list": [2.0]},
            "n_grid": [8, 12],
            "r_list": [1.0, 2.0],
            "seeds_per_cell": 2,
            "base_seed": 5,
            "output_path": str(tmp_path / "smoke.csv"),
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(recipe))
        code, doc = _run(capsys, ["sweep", "--config", str(cfg_path)])
        assert code == 0
        assert doc["rows"] == 8 and doc["failed_rows"] == 0

    def test_sweep_flag_overrides(self, capsys, tmp_path):
        recipe = {
            "experiment_id": "cli_override",
            "target": {"kind": "single_spike"},
            "design": {"mode": "fixed_d", "d": 40},
            "sigma_list": [0.0],
            "selector": {"kind": "explicit_p", "p_list": [2.0]},
            "n_grid": [8],
            "r_list": [2.0],
            "seeds_per_cell": 3,
            "base_seed": 5,
            "output_path": str(tmp_path / "a.csv"),
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(recipe))
        out_b = tmp_path / "b.csv"
        code, doc = _run(capsys, [
            "sweep", "--config", str(cfg_path),
            "--output", str(out_b), "--seeds-per-cell", "1",
        ])
        assert code == 0
        assert doc["rows"] == 1
        assert out_b.exists()


class TestExitCodes:
    def test_unknown_flag_is_config_error(self, capsys):
        assert main(["solve", "--p", "1.5", "--n", "5", "--d", "20", "--bogus", "1"]) == 1

    def test_missing_config_file(self, capsys):
        assert main(["sweep", "--config", "/nonexistent.json"]) == 1

    def test_numerical_failure_exit_2(self, capsys):
        # an absurdly tight iteration cap cannot converge
        code = main(["solve", "--p", "1.1", "--n", "20", "--d", "100",
                     "--seed", "1", "--max-iters", "2"])
        assert code == 2

    def test_help_lists_flags(self, capsys):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["solve", "--help"])
        assert exc.value.code == 0
        help_text = capsys.readouterr().out
        for flag in ("--p", "--n", "--d", "--kappa", "--sigma", "--seed", "--tol-feas"):
            assert flag in help_text
