"""Config parsing, rate fitting, sweep reports, and the CLI surface."""

import numpy as np
import pytest

from dgtime.cli import main
from dgtime.harness import (
    CSV_HEADER,
    ConfigError,
    RunConfig,
    check_forcing_consistency,
    fit_rate,
    parse_config,
    run_convergence,
    run_maxreg_sweep,
    separable_solution,
)
from dgtime.operators import laplacian_1d

GOOD_CONFIG = """
[problem]
kind = heat1d
dimension = 8
t = 1.0

[solver]
q = 1
n_list = 8,16,32,64

[norm]
p_list = 2

[output]
csv_path = {csv}
seed = 7
"""


def write_config(tmp_path, text, name="run.cfg", csv="report.csv"):
    path = tmp_path / name
    path.write_text(text.format(csv=tmp_path / csv))
    return path


class TestFitRate:
    def test_exact_power_law(self):
        ks = np.array([0.2, 0.1, 0.05, 0.025, 0.0125])
        assert fit_rate(list(zip(ks, ks**2))) == pytest.approx(2.0, abs=1e-12)

    def test_perturbed_power_law(self):
        ks = np.array([0.2, 0.1, 0.05, 0.025, 0.0125])
        es = 3 * ks**1.5 * (1 + 0.01 * np.sin(1 / ks))
        assert fit_rate(list(zip(ks, es))) == pytest.approx(1.5, abs=0.05)

    def test_constant_errors_have_zero_rate(self):
        ks = np.array([0.2, 0.1, 0.05, 0.025])
        assert fit_rate(list(zip(ks, np.ones(4)))) == pytest.approx(0.0, abs=1e-12)

    def test_nonpositive_values_excluded_with_warning(self):
        ks = [0.2, 0.1, 0.05, 0.025, 0.0125]
        es = [0.0, 1e-2, 1e-3, 1e-4, 1e-5]
        with pytest.warns(UserWarning):
            rate = fit_rate(list(zip(ks, es)))
        assert np.isfinite(rate)

    def test_too_few_levels_gives_nan(self):
        with pytest.warns(UserWarning):
            rate = fit_rate([(0.1, 1e-2), (0.05, 1e-3), (0.025, 1e-4)])
        assert np.isnan(rate)

    def test_uses_only_finest_four_levels(self):
        # a corrupted coarsest level must not affect the fit
        ks = np.array([0.4, 0.2, 0.1, 0.05, 0.025])
        es = ks**3
        es[0] = 100.0
        assert fit_rate(list(zip(ks, es))) == pytest.approx(3.0, abs=1e-12)


class TestConfigParsing:
    def test_valid_config(self, tmp_path):
        cfg = parse_config(write_config(tmp_path, GOOD_CONFIG))
        assert cfg.problem.kind == "heat1d"
        assert cfg.solver.N_list == (8, 16, 32, 64)
        assert cfg.norm.p_list == (2.0,)
        assert cfg.output.seed == 7

    def test_unknown_key_rejected(self, tmp_path):
        text = GOOD_CONFIG.replace("[solver]", "[solver]\nextrapolate = yes")
        with pytest.raises(ConfigError, match="extrapolate"):
            parse_config(write_config(tmp_path, text))

    def test_unknown_section_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="mystery"):
            parse_config(write_config(tmp_path, GOOD_CONFIG + "\n[mystery]\nx = 1\n"))

    def test_empty_n_list_rejected(self, tmp_path):
        text = GOOD_CONFIG.replace("n_list = 8,16,32,64", "n_list =")
        with pytest.raises(ConfigError, match="N_list"):
            parse_config(write_config(tmp_path, text))

    def test_non_increasing_n_list_rejected(self, tmp_path):
        text = GOOD_CONFIG.replace("n_list = 8,16,32,64", "n_list = 8,4")
        with pytest.raises(ConfigError, match="increasing"):
            parse_config(write_config(tmp_path, text))

    def test_exponent_at_most_one_rejected(self, tmp_path):
        text = GOOD_CONFIG.replace("p_list = 2", "p_list = 1")
        with pytest.raises(ConfigError, match="p_list"):
            parse_config(write_config(tmp_path, text))

    def test_bad_kind_message_names_field(self, tmp_path):
        text = GOOD_CONFIG.replace("kind = heat1d", "kind = pendulum")
        with pytest.raises(ConfigError, match=r"\[problem\] kind"):
            parse_config(write_config(tmp_path, text))

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            parse_config("/no/such/file.cfg")


class TestManufactured:
    def test_forcing_consistency_check_accepts_valid(self):
        op = laplacian_1d(6)
        mp = separable_solution(np.ones(6), op)
        check_forcing_consistency(mp, op, T=1.0)

    def test_forcing_consistency_check_rejects_corrupted(self):
        op = laplacian_1d(6)
        mp = separable_solution(np.ones(6), op)
        broken = lambda ts: 1.5 * mp.forcing(ts)
        mp_bad = type(mp)(u=mp.u, deriv_factory=mp.deriv_factory,
                          forcing=broken, u0=mp.u0)
        with pytest.raises(ValueError):
            check_forcing_consistency(mp_bad, op, T=1.0)


class TestRunConvergence:
    def test_scalar_recursion_marked_and_exact(self, tmp_path):
        cfg = RunConfig()
        cfg.problem.kind = "scalar"
        cfg.problem.dimension = 1
        cfg.problem.diffusion = 2.0
        cfg.solver.q = 1
        cfg.solver.N_list = (4, 8, 16, 32)
        cfg.norm.p_list = (2.0,)
        cfg.output.csv_path = str(tmp_path / "scalar.csv")
        report = run_convergence(cfg)
        rec = [c for c in report.checks if c.name == "exact-recursion"]
        assert len(rec) == 1 and rec[0].passed
        assert all(row.note == "exact-recursion" for row in report.rows)

    def test_csv_header_is_pinned(self, tmp_path):
        assert CSV_HEADER == "q,p,N,k,err_AU,err_dhatU,err_AhatU,resid,effectivity,maxreg_ratio,note"
        cfg = RunConfig()
        cfg.problem.dimension = 6
        cfg.solver.N_list = (4, 8, 16, 32)
        cfg.output.csv_path = str(tmp_path / "r.csv")
        run_convergence(cfg)
        first = (tmp_path / "r.csv").read_text().splitlines()[0]
        assert first == CSV_HEADER

    def test_deterministic_output(self, tmp_path):
        cfg = RunConfig()
        cfg.problem.dimension = 6
        cfg.solver.q = 2
        cfg.solver.N_list = (4, 8, 16, 32)
        cfg.norm.p_list = (2.0, 4.0)
        cfg.output.csv_path = str(tmp_path / "a.csv")
        run_convergence(cfg)
        first = (tmp_path / "a.csv").read_bytes()
        cfg.output.csv_path = str(tmp_path / "b.csv")
        run_convergence(cfg)
        assert first == (tmp_path / "b.csv").read_bytes()

    def test_both_paths_note_records_agreement(self, tmp_path):
        cfg = RunConfig()
        cfg.problem.dimension = 5
        cfg.solver.q = 2
        cfg.solver.N_list = (4, 8, 16, 32)
        cfg.solver.path = "both"
        cfg.output.csv_path = str(tmp_path / "c.csv")
        report = run_convergence(cfg)
        notes = {row.note for row in report.rows}
        assert all(n.startswith("path-agreement=") for n in notes)
        worst = max(float(n.split("=")[1]) for n in notes)
        assert worst <= 1e-10

    def test_grid_weighted_state_norm(self, tmp_path):
        # grid weights rescale every norm by the same factor, so rates and
        # effectivities still pass; the raw errors shrink by sqrt(h)
        cfg = RunConfig()
        cfg.problem.dimension = 9
        cfg.solver.q = 1
        cfg.solver.N_list = (8, 16, 32, 64)
        cfg.norm.x_norm = "grid"
        cfg.output.csv_path = str(tmp_path / "g.csv")
        report = run_convergence(cfg)
        assert all(c.passed for c in report.checks)
        cfg.norm.x_norm = "euclidean"
        cfg.output.csv_path = str(tmp_path / "e.csv")
        plain = run_convergence(cfg)
        h = 1.0 / 10.0
        assert report.rows[0].err_AU == pytest.approx(
            np.sqrt(h) * plain.rows[0].err_AU, rel=1e-12)

    def test_matrix_file_problem_kind(self, tmp_path):
        from dgtime.operators import matrix_to_text, nonnormal_model

        matrix_to_text(nonnormal_model(4, 0.3), tmp_path / "A.txt")
        cfg = RunConfig()
        cfg.problem.kind = "matrix-file"
        cfg.problem.dimension = 4
        cfg.problem.matrix_path = str(tmp_path / "A.txt")
        cfg.solver.q = 2
        cfg.solver.N_list = (8, 16, 32, 64)
        cfg.output.csv_path = str(tmp_path / "mf.csv")
        report = run_convergence(cfg)
        assert all(c.passed for c in report.checks)

    def test_step_failure_recorded_as_nan_row(self, tmp_path):
        # A = [[-8]] makes the N=8 slab system (1 + k a11 A) exactly singular
        (tmp_path / "bad.txt").write_text("1\n-8.0\n")
        cfg = RunConfig()
        cfg.problem.kind = "matrix-file"
        cfg.problem.dimension = 1
        cfg.problem.matrix_path = str(tmp_path / "bad.txt")
        cfg.solver.q = 1
        cfg.solver.N_list = (4, 8, 16, 32)
        cfg.output.csv_path = str(tmp_path / "bad.csv")
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = run_convergence(cfg)
        failed_rows = [r for r in report.rows if r.note.startswith("step-failure")]
        assert len(failed_rows) == 1 and failed_rows[0].N == 8
        assert np.isnan(failed_rows[0].err_AU)
        assert not report.passed
        solve_checks = [c for c in report.checks if c.name == "solve N=8"]
        assert len(solve_checks) == 1 and not solve_checks[0].passed

    def test_plotdata_emitted(self, tmp_path):
        cfg = RunConfig()
        cfg.problem.dimension = 5
        cfg.solver.N_list = (4, 8, 16, 32)
        cfg.output.csv_path = str(tmp_path / "d.csv")
        cfg.output.plotdata_path = str(tmp_path / "d")
        run_convergence(cfg)
        dat = sorted(p.name for p in tmp_path.glob("*.dat"))
        assert "d_err_AU_q1_p2.dat" in dat
        body = (tmp_path / "d_err_AU_q1_p2.dat").read_text().splitlines()
        assert len(body) == 4 and all(len(line.split()) == 2 for line in body)


class TestMaxregSweepDriver:
    def test_zero_forcing_degenerate_rows(self, tmp_path):
        cfg = RunConfig()
        cfg.problem.dimension = 4
        cfg.problem.forcing = "zero"
        cfg.solver.N_list = (4, 8)
        cfg.output.csv_path = str(tmp_path / "m.csv")
        rows, checks = run_maxreg_sweep(cfg)
        assert all(row.endswith("degenerate") for row in rows)
        assert all(c.passed for c in checks)

    def test_deterministic_output(self, tmp_path):
        cfg = RunConfig()
        cfg.problem.dimension = 6
        cfg.solver.N_list = (4, 8, 16)
        cfg.output.csv_path = str(tmp_path / "m1.csv")
        run_maxreg_sweep(cfg)
        cfg.output.csv_path = str(tmp_path / "m2.csv")
        run_maxreg_sweep(cfg)
        assert (tmp_path / "m1.csv").read_bytes() == (tmp_path / "m2.csv").read_bytes()


class TestCli:
    def test_usage_error_exit_code(self, capsys):
        assert main(["no-such-command"]) == 1
        assert main(["converge"]) == 1  # missing --config

    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[problem]\nkind = pendulum\n")
        assert main(["converge", "--config", str(bad)]) == 1

    def test_converge_roundtrip(self, tmp_path, capsys):
        cfg = write_config(tmp_path, GOOD_CONFIG)
        rc = main(["converge", "--config", str(cfg), "--out", str(tmp_path / "out"), "--quiet"])
        assert rc == 0
        assert (tmp_path / "out" / "report.csv").exists()
        out = capsys.readouterr().out
        assert "checks passed" in out

    def test_property_failure_exit_code(self, capsys, monkeypatch):
        import dgtime.cli as cli_mod
        from dgtime.harness import CheckResult

        monkeypatch.setattr(cli_mod, "oracle_battery",
                            lambda seed, trials: [CheckResult("doctored", False, "")])
        assert main(["oracle-check"]) == 2

    def test_oracle_check_passes(self, capsys):
        assert main(["oracle-check", "--trials", "6", "--quiet"]) == 0
