import json

import numpy as np
import pytest

from ermlab.cli import main as cli_main
from ermlab.harness import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    fit_rate,
    load_constants,
    parse_config_text,
    presets,
    run_experiment,
)


def tiny_config(**overrides):
    base = dict(
        mode="erm", body_kind="l1_ball", body_dim=8, design_kind="gaussian",
        noise_kind="gaussian_noise", grid_N=(16, 32), grid_sigma=(0.5,),
        trials=3, seed=9, fp_trials=60, iso_candidates=8, iso_ascent=10,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


# ---------------------------------------------------------------------------
# config plumbing


def test_presets_count_and_validity():
    p = presets()
    assert len(p) == 7
    assert set(p) == {"b1_rates", "b1_low_noise", "maxnorm_rates",
                      "ratio_lower", "two_point_demo", "shift_bound_check",
                      "width_profile"}
    for cfg in p.values():
        cfg.validate()


def test_config_text_roundtrip():
    cfg = tiny_config()
    text = cfg.to_text()
    again = ExperimentConfig.from_text(text)
    assert again == cfg
    assert "grid.N = 16,32" in text


def test_config_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_text("grid.N = 4\nbogus.key = 1\n")


def test_config_field_level_messages():
    with pytest.raises(ConfigError, match="grid.N"):
        ExperimentConfig(grid_N=())
    with pytest.raises(ConfigError, match="trials"):
        ExperimentConfig(trials=0)
    with pytest.raises(ConfigError, match="mode"):
        ExperimentConfig(mode="bogus")


def test_parse_config_text_comments():
    mapping = parse_config_text("# comment\n\ntrials = 5\nseed = 3\n")
    assert mapping == {"trials": "5", "seed": "3"}


def test_load_constants():
    consts = load_constants()
    assert consts["geometry.kG"] == pytest.approx(1.783)
    assert "b1_rates.ratio_lo" in consts


# ---------------------------------------------------------------------------
# runner


def test_single_cell_single_trial_row():
    cfg = tiny_config(grid_N=(16,), trials=1)
    rows, summary = run_experiment(cfg)
    assert len(rows) == 1
    assert summary["n_failures"] == 0
    row = rows[0]
    assert row.N == 16 and np.isfinite(row.excess_risk)
    assert row.predicted_rate > 0


def test_rerun_identical_and_thread_invariant(tmp_path):
    cfg = tiny_config()
    out1, out2, out3 = (tmp_path / n for n in ("a", "b", "c"))
    run_experiment(tiny_config(), out_dir=str(out1), threads=1)
    run_experiment(tiny_config(), out_dir=str(out2), threads=1)
    run_experiment(tiny_config(), out_dir=str(out3), threads=4)
    b1 = (out1 / "rows.csv").read_bytes()
    assert b1 == (out2 / "rows.csv").read_bytes()
    assert b1 == (out3 / "rows.csv").read_bytes()
    assert b1.splitlines()[0].decode() == CSV_HEADER


def test_output_files_written(tmp_path):
    cfg = tiny_config(grid_N=(16,), trials=2)
    rows, summary = run_experiment(cfg, out_dir=str(tmp_path))
    assert (tmp_path / "rows.csv").exists()
    assert (tmp_path / "config.echo").exists()
    data = json.loads((tmp_path / "summary.json").read_text())
    assert data["n_rows"] == 2
    echo = (tmp_path / "config.echo").read_text()
    assert ExperimentConfig.from_text(echo) == cfg


def test_low_noise_rows_and_kernel_bound():
    from ermlab.widths import kernel_section_diameter
    from ermlab.geometry import ConvexBody
    from ermlab.sim import DesignSpec, NoiseSpec, sample_dataset

    cfg = tiny_config(grid_N=(4,), grid_sigma=(0.0,), trials=4,
                      iso_enabled=False, solver_tol=1e-10)
    rows, summary = run_experiment(cfg)
    body = ConvexBody("l1_ball", 8, 1.0)
    design = DesignSpec("gaussian", d=8)
    for row in rows:
        data = sample_dataset(design, NoiseSpec("gaussian_noise", 0.0),
                              cfg.t_star(), row.N, seed=row.seed)
        diam = kernel_section_diameter(body, data.X, directions=400,
                                       seed=row.seed)
        assert row.excess_risk <= diam**2 + 1e-6


def test_ratio_mode_runs():
    cfg = ExperimentConfig(mode="ratio", body_kind="l1_ball", body_dim=16,
                           noise_kind="orthogonal_target", grid_N=(32,),
                           grid_sigma=(1.0,), trials=4, seed=10,
                           lambda_scales=(0.5, 1.0), fp_trials=60,
                           iso_candidates=16, iso_ascent=10)
    rows, summary = run_experiment(cfg)
    assert len(rows) == 8
    levels = summary["levels"]
    assert len(levels) == 2


def test_two_point_mode_all_hold():
    cfg = ExperimentConfig(mode="two_point", body_kind="l1_ball", body_dim=8,
                           grid_N=(4,), grid_sigma=(1.0,), trials=1, seed=11,
                           demo_seeds=3)
    rows, summary = run_experiment(cfg)
    assert summary["n_holds"] == len(rows) == 6


def test_shift_mode_gap():
    cfg = ExperimentConfig(mode="shift", grid_N=(1,), grid_sigma=(1.0,),
                           trials=1, seed=12, shift_draws=20_000)
    rows, summary = run_experiment(cfg)
    assert summary["worst_equality_gap"] <= 0.02
    assert len(rows) == 10


def test_iso_frequency_monotone_in_N():
    cfg = tiny_config(body_dim=16, grid_N=(32, 128, 512), trials=40,
                      iso_candidates=16, iso_ascent=20, fp_trials=120)
    rows, summary = run_experiment(cfg, threads=1)
    freqs, ses = [], []
    for c in summary["cells"]:
        f = c["iso_frequency"]
        assert f is not None and 0.0 <= f <= 1.0
        freqs.append(f)
        ses.append(np.sqrt(max(f * (1 - f), 0.25 / 40) / 40))
    for (f1, s1), (f2, s2) in zip(zip(freqs, ses), zip(freqs[1:], ses[1:])):
        assert f2 >= f1 - 2.0 * np.hypot(s1, s2)


def test_result_row_invariants():
    rows, _ = run_experiment(tiny_config(), threads=1)
    for row in rows:
        assert row.excess_risk >= -1e-9
        assert row.predicted_rate > 0 or (row.sigma == 0 and row.N >= row.d)


def test_numerical_failure_rows_recorded():
    # zero restarts and no warm start: every factorized solve fails, rows
    # are recorded as errors and the table survives
    cfg = ExperimentConfig(mode="erm", body_kind="maxnorm_ball", body_p=2,
                           body_q=2, design_kind="matrix_iid",
                           grid_N=(8,), grid_sigma=(0.5,), trials=2, seed=14,
                           t_star_rule="rank1_signs", iso_enabled=False,
                           solver_restarts=0, fp_trials=50)
    rows, summary = run_experiment(cfg, threads=1)
    assert len(rows) == 2
    assert summary["n_failures"] == 2
    assert all(r.regime == "error" and np.isnan(r.excess_risk) for r in rows)


def test_width_mode_profile():
    cfg = ExperimentConfig(mode="width", body_kind="l1_ball", body_dim=32,
                           grid_N=(1,), grid_sigma=(1.0,), trials=50, seed=13,
                           width_points=6)
    rows, _ = run_experiment(cfg)
    means = [r["mean"] for r in rows]
    assert all(b >= a - 1e-9 for a, b in zip(means, means[1:]))


# ---------------------------------------------------------------------------
# fit_rate


def test_fit_rate_exact_inverse():
    rows = [{"N": n, "y": 7.0 / n} for n in (8, 16, 32, 64) for _ in range(3)]
    slope, intercept, r2 = fit_rate(rows, x="N", y="y")
    assert slope == pytest.approx(-1.0, abs=1e-12)
    assert r2 == pytest.approx(1.0)


def test_fit_rate_sqrt():
    rows = [{"N": n, "y": 3.0 / np.sqrt(n)} for n in (8, 16, 32, 64)]
    slope, _, _ = fit_rate(rows, x="N", y="y")
    assert slope == pytest.approx(-0.5, abs=1e-12)


def test_fit_rate_needs_two_cells():
    with pytest.raises(ValueError):
        fit_rate([{"N": 8, "y": 1.0}], x="N", y="y")


# ---------------------------------------------------------------------------
# CLI


def test_cli_width(capsys):
    rc = cli_main(["width", "--body", "l2_ball", "--dim", "2", "--r", "3.0",
                   "--trials", "200", "--seed", "1"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(out["mean"] - np.sqrt(2 * np.pi)) <= 4 * out["stderr"]


def test_cli_fixedpoint(capsys):
    rc = cli_main(["fixedpoint", "--body", "l1_ball", "--dim", "16",
                   "--kind", "s_star", "--N", "64", "--eta", "1.0",
                   "--trials", "100", "--seed", "2"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert 0 < out["value"] <= 2.0


def test_cli_erm(capsys):
    rc = cli_main(["erm", "--body", "l1_ball", "--dim", "8", "--N", "64",
                   "--sigma", "0.5", "--seed", "3"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["excess_risk"] >= 0


def test_cli_experiment_and_fit(tmp_path, capsys):
    cfg_path = tmp_path / "exp.cfg"
    cfg_path.write_text(tiny_config().to_text())
    out_dir = tmp_path / "out"
    rc = cli_main(["experiment", "--config", str(cfg_path), "--out",
                   str(out_dir), "--threads", "2"])
    assert rc == 0
    capsys.readouterr()
    rc = cli_main(["fit", "--csv", str(out_dir / "rows.csv"),
                   "--x", "N", "--y", "excess_risk"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert "slope" in out


def test_cli_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("trials = 0\n")
    rc = cli_main(["experiment", "--config", str(bad)])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_cli_demo_shift(tmp_path, capsys):
    rc = cli_main(["demo", "--name", "shift_bound_check", "--out",
                   str(tmp_path / "shift")])
    assert rc == 0


def test_cli_numerical_failure_exit_code(tmp_path, capsys):
    cfg = ExperimentConfig(mode="erm", body_kind="maxnorm_ball", body_p=2,
                           body_q=2, design_kind="matrix_iid",
                           grid_N=(8,), grid_sigma=(0.5,), trials=1, seed=14,
                           t_star_rule="rank1_signs", iso_enabled=False,
                           solver_restarts=0, fp_trials=50)
    path = tmp_path / "failing.cfg"
    path.write_text(cfg.to_text())
    rc = cli_main(["experiment", "--config", str(path), "--out",
                   str(tmp_path / "out")])
    assert rc == 3
