"""End-to-end command runs: outputs, determinism, exit codes."""

import json

import pytest

from riesim.cli import main
from riesim.timetag import apply_dead_time, generate_poisson_stream, write_timestamps


def write_config(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


@pytest.fixture
def base_config(tmp_path):
    return write_config(tmp_path, {
        "seed": 5,
        "out": str(tmp_path / "results"),
        "protocol": {"n_rounds": 50000, "p0": 1.0},
        "attack": {"mode": "intercept_resend"},
        "sweep": {"rates_cps": [20e6], "duration_s": 0.004},
        "scan": {"lambda_par_cps": [1e6],
                 "lambda_perp_grid": {"start_cps": 1e6, "stop_cps": 30e6, "num": 30}},
        "mutualinfo": {"r_step": 0.1},
    })


def test_simulate_writes_report_and_branches(tmp_path, base_config, capsys):
    assert main(["--config", str(base_config), "simulate"]) == 0
    out = tmp_path / "results"
    report = (out / "simulation_report.txt").read_text()
    assert "qber_observed:" in report
    assert "abort: true" in report  # plain intercept-resend trips the monitor
    branches = (out / "simulation_branches.csv").read_text().splitlines()
    assert branches[0].startswith("eve_basis,eve_bit,bob_basis")
    assert len(branches) == 9  # header + 8 branches
    assert "abort=true" in capsys.readouterr().out


def test_simulate_is_byte_identical_across_runs(tmp_path, base_config):
    main(["--config", str(base_config), "simulate"])
    first = (tmp_path / "results" / "simulation_report.txt").read_bytes()
    main(["--config", str(base_config), "simulate"])
    second = (tmp_path / "results" / "simulation_report.txt").read_bytes()
    assert first == second


def test_simulate_workers_flag_keeps_outputs_identical(tmp_path, base_config):
    main(["--config", str(base_config), "simulate"])
    sequential = (tmp_path / "results" / "simulation_report.txt").read_bytes()
    main(["--config", str(base_config), "--workers", "2", "simulate"])
    parallel = (tmp_path / "results" / "simulation_report.txt").read_bytes()
    assert sequential == parallel


def test_seed_flag_overrides_config(tmp_path, base_config):
    main(["--config", str(base_config), "simulate"])
    first = (tmp_path / "results" / "simulation_report.txt").read_text()
    main(["--config", str(base_config), "--seed", "6", "simulate"])
    second = (tmp_path / "results" / "simulation_report.txt").read_text()
    assert first != second
    assert "seed: 6" in second


def test_simulate_stealthy_rie_scenario(tmp_path, capsys):
    # suppression ratio 0.2 on a flat 23.3 ns curve: QBER settles near
    # 0.2/2.4 = 0.0833, under the 0.11 abort threshold
    config = write_config(tmp_path, {
        "seed": 12,
        "out": str(tmp_path / "results"),
        "dead_time_curve": {"table": [[0.0, 23.3e-9], [100e6, 23.3e-9]]},
        "protocol": {"n_rounds": 400000, "p0": 1.0},
        "attack": {"mode": "rie_non_deterministic",
                   "lambda_parallel_cps": 0.0,
                   "lambda_perp_cps": 69072712.0},  # -ln(0.2)/23.3e-9
    })
    assert main(["--config", str(config), "simulate"]) == 0
    report = (tmp_path / "results" / "simulation_report.txt").read_text()
    qber = float(report.split("qber_observed: ")[1].splitlines()[0])
    assert abs(qber - 0.2 / 2.4) < 0.005
    assert "abort: false" in report


def test_analytic_reports_closed_forms(tmp_path, capsys):
    config = write_config(tmp_path, {
        "out": str(tmp_path / "results"),
        "protocol": {"n_rounds": 1, "p0": 1.0},
        "attack": {"mode": "rie_deterministic", "delta_s": 1e-8},
    })
    assert main(["--config", str(config), "analytic"]) == 0
    text = (tmp_path / "results" / "analytic.txt").read_text()
    assert "r: 0.0" in text
    assert "stealthy: true" in text
    assert "i_ae_sifted: 1.0" in text
    assert "e_obs: 0.0" in text


def test_stealth_scan_csv(tmp_path, base_config):
    assert main(["--config", str(base_config), "stealth-scan"]) == 0
    lines = (tmp_path / "results" / "stealth_scan.csv").read_text().splitlines()
    assert lines[1] == "lambda_par_cps,lambda_perp_cps,r_bound,stealthy"
    assert len(lines) == 32  # metadata + header + 30 rows
    assert any(line.endswith("true") for line in lines[2:])


def test_mutualinfo_csv(tmp_path, base_config):
    assert main(["--config", str(base_config), "mutualinfo"]) == 0
    lines = (tmp_path / "results" / "mutual_info.csv").read_text().splitlines()
    assert lines[0].startswith("# r_threshold=0.282")
    assert lines[1] == "r,i_ab,i_ae"
    assert len(lines) == 13  # 0.0 .. 1.0 in steps of 0.1


def test_sweep_deadtime_outputs(tmp_path, base_config):
    assert main(["--config", str(base_config), "sweep-deadtime"]) == 0
    sweep = (tmp_path / "results" / "deadtime_sweep.csv").read_text().splitlines()
    busy = (tmp_path / "results" / "busy_fraction.csv").read_text().splitlines()
    assert sweep[0] == "lambda_obs_cps,t_d_est_s"
    assert busy[0] == "lambda_obs_cps,busy_fraction"
    assert len(sweep) == 2 and len(busy) == 2
    lam, t_d = (float(x) for x in sweep[1].split(","))
    lam_b, fraction = (float(x) for x in busy[1].split(","))
    assert lam_b == lam
    assert fraction == pytest.approx(lam * t_d, rel=1e-12)


def test_deadtime_extract_recovers_known_dead_time(tmp_path, base_config):
    stream = generate_poisson_stream(50e6, 0.005, seed=3)
    filtered = apply_dead_time(stream, constant_dead_time_s=23.3e-9)
    tags = tmp_path / "tags.txt"
    write_timestamps(filtered, tags)
    assert main(["--config", str(base_config), "deadtime-extract", str(tags)]) == 0
    report = (tmp_path / "results" / "deadtime_extract.txt").read_text()
    estimate = float(report.split("dead_time_estimate_s: ")[1])
    assert abs(estimate - 23.3e-9) <= 0.5e-9
    hist = (tmp_path / "results" / "deadtime_extract_histogram.csv").read_text().splitlines()
    assert hist[0] == "bin_lower_edge_s,count"


def test_deadtime_extract_empty_file_fails(tmp_path, base_config, capsys):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    assert main(["--config", str(base_config), "deadtime-extract", str(empty)]) == 1
    assert "insufficient data" in capsys.readouterr().err


def test_deadtime_extract_malformed_line_names_line(tmp_path, base_config, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("100\n200\noops\n")
    assert main(["--config", str(base_config), "deadtime-extract", str(bad)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_invalid_config_fails_before_any_output(tmp_path, capsys):
    config = write_config(tmp_path, {"out": str(tmp_path / "results"), "nope": 1})
    assert main(["--config", str(config), "simulate"]) == 2
    assert "unknown key" in capsys.readouterr().err
    assert not (tmp_path / "results").exists()


def test_simulate_without_protocol_section_fails(tmp_path, capsys):
    config = write_config(tmp_path, {"out": str(tmp_path / "results")})
    assert main(["--config", str(config), "simulate"]) == 2
    assert "protocol" in capsys.readouterr().err


def test_runs_without_config_file(tmp_path):
    # every command except simulate has usable defaults
    assert main(["--out", str(tmp_path), "mutualinfo"]) == 0
    assert (tmp_path / "mutual_info.csv").exists()
