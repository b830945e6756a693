import json
import os
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from drpi.controller import EpisodeRecord
from drpi.harness import (ConfigError, ExperimentConfig, default_config,
                          dump_config, format_float, load_config,
                          nearest_rank_percentile, parse_config,
                          run_experiment, summarize)


def record(status, arrive=None):
    return EpisodeRecord(states=np.zeros((1, 4)), controls=np.zeros((0, 2)),
                         theta_hats=np.zeros(0), gammas=np.zeros(0),
                         mu_hats=np.zeros((0, 2)), status=status,
                         arrive_time=arrive, realized_state_cost=0.0,
                         realized_total_cost=0.0)


def tiny_config(**overrides):
    cfg = default_config("double_integrator")
    base = dict(episodes=2, samples=16, horizon_s=0.25, dt=0.05,
                master_seed=7, workers=1)
    base.update(overrides)
    return replace(cfg, **base)


class TestSummarize:
    def test_mean_of_three(self):
        recs = [record("success", a) for a in (1.0, 2.0, 3.0)]
        s = summarize(recs, dt=0.05)
        assert s.success_rate == 100.0
        assert s.arrive_mean == pytest.approx(2.0)

    def test_single_success_degenerate_stats(self):
        s = summarize([record("success", 5.0), record("collision")], dt=0.05)
        assert s.success_rate == 50.0
        assert s.arrive_std == 0.0
        assert s.arrive_p95 == 5.0

    def test_no_success_yields_null_stats(self):
        s = summarize([record("collision"), record("timeout")], dt=0.05)
        assert s.success_rate == 0.0
        assert s.arrive_mean is None and s.arrive_std is None and s.arrive_p95 is None
        assert s.collisions == 1 and s.timeouts == 1

    def test_p95_nearest_rank_against_sorted_list(self):
        rng = np.random.default_rng(0)
        times = rng.uniform(1.0, 30.0, size=100)
        recs = [record("success", t) for t in times]
        s = summarize(recs, dt=0.05)
        expected = sorted(times)[int(np.ceil(0.95 * 100)) - 1]
        assert s.arrive_p95 == pytest.approx(expected)

    def test_counts(self):
        recs = [record("success", 2.0)] + [record("collision")] * 3
        s = summarize(recs, dt=0.05)
        assert s.success_rate == pytest.approx(25.0)
        assert s.arrive_mean == pytest.approx(2.0)
        assert s.episodes == 4 and s.successes == 1

    def test_empty(self):
        with pytest.raises(ValueError):
            summarize([], dt=0.05)


class TestNearestRank:
    @pytest.mark.parametrize("n", [1, 5, 20, 99, 100])
    def test_matches_definition(self, n):
        rng = np.random.default_rng(n)
        vals = rng.normal(size=n)
        got = nearest_rank_percentile(vals, 95.0)
        expected = sorted(vals)[max(1, int(np.ceil(0.95 * n))) - 1]
        assert got == expected


class TestConfig:
    def test_roundtrip_is_idempotent(self):
        cfg = default_config("unicycle")
        text = dump_config(cfg)
        cfg2 = parse_config(text)
        assert cfg2 == cfg
        assert dump_config(cfg2) == text

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config key 'model.mass'"):
            parse_config("model.mass = 2.0")

    def test_bad_value_reports_key(self):
        with pytest.raises(ConfigError, match="run.samples"):
            parse_config("run.samples = many")

    def test_partial_override_keeps_defaults(self):
        cfg = parse_config("run.samples = 32\nrobust.gamma = 0.5")
        assert cfg.samples == 32
        assert cfg.robust.gamma == 0.5
        assert cfg.dt == ExperimentConfig().dt

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# a comment\n\nrun.episodes = 3  # trailing\n")
        assert cfg.episodes == 3

    def test_scheme_parsing(self):
        assert parse_config("run.scheme = both").schemes == ("drpi", "pic")
        assert parse_config("run.scheme = pic").schemes == ("pic",)
        with pytest.raises(ConfigError):
            parse_config("run.scheme = mppi")

    def test_state_dimension_check(self):
        with pytest.raises(ConfigError, match="initial_state"):
            parse_config("model.family = unicycle")  # default state has 4 entries

    def test_horizon_must_divide(self):
        with pytest.raises(ConfigError, match="divide"):
            tiny_config(horizon_s=0.27).K

    def test_scalar_lq_rejected(self):
        with pytest.raises(ConfigError, match="oracle"):
            parse_config("model.family = scalar_lq\nrun.initial_state = 0\n"
                         "run.true_drift = 0")


class TestRunExperiment:
    def test_outputs_and_shapes(self, tmp_path):
        cfg = tiny_config(out_dir=str(tmp_path / "out"), save_trajectories=True)
        summary = run_experiment(cfg)
        assert set(summary) == {"drpi", "pic"}
        assert summary["drpi"].episodes == 2

        with open(os.path.join(cfg.out_dir, "summary.json")) as fh:
            payload = json.load(fh)
        assert set(payload) == {"drpi", "pic"}
        assert set(payload["drpi"]) == {"episodes", "successes", "collisions",
                                        "timeouts", "success_rate",
                                        "arrive_mean", "arrive_std", "arrive_p95"}

        with open(os.path.join(cfg.out_dir, "episodes.csv")) as fh:
            header = fh.readline().strip()
            body = fh.read().strip().splitlines()
        assert header == ("episode,scheme,status,arrive_time_s,"
                          "realized_state_cost,realized_total_cost")
        assert len(body) == 4  # 2 episodes x 2 schemes

        traj = os.path.join(cfg.out_dir, "traj", "drpi", "traj_0.csv")
        with open(traj) as fh:
            assert fh.readline().strip() == "step,t,x0,x1,x2,x3,u0,u1"

    def test_floats_have_17_significant_digits(self, tmp_path):
        cfg = tiny_config(out_dir=str(tmp_path / "out"))
        run_experiment(cfg)
        with open(os.path.join(cfg.out_dir, "episodes.csv")) as fh:
            fh.readline()
            row = fh.readline().strip().split(",")
        value = row[4]
        assert float(value) == float(format_float(float(value)))
        assert format_float(1.0 / 3.0) == "0.33333333333333331"

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        out1 = str(tmp_path / "w1")
        out2 = str(tmp_path / "w2")
        run_experiment(tiny_config(out_dir=out1, workers=1))
        run_experiment(tiny_config(out_dir=out2, workers=2))
        for name in ("summary.json", "episodes.csv"):
            with open(os.path.join(out1, name), "rb") as fh:
                b1 = fh.read()
            with open(os.path.join(out2, name), "rb") as fh:
                b2 = fh.read()
            assert b1 == b2, name

    def test_start_inside_goal_is_immediate_success(self, tmp_path):
        cfg = tiny_config(out_dir=str(tmp_path / "out"), episodes=1,
                          initial_state=(0.1, 0.0, 0.0, 0.0))
        summary = run_experiment(cfg)
        for scheme in ("drpi", "pic"):
            assert summary[scheme].success_rate == 100.0
            assert summary[scheme].arrive_mean == 0.0

    def test_master_seed_changes_results(self, tmp_path):
        cfg_a = tiny_config(out_dir=str(tmp_path / "a"), horizon_s=0.5)
        cfg_b = replace(cfg_a, master_seed=8, out_dir=str(tmp_path / "b"))
        run_experiment(cfg_a)
        run_experiment(cfg_b)
        with open(os.path.join(cfg_a.out_dir, "episodes.csv")) as fh:
            a = fh.read()
        with open(os.path.join(cfg_b.out_dir, "episodes.csv")) as fh:
            b = fh.read()
        assert a != b


class TestCli:
    def run_cli(self, *args):
        return subprocess.run([sys.executable, "-m", "drpi", *args],
                              capture_output=True, text=True)

    def test_bound_prints_plain_decimals(self):
        out = self.run_cli("bound", "--p", "2", "--n", "10", "--eps", "0.1")
        assert out.returncode == 0
        gamma_line, bound_line = out.stdout.strip().splitlines()
        assert float(gamma_line) == pytest.approx(0.52164, abs=1e-4)
        assert float(bound_line) == pytest.approx(0.9, abs=1e-12)

    def test_print_config_roundtrips(self):
        out = self.run_cli("print-config", "--model", "unicycle")
        assert out.returncode == 0
        assert parse_config(out.stdout) == default_config("unicycle")

    def test_simulate_and_sweep(self, tmp_path):
        cfg_path = tmp_path / "exp.cfg"
        cfg_path.write_text(dump_config(tiny_config(out_dir=str(tmp_path / "o"))))
        out = self.run_cli("simulate", "--config", str(cfg_path),
                           "--scheme", "pic", "--episodes", "1")
        assert out.returncode == 0, out.stderr
        assert os.path.exists(tmp_path / "o" / "summary.json")

        out = self.run_cli("sweep", "--config", str(cfg_path),
                           "--episodes", "1", "--gamma", "0.5,1")
        assert out.returncode == 0, out.stderr
        assert os.path.exists(tmp_path / "o" / "gamma_0.5" / "summary.json")
        assert os.path.exists(tmp_path / "o" / "gamma_1" / "summary.json")

    def test_config_error_exit_code(self, tmp_path):
        cfg_path = tmp_path / "bad.cfg"
        cfg_path.write_text("model.mass = 1\n")
        out = self.run_cli("simulate", "--config", str(cfg_path))
        assert out.returncode == 2
        assert "unknown config key" in out.stderr
