"""Run-loop accounting, determinism, and metrics round-trip tests."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from replay_opt.errors import ConfigError
from replay_opt.harness import (
    EpisodeRecord,
    RunConfig,
    TraceRecord,
    read_episode_csv,
    read_trace_csv,
    run,
    run_suite,
    summarize,
    write_episode_csv,
    write_trace_csv,
)


def quick_config(**kwargs) -> RunConfig:
    defaults = dict(
        env="pendulum",
        sampler="uniform",
        total_timesteps=1200,
        seed=0,
        buffer_capacity=4000,
        warmup_transitions=200,
        train_steps_per_iter=10,
        hidden_sizes=(16, 16),
        trace_interval=20,
    )
    defaults.update(kwargs)
    return RunConfig(**defaults)


class TestRun:
    def test_zero_timesteps_empty_run(self):
        summary = run(quick_config(total_timesteps=0))
        assert summary.episodes == []
        assert summary.traces == []
        assert summary.total_steps == 0

    def test_exactly_one_episode_at_200_steps(self):
        summary = run(quick_config(total_timesteps=200, warmup_transitions=1000))
        assert len(summary.episodes) == 1
        rec = summary.episodes[0]
        assert rec.length == 200
        assert rec.global_step == 200
        assert rec.rc_window == rec.episode_return

    def test_step_accounting_is_exact(self):
        summary = run(quick_config(total_timesteps=1150))
        partial = summary.total_steps - sum(r.length for r in summary.episodes)
        assert summary.total_steps == 1150
        assert 0 <= partial < 200

    def test_invalid_configs_rejected_before_work(self):
        with pytest.raises(ConfigError):
            run(quick_config(sampler="priority_queue"))
        with pytest.raises(ConfigError):
            run(quick_config(env="cartpole"))
        with pytest.raises(ConfigError):
            run(quick_config(rollout_steps=0))

    @pytest.mark.parametrize("sampler", ["uniform", "per_prop", "per_rank", "ero"])
    def test_each_sampler_runs_and_repeats_identically(self, sampler):
        a = run(quick_config(sampler=sampler))
        b = run(quick_config(sampler=sampler))
        assert a.episodes == b.episodes
        assert a.traces == b.traces

    def test_sampler_isolation_before_first_training_step(self):
        # below the warm-up threshold no training happens, so rollouts agree
        # across sampler kinds step for step
        results = {
            kind: run(quick_config(sampler=kind, total_timesteps=900, warmup_transitions=1000))
            for kind in ("uniform", "per_prop", "per_rank", "ero")
        }
        base = [
            (r.episode, r.global_step, r.episode_return, r.length)
            for r in results["uniform"].episodes
        ]
        for kind in ("per_prop", "per_rank", "ero"):
            got = [
                (r.episode, r.global_step, r.episode_return, r.length)
                for r in results[kind].episodes
            ]
            assert got == base

    def test_ero_columns_populated_only_for_ero(self):
        uni = run(quick_config(total_timesteps=600, warmup_transitions=1000))
        assert all(r.replay_reward is None and r.subset_size is None for r in uni.episodes)
        ero = run(quick_config(sampler="ero", total_timesteps=600, warmup_transitions=1000))
        assert ero.episodes[0].replay_reward is None  # first episode has no estimate yet
        assert ero.episodes[1].replay_reward is not None
        assert all(r.subset_size is not None for r in ero.episodes)

    def test_trace_records_bounded_and_finite(self):
        summary = run(quick_config(sampler="ero", total_timesteps=1000, trace_interval=5))
        assert summary.traces
        for t in summary.traces:
            assert np.isfinite([t.mean_abs_td, t.mean_step_diff, t.mean_reward]).all()
            assert 0.0 <= t.mean_step_diff <= t.global_step

    def test_early_stop(self):
        # every pendulum return beats -1e6, so the run stops after the first
        # window's worth of episodes
        summary = run(
            quick_config(
                total_timesteps=5000,
                early_stop_window=2,
                early_stop_threshold=-1e6,
            )
        )
        assert summary.stopped_early
        assert len(summary.episodes) == 2
        assert summary.total_steps == 400

    def test_eval_episodes_do_not_disturb_training(self):
        base = run(quick_config(total_timesteps=800))
        with_eval = run(quick_config(total_timesteps=800, eval_every=2))
        assert base.episodes == with_eval.episodes
        assert len(with_eval.evals) == len(with_eval.episodes) // 2
        for e in with_eval.evals:
            assert np.isfinite(e.eval_return)


class TestSuite:
    def test_singleton_suite_matches_run(self):
        config = quick_config(total_timesteps=400, warmup_transitions=1000)
        results = run_suite([config])
        rows = summarize(results)
        assert len(rows) == 1
        assert rows[0].seed_count == 1
        assert rows[0].final_mean == results[0].summary.final_window_mean

    def test_suite_is_repeatable(self):
        configs = [
            quick_config(total_timesteps=400, warmup_transitions=1000, seed=s) for s in (0, 1)
        ]
        a = summarize(run_suite(configs))
        b = summarize(run_suite([dataclasses.replace(c) for c in configs]))
        assert [(r.config_id, r.final_mean, r.final_std) for r in a] == [
            (r.config_id, r.final_mean, r.final_std) for r in b
        ]

    def test_std_uses_sample_estimator(self):
        configs = [
            quick_config(total_timesteps=400, warmup_transitions=1000, seed=s) for s in (0, 1, 2)
        ]
        results = run_suite(configs)
        rows = summarize(results)
        finals = [r.summary.final_window_mean for r in results]
        assert rows[0].seed_count == 3
        assert rows[0].final_std == pytest.approx(np.std(finals, ddof=1))

    def test_failures_reported_but_suite_continues(self):
        good = quick_config(total_timesteps=200, warmup_transitions=1000)
        bad = quick_config(total_timesteps=200)
        bad.sampler = "bogus"
        results = run_suite([bad, good])
        assert results[0].error is not None
        assert results[1].summary is not None

    def test_parallel_matches_serial(self):
        configs = [
            quick_config(total_timesteps=400, warmup_transitions=1000, seed=s) for s in (0, 1)
        ]
        serial = run_suite(configs, jobs=1)
        parallel = run_suite([dataclasses.replace(c) for c in configs], jobs=2)
        for a, b in zip(serial, parallel):
            assert a.summary.episodes == b.summary.episodes


class TestCsv:
    def test_empty_records_header_only(self, tmp_path):
        path = tmp_path / "episodes.csv"
        write_episode_csv([], path)
        text = path.read_text()
        assert text == "episode,global_step,return,length,rc_window,replay_reward,subset_size,subset_fallbacks\n"

    def test_single_record_two_lines(self, tmp_path):
        path = tmp_path / "episodes.csv"
        write_episode_csv(
            [EpisodeRecord(0, 200, -1234.5678901234567, 200, -1234.5678901234567)], path
        )
        assert len(path.read_text().splitlines()) == 2

    def test_episode_round_trip(self, tmp_path):
        records = [
            EpisodeRecord(0, 200, -1.2345678901234567, 200, -1.2345678901234567, None, None, None),
            EpisodeRecord(1, 400, -0.1, 200, -0.6672839450617283, 0.5671, 123, 4),
        ]
        path = tmp_path / "episodes.csv"
        write_episode_csv(records, path)
        assert read_episode_csv(path) == records

    def test_trace_round_trip(self, tmp_path):
        records = [TraceRecord(1000, 0.123456789012345678, 17.25, -3.5)]
        path = tmp_path / "trace.csv"
        write_trace_csv(records, path)
        assert read_trace_csv(path) == records

    def test_newlines_are_unix(self, tmp_path):
        path = tmp_path / "episodes.csv"
        write_episode_csv([EpisodeRecord(0, 1, 0.5, 1, 0.5)], path)
        assert b"\r" not in path.read_bytes()
