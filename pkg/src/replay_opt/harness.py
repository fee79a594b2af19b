"""Experiment orchestration: seeded runs, episode accounting, CSV metrics.

A run interleaves fixed-length rollout phases with fixed-count training
phases until the step budget is spent. Everything is deterministic in
(config, seed): the master seed splits into named substreams (environment,
network init, exploration noise, sampler, replay policy), and metrics are
written with full round-trip float precision.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .ddpg import DdpgAgent, OuNoise
from .envs import ENV_NAMES, make_env
from .ero import EroPolicy, ReplayRewardTracker
from .errors import ConfigError, NumericFault
from .replay import SAMPLER_KINDS, PerConfig, ReplayBuffer, Transition, make_sampler
from .seeding import named_streams


@dataclass
class RunConfig:
    """Every knob of a single training run, all overridable from config files."""

    env: str = "pendulum"
    sampler: str = "uniform"
    total_timesteps: int = 10_000
    seed: int = 0
    rollout_steps: int = 100
    train_steps_per_iter: int = 50
    batch_size: int = 64
    buffer_capacity: int = 100_000
    warmup_transitions: int = 1000
    gamma: float = 0.99
    tau: float = 0.001
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    hidden_sizes: tuple = (64, 64)
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    per_alpha: float = 0.6
    per_beta0: float = 0.4
    per_epsilon: float = 0.01
    rank_refresh_interval: int = 1000
    ero_lr: float = 1e-4
    replay_updating_steps: int = 1
    ero_batch_size: int = 64
    reward_window: int = 100
    subset_strict: bool = False
    subset_refresh_always: bool = False
    lazy_refresh: bool = False
    trace_interval: int = 1000
    eval_every: int = 0
    early_stop_window: int = 0
    early_stop_threshold: float = 0.0
    out_dir: str = "runs"
    config_id: str = ""

    def resolved_id(self) -> str:
        return self.config_id or f"{self.sampler}-{self.env}"

    def validate(self) -> None:
        if self.env not in ENV_NAMES:
            raise ConfigError(f"unknown env {self.env!r}, expected one of {ENV_NAMES}")
        if self.sampler not in SAMPLER_KINDS:
            raise ConfigError(f"unknown sampler {self.sampler!r}, expected one of {SAMPLER_KINDS}")
        positive = (
            "rollout_steps",
            "batch_size",
            "buffer_capacity",
            "reward_window",
            "trace_interval",
            "ero_batch_size",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        non_negative = (
            "total_timesteps",
            "train_steps_per_iter",
            "warmup_transitions",
            "replay_updating_steps",
            "eval_every",
            "early_stop_window",
        )
        for name in non_negative:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")

    def to_items(self) -> list[tuple[str, str]]:
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            out.append((f.name, str(value)))
        return out


@dataclass
class EpisodeRecord:
    episode: int
    global_step: int
    episode_return: float
    length: int
    rc_window: float
    replay_reward: float | None = None
    subset_size: int | None = None
    subset_fallbacks: int | None = None


@dataclass
class TraceRecord:
    global_step: int
    mean_abs_td: float
    mean_step_diff: float
    mean_reward: float


@dataclass
class EvalRecord:
    global_step: int
    eval_return: float
    length: int


@dataclass
class RunSummary:
    config: RunConfig
    episodes: list[EpisodeRecord]
    traces: list[TraceRecord]
    evals: list[EvalRecord]
    total_steps: int
    train_steps: int
    wall_seconds: float
    stopped_early: bool = False

    @property
    def final_window_mean(self) -> float:
        if not self.episodes:
            return float("nan")
        return self.episodes[-1].rc_window


def run(config: RunConfig) -> RunSummary:
    """Execute one training run; deterministic in (config, seed)."""
    config.validate()
    start = time.perf_counter()
    streams = named_streams(config.seed)

    env = make_env(config.env)
    spec = env.spec()
    obs = env.reset(seed=streams["env"])

    agent = DdpgAgent(
        obs_dim=spec.obs_dim,
        action_dim=spec.action_dim,
        action_high=spec.action_high,
        hidden_sizes=config.hidden_sizes,
        actor_lr=config.actor_lr,
        critic_lr=config.critic_lr,
        gamma=config.gamma,
        tau=config.tau,
        actor_seed=streams["actor_init"],
        critic_seed=streams["critic_init"],
    )
    noise = OuNoise(spec.action_dim, theta=config.ou_theta, sigma=config.ou_sigma, rng=streams["noise"])

    buffer = ReplayBuffer(
        config.buffer_capacity, spec.obs_dim, spec.action_dim, subset_strict=config.subset_strict
    )
    planned_train_steps = (config.total_timesteps // config.rollout_steps) * config.train_steps_per_iter
    per_cfg = PerConfig(
        alpha=config.per_alpha,
        beta0=config.per_beta0,
        beta_anneal_steps=planned_train_steps,
        epsilon=config.per_epsilon,
        rank_refresh_interval=config.rank_refresh_interval,
    )
    sampler = make_sampler(config.sampler, buffer, streams["sampler"], per_cfg)

    policy = None
    if config.sampler == "ero":
        policy = EroPolicy(
            hidden_sizes=config.hidden_sizes,
            learning_rate=config.ero_lr,
            update_steps=config.replay_updating_steps,
            update_batch_size=config.ero_batch_size,
            lazy_refresh=config.lazy_refresh,
            refresh_always=config.subset_refresh_always,
            init_seed=streams["replay_policy_init"],
            draw_rng=streams["replay_policy_draw"],
        )
    tracker = ReplayRewardTracker(window=config.reward_window)

    eval_env = None
    episodes: list[EpisodeRecord] = []
    traces: list[TraceRecord] = []
    evals: list[EvalRecord] = []
    global_step = 0
    train_count = 0
    episode_return = 0.0
    episode_length = 0
    stopped_early = False

    def run_eval_episode() -> None:
        nonlocal eval_env
        if eval_env is None:
            eval_env = make_env(config.env)
            eval_env.reset(seed=streams["eval_env"])
        eval_obs = eval_env.reset()
        total, length = 0.0, 0
        while True:
            res = eval_env.step(agent.act(eval_obs))
            total += res.reward
            length += 1
            eval_obs = res.next_obs
            if res.done or res.truncated:
                break
        evals.append(EvalRecord(global_step, total, length))

    try:
        while global_step < config.total_timesteps and not stopped_early:
            rollout = min(config.rollout_steps, config.total_timesteps - global_step)
            for _ in range(rollout):
                action = agent.act(obs, noise)
                result = env.step(action)
                global_step += 1
                idx = buffer.store(
                    Transition(
                        state=obs,
                        action=action,
                        reward=result.reward,
                        next_state=result.next_obs,
                        done=result.done,
                        insert_timestep=global_step,
                    )
                )
                sampler.on_store(idx)
                if policy is not None:
                    policy.observe_store(buffer, idx, global_step)
                episode_return += result.reward
                episode_length += 1

                if result.done or result.truncated:
                    tracker.record_episode(episode_return)
                    replay_reward = None
                    subset_size = None
                    fallbacks = None
                    if policy is not None:
                        subset_size = policy.on_episode_end(tracker, buffer, global_step)
                        replay_reward = policy.last_replay_reward
                        fallbacks = buffer.subset_fallbacks
                    episodes.append(
                        EpisodeRecord(
                            episode=len(episodes),
                            global_step=global_step,
                            episode_return=episode_return,
                            length=episode_length,
                            rc_window=tracker.window_mean,
                            replay_reward=replay_reward,
                            subset_size=subset_size,
                            subset_fallbacks=fallbacks,
                        )
                    )
                    episode_return = 0.0
                    episode_length = 0
                    obs = env.reset()
                    noise.reset()
                    if config.eval_every > 0 and len(episodes) % config.eval_every == 0:
                        run_eval_episode()
                    if (
                        config.early_stop_window > 0
                        and len(episodes) >= config.early_stop_window
                        and np.mean(
                            [r.episode_return for r in episodes[-config.early_stop_window :]]
                        )
                        >= config.early_stop_threshold
                    ):
                        stopped_early = True
                        break
                else:
                    obs = result.next_obs

            if stopped_early or len(buffer) < config.warmup_transitions:
                continue
            for _ in range(config.train_steps_per_iter):
                _, td_errors, batch = agent.train_step(sampler, config.batch_size)
                train_count += 1
                sampler.update_priorities(batch.indices, td_errors, batch.insert_timesteps)
                if policy is not None:
                    policy.refresh_scores(buffer, batch.indices, global_step)
                if train_count % config.trace_interval == 0:
                    traces.append(
                        TraceRecord(
                            global_step=global_step,
                            mean_abs_td=float(np.mean(np.abs(td_errors))),
                            mean_step_diff=float(np.mean(global_step - batch.insert_timesteps)),
                            mean_reward=float(np.mean(batch.rewards)),
                        )
                    )
    except NumericFault as fault:
        raise NumericFault(
            f"{fault} (env step {global_step}, training step {train_count})"
        ) from fault

    return RunSummary(
        config=config,
        episodes=episodes,
        traces=traces,
        evals=evals,
        total_steps=global_step,
        train_steps=train_count,
        wall_seconds=time.perf_counter() - start,
        stopped_early=stopped_early,
    )


@dataclass
class SuiteResult:
    config: RunConfig
    summary: RunSummary | None = None
    error: Exception | None = None


def run_suite(configs: list[RunConfig], jobs: int = 1) -> list[SuiteResult]:
    """Run each config independently; failures are captured, not raised."""
    if not configs:
        raise ConfigError("run_suite needs at least one config")

    def one(config: RunConfig) -> SuiteResult:
        try:
            return SuiteResult(config=config, summary=run(config))
        except Exception as exc:  # noqa: BLE001 - suite keeps going by contract
            return SuiteResult(config=config, error=exc)

    if jobs <= 1:
        return [one(c) for c in configs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, configs))


@dataclass
class SummaryRow:
    config_id: str
    sampler: str
    env: str
    seed_count: int
    final_mean: float
    final_std: float
    wall_seconds: float


def summarize(results: list[SuiteResult]) -> list[SummaryRow]:
    """Aggregate suite results per config_id: mean and spread of final returns."""
    groups: dict[str, list[SuiteResult]] = {}
    for res in results:
        if res.summary is not None:
            groups.setdefault(res.config.resolved_id(), []).append(res)
    rows = []
    for config_id, members in groups.items():
        finals = np.array([m.summary.final_window_mean for m in members])
        std = float(np.std(finals, ddof=1)) if len(finals) > 1 else 0.0
        rows.append(
            SummaryRow(
                config_id=config_id,
                sampler=members[0].config.sampler,
                env=members[0].config.env,
                seed_count=len(members),
                final_mean=float(np.mean(finals)),
                final_std=std,
                wall_seconds=float(sum(m.summary.wall_seconds for m in members)),
            )
        )
    return rows


# ----------------------------------------------------------------- CSV layer

EPISODE_HEADER = [
    "episode",
    "global_step",
    "return",
    "length",
    "rc_window",
    "replay_reward",
    "subset_size",
    "subset_fallbacks",
]
TRACE_HEADER = ["global_step", "mean_abs_td", "mean_step_diff", "mean_reward"]
SUMMARY_HEADER = ["config_id", "sampler", "env", "seed_count", "final_mean", "final_std", "wall_seconds"]
EVAL_HEADER = ["global_step", "eval_return", "length"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_episode_csv(records: list[EpisodeRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(EPISODE_HEADER)
        for r in records:
            w.writerow(
                [
                    _fmt(r.episode),
                    _fmt(r.global_step),
                    _fmt(r.episode_return),
                    _fmt(r.length),
                    _fmt(r.rc_window),
                    _fmt(r.replay_reward),
                    _fmt(r.subset_size),
                    _fmt(r.subset_fallbacks),
                ]
            )


def read_episode_csv(path) -> list[EpisodeRecord]:
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(
                EpisodeRecord(
                    episode=int(row["episode"]),
                    global_step=int(row["global_step"]),
                    episode_return=float(row["return"]),
                    length=int(row["length"]),
                    rc_window=float(row["rc_window"]),
                    replay_reward=float(row["replay_reward"]) if row["replay_reward"] else None,
                    subset_size=int(row["subset_size"]) if row["subset_size"] else None,
                    subset_fallbacks=int(row["subset_fallbacks"]) if row["subset_fallbacks"] else None,
                )
            )
    return records


def write_trace_csv(records: list[TraceRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(TRACE_HEADER)
        for r in records:
            w.writerow([_fmt(r.global_step), _fmt(r.mean_abs_td), _fmt(r.mean_step_diff), _fmt(r.mean_reward)])


def read_trace_csv(path) -> list[TraceRecord]:
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(
                TraceRecord(
                    global_step=int(row["global_step"]),
                    mean_abs_td=float(row["mean_abs_td"]),
                    mean_step_diff=float(row["mean_step_diff"]),
                    mean_reward=float(row["mean_reward"]),
                )
            )
    return records


def write_summary_csv(rows: list[SummaryRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(SUMMARY_HEADER)
        for r in rows:
            w.writerow(
                [
                    r.config_id,
                    r.sampler,
                    r.env,
                    _fmt(r.seed_count),
                    _fmt(r.final_mean),
                    _fmt(r.final_std),
                    _fmt(r.wall_seconds),
                ]
            )


def write_eval_csv(records: list[EvalRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(EVAL_HEADER)
        for r in records:
            w.writerow([_fmt(r.global_step), _fmt(r.eval_return), _fmt(r.length)])
