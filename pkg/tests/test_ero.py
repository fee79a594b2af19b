"""Learned replay policy tests: features, mask draws, replay reward, updates."""

from __future__ import annotations

import numpy as np
import pytest

from replay_opt.ero import (
    FEATURE_DIM,
    EroPolicy,
    ReplayRewardTracker,
    RunningNorm,
    draw_mask,
)
from replay_opt.nn import grad_check, mlp_init
from replay_opt.replay import ReplayBuffer, Transition


def make_buffer(n: int, capacity: int = 256, seed: int = 0) -> ReplayBuffer:
    rng = np.random.default_rng(seed)
    buf = ReplayBuffer(capacity, obs_dim=3, action_dim=1)
    for i in range(n):
        buf.store(
            Transition(
                state=rng.normal(size=3),
                action=rng.normal(size=1),
                reward=float(rng.normal()),
                next_state=rng.normal(size=3),
                done=False,
                insert_timestep=i + 1,
            )
        )
    return buf


def fresh_policy(**kwargs) -> EroPolicy:
    kwargs.setdefault("init_seed", 0)
    kwargs.setdefault("draw_rng", np.random.default_rng(1))
    return EroPolicy(**kwargs)


def force_constant_score(policy: EroPolicy, value_preactivation: float = 0.0) -> None:
    policy.score_net.weights[-1][:] = 0.0
    policy.score_net.biases[-1][:] = value_preactivation


class TestRunningNorm:
    def test_identity_before_any_update(self):
        norm = RunningNorm(2)
        rows = np.array([[1.0, -2.0], [0.5, 3.0]])
        assert np.array_equal(norm.normalize(rows), rows)

    def test_constant_stream_centers_to_zero(self):
        norm = RunningNorm(1)
        for _ in range(50):
            norm.update(np.array([4.2]))
        assert np.allclose(norm.normalize(np.array([[4.2]])), 0.0)

    def test_matches_batch_statistics(self):
        rng = np.random.default_rng(2)
        data = rng.normal(size=(500, 3)) * [1.0, 10.0, 0.1] + [5.0, -3.0, 0.0]
        norm = RunningNorm(3)
        for row in data:
            norm.update(row)
        assert np.allclose(norm.mean, data.mean(axis=0))
        assert np.allclose(norm.variance, data.var(axis=0))
        assert np.all(norm.variance >= 0)


class TestFeatures:
    def test_age_ratio_definition(self):
        buf = make_buffer(1)
        buf.insert_timesteps[0] = 500
        policy = fresh_policy()
        raw = policy.raw_features(buf, np.array([0]), current_step=1000)
        assert raw[0, 2] == 0.5

    def test_feature_vector_contents(self):
        buf = make_buffer(3)
        buf.rewards[1] = -7.0
        buf.td_errors[1] = 2.5
        policy = fresh_policy()
        raw = policy.raw_features(buf, np.array([1]), current_step=4)
        assert raw.shape == (1, FEATURE_DIM)
        assert raw[0, 0] == -7.0
        assert raw[0, 1] == 2.5
        assert raw[0, 2] == buf.insert_timesteps[1] / 4

    def test_normalizer_identity_passes_raw_through(self):
        buf = make_buffer(4)
        policy = fresh_policy()
        raw = policy.raw_features(buf, np.arange(4), current_step=10)
        feats = policy.features(buf, np.arange(4), current_step=10)
        assert np.array_equal(feats, raw)

    def test_constant_rewards_normalize_to_zero(self):
        buf = ReplayBuffer(16, obs_dim=3, action_dim=1)
        policy = fresh_policy()
        for i in range(10):
            idx = buf.store(
                Transition(
                    state=np.zeros(3),
                    action=np.zeros(1),
                    reward=3.0,
                    next_state=np.zeros(3),
                    done=False,
                    insert_timestep=i + 1,
                )
            )
            policy.observe_store(buf, idx, i + 1)
        feats = policy.features(buf, np.arange(10), current_step=10)
        assert np.allclose(feats[:, 0], 0.0)


class TestScore:
    def test_zero_output_layer_scores_half(self):
        policy = fresh_policy()
        force_constant_score(policy)
        feats = np.random.default_rng(0).normal(size=(20, FEATURE_DIM))
        assert np.allclose(policy.score(feats), 0.5, atol=0, rtol=0)

    def test_identical_features_identical_scores(self):
        policy = fresh_policy()
        feats = np.tile(np.array([[0.3, -1.0, 0.5]]), (2, 1))
        s = policy.score(feats)
        assert s[0] == s[1]

    def test_scores_strictly_inside_unit_interval(self):
        policy = fresh_policy()
        feats = np.array([[1e6, 1e6, 1.0], [-1e6, -1e6, 0.0]])
        s = policy.score(feats)
        assert np.all(s > 0) and np.all(s < 1)

    def test_sigmoid_monotone_in_preactivation(self):
        policy = fresh_policy()
        force_constant_score(policy)
        net = policy.score_net
        # route a single positive weight from feature 0 to the head
        for w in net.weights[:-1]:
            w[:] = 0.0
        for b in net.biases[:-1]:
            b[:] = 0.0
        net.weights[0][0, 0] = 1.0
        net.weights[1][0, 0] = 1.0
        net.weights[2][0, 0] = 1.0
        lo = policy.score(np.array([[0.1, 0.0, 0.0]]))[0]
        hi = policy.score(np.array([[2.0, 0.0, 0.0]]))[0]
        assert hi > lo


class TestMaskDraws:
    def test_saturated_scores_select_everything(self):
        buf = make_buffer(50)
        policy = fresh_policy(lazy_refresh=True)
        buf.priority_scores[:50] = 1.0 - 1e-15
        size = policy.refresh_subset(buf, current_step=50)
        assert size == 50
        assert len(buf.subset_indices()) == 50

    def test_half_scores_concentrate_binomially(self):
        rng = np.random.default_rng(3)
        n = 10_000
        lam = np.full(n, 0.5)
        sizes = [int(draw_mask(lam, rng).sum()) for _ in range(50)]
        sigma = np.sqrt(n * 0.25)
        assert abs(np.mean(sizes) - 5000) <= 3 * sigma / np.sqrt(50)

    def test_fixed_rng_identical_mask(self):
        buf = make_buffer(100)
        policy = fresh_policy()
        a = policy.refresh_subset(buf, current_step=100, rng=np.random.default_rng(5))
        mask_a = buf.in_subset[:100].copy()
        b = policy.refresh_subset(buf, current_step=100, rng=np.random.default_rng(5))
        mask_b = buf.in_subset[:100].copy()
        assert a == b
        assert np.array_equal(mask_a, mask_b)

    def test_empty_buffer_noop(self):
        buf = ReplayBuffer(8, obs_dim=3, action_dim=1)
        policy = fresh_policy()
        assert policy.refresh_subset(buf, current_step=0) == 0

    def test_mask_bits_independent_across_slots(self):
        # covariance of pairs of bits under a fixed score vector is zero
        # within 3 sigma of the empirical estimator
        rng = np.random.default_rng(11)
        n_slots, n_draws = 20, 10_000
        lam = np.full(n_slots, 0.5)
        draws = np.stack([draw_mask(lam, rng) for _ in range(n_draws)]).astype(float)
        centered = draws - draws.mean(axis=0)
        cov = centered.T @ centered / n_draws
        sigma = 0.25 / np.sqrt(n_draws)
        off_diag = cov[~np.eye(n_slots, dtype=bool)]
        assert np.all(np.abs(off_diag) <= 3 * sigma)

    def test_subset_size_mean_matches_score_sum(self):
        rng = np.random.default_rng(13)
        lam = rng.random(2000)
        sizes = [int(draw_mask(lam, rng).sum()) for _ in range(400)]
        expected = lam.sum()
        sigma = np.sqrt(np.sum(lam * (1 - lam)))
        assert abs(np.mean(sizes) - expected) <= 3 * sigma / np.sqrt(400)


class TestReplayReward:
    def test_first_episode_absent(self):
        tracker = ReplayRewardTracker(window=100)
        tracker.record_episode(1.0)
        assert tracker.replay_reward() is None

    def test_scripted_sequence(self):
        tracker = ReplayRewardTracker(window=100)
        rewards = []
        for ret in [1.0, 2.0, 3.0]:
            tracker.record_episode(ret)
            rewards.append(tracker.replay_reward())
        assert rewards[0] is None
        assert rewards[1] == pytest.approx(0.5)  # mean(1,2) - mean(1)
        assert rewards[2] == pytest.approx(0.5)  # mean(1,2,3) - mean(1,2)

    def test_window_means(self):
        tracker = ReplayRewardTracker(window=2)
        tracker.record_episode(100.0)
        assert tracker.window_mean == 100.0
        assert tracker.replay_reward() is None
        tracker.record_episode(120.0)
        assert tracker.window_mean == 110.0
        assert tracker.replay_reward() == pytest.approx(10.0)

    def test_identical_means_give_zero(self):
        tracker = ReplayRewardTracker(window=1)
        tracker.record_episode(5.0)
        tracker.replay_reward()
        tracker.record_episode(5.0)
        assert tracker.replay_reward() == 0.0


class TestUpdatePolicy:
    def prepared(self, n=8, seed=0):
        buf = make_buffer(n, seed=seed)
        policy = fresh_policy(draw_rng=np.random.default_rng(seed + 100))
        policy.refresh_subset(buf, current_step=n)
        return buf, policy

    def test_zero_reward_first_step_leaves_params_unchanged(self):
        buf, policy = self.prepared()
        before = [w.copy() for w in policy.score_net.weights]
        policy.update_policy(buf, 0.0, current_step=8)
        assert all(np.array_equal(a, b) for a, b in zip(before, policy.score_net.weights))

    def test_positive_reward_raises_score_of_selected_slot(self):
        buf = make_buffer(1)
        policy = fresh_policy()
        buf.set_subset_mask(np.array([True]))
        before = float(policy.score(policy.features(buf, np.array([0]), 1))[0])
        policy.update_policy(buf, 1.0, current_step=1)
        after = float(policy.score(policy.features(buf, np.array([0]), 1))[0])
        assert after > before

    def test_negative_reward_lowers_score_of_selected_slot(self):
        buf = make_buffer(1)
        policy = fresh_policy()
        buf.set_subset_mask(np.array([True]))
        before = float(policy.score(policy.features(buf, np.array([0]), 1))[0])
        policy.update_policy(buf, -1.0, current_step=1)
        after = float(policy.score(policy.features(buf, np.array([0]), 1))[0])
        assert after < before

    def test_nonfinite_reward_skipped_with_counter(self):
        buf, policy = self.prepared()
        before = [w.copy() for w in policy.score_net.weights]
        assert policy.update_policy(buf, float("nan"), current_step=8) is None
        assert policy.skipped_nonfinite == 1
        assert all(np.array_equal(a, b) for a, b in zip(before, policy.score_net.weights))

    def test_no_drawn_bits_skipped_with_counter(self):
        buf = make_buffer(4)
        policy = fresh_policy()
        assert policy.update_policy(buf, 1.0, current_step=4) is None
        assert policy.skipped_no_candidates == 1

    def test_surrogate_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(21)
        net = mlp_init([FEATURE_DIM, 6, 1], ["relu", "sigmoid"], seed=22)
        feats = rng.normal(size=(5, FEATURE_DIM))
        bits = rng.integers(0, 2, size=5).astype(float)
        rr = 1.7

        def loss_fn(y):
            phi = np.clip(y[:, 0], 1e-8, 1 - 1e-8)
            loss = -rr * np.sum(bits * np.log(phi) + (1 - bits) * np.log(1 - phi))
            grad = (-rr * (bits / phi - (1 - bits) / (1 - phi)))[:, None]
            return loss, grad

        assert grad_check(net, loss_fn, feats) < 1e-4

    def test_update_restricted_to_drawn_slots(self):
        buf = make_buffer(6)
        policy = fresh_policy()
        policy.refresh_subset(buf, current_step=6)
        idx = buf.store(
            Transition(
                state=np.zeros(3),
                action=np.zeros(1),
                reward=0.0,
                next_state=np.zeros(3),
                done=False,
                insert_timestep=7,
            )
        )
        policy.update_policy(buf, 1.0, current_step=7)
        assert idx not in policy.last_update_indices


class TestOnEpisodeEnd:
    def test_first_episode_primes_tracker_without_update(self):
        buf = make_buffer(10)
        policy = fresh_policy()
        tracker = ReplayRewardTracker()
        tracker.record_episode(-100.0)
        size = policy.on_episode_end(tracker, buf, current_step=10)
        assert policy.last_replay_reward is None
        assert tracker.previous_mean == -100.0
        # no refresh by default, subset is still the all-ones default
        assert size == 10
        assert policy.last_refresh_step is None

    def test_refresh_always_flag(self):
        buf = make_buffer(10)
        policy = fresh_policy(refresh_always=True)
        tracker = ReplayRewardTracker()
        tracker.record_episode(-100.0)
        policy.on_episode_end(tracker, buf, current_step=10)
        assert policy.last_refresh_step == 10

    def test_second_episode_updates_then_refreshes(self):
        buf = make_buffer(10)
        policy = fresh_policy()
        tracker = ReplayRewardTracker()
        tracker.record_episode(-100.0)
        policy.on_episode_end(tracker, buf, current_step=10)
        tracker.record_episode(-50.0)
        policy.on_episode_end(tracker, buf, current_step=20)
        assert policy.last_replay_reward == pytest.approx(25.0)
        assert policy.last_refresh_step == 20
        # first update had no drawn bits yet; refresh happened anyway
        assert policy.skipped_no_candidates == 1
        tracker.record_episode(-40.0)
        policy.on_episode_end(tracker, buf, current_step=30)
        assert policy.skipped_no_candidates == 1  # bits exist now

    def test_end_to_end_determinism_over_episodes(self):
        def run():
            buf = make_buffer(40, seed=7)
            policy = fresh_policy(init_seed=3, draw_rng=np.random.default_rng(9))
            tracker = ReplayRewardTracker()
            rng = np.random.default_rng(17)
            sizes = []
            for ep in range(50):
                tracker.record_episode(float(rng.normal()))
                sizes.append(policy.on_episode_end(tracker, buf, current_step=40 + ep))
            return sizes

        assert run() == run()
