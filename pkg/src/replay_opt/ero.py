"""Learned replay prioritization.

A small scoring network maps per-transition features to an inclusion
probability in (0, 1). At each episode end a Bernoulli mask is drawn from
those scores to select the active training subset, and the network itself is
trained by a score-function (REINFORCE) gradient: the realized mask bits act
as labels in a cross-entropy term scaled by the change in the recent-return
average, so masks that preceded an improvement are reinforced and masks that
preceded a regression are suppressed.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .nn import AdamState, adam_step, mlp_init
from .replay import MASK_UNDRAWN, ReplayBuffer
from .seeding import as_generator

FEATURE_DIM = 3          # transition reward, cached TD error, age ratio
SCORE_EPS = 1e-8         # log arguments clamped to [SCORE_EPS, 1 - SCORE_EPS]
STD_FLOOR = 1e-6


class RunningNorm:
    """Streaming mean/variance (Welford) for feature standardization."""

    def __init__(self, dim: int):
        self.dim = dim
        self.count = 0
        self.mean = np.zeros(dim)
        self._m2 = np.zeros(dim)

    @property
    def variance(self) -> np.ndarray:
        if self.count == 0:
            return np.ones(self.dim)
        return np.maximum(self._m2 / self.count, 0.0)

    def update(self, row: np.ndarray) -> None:
        row = np.asarray(row, dtype=np.float64)
        self.count += 1
        delta = row - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (row - self.mean)

    def normalize(self, rows: np.ndarray) -> np.ndarray:
        if self.count == 0:
            return np.asarray(rows, dtype=np.float64)
        std = np.sqrt(self.variance)
        return (rows - self.mean) / np.maximum(std, STD_FLOOR)


class ReplayRewardTracker:
    """Windowed return bookkeeping that produces the replay reward.

    The replay reward is the difference between the current windowed mean of
    episode returns and the windowed mean captured at the previous episode
    end; it is absent until two estimates exist.
    """

    def __init__(self, window: int = 100):
        self.returns = deque(maxlen=window)
        self.previous_mean: float | None = None

    def record_episode(self, episode_return: float) -> None:
        self.returns.append(float(episode_return))

    @property
    def window_mean(self) -> float | None:
        if not self.returns:
            return None
        return float(np.mean(self.returns))

    def replay_reward(self) -> float | None:
        current = self.window_mean
        if current is None:
            return None
        reward = None if self.previous_mean is None else current - self.previous_mean
        self.previous_mean = current
        return reward


def draw_mask(scores: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli draw per slot: bit i is 1 with probability scores[i]."""
    return rng.random(len(scores)) < scores


class EroPolicy:
    """Scoring network, feature pipeline, mask bookkeeping, and its optimizer.

    Features are (reward, cached TD error, insert_step / current_step). The
    first two are standardized by running statistics accumulated at store
    time; the age ratio is already bounded in (0, 1] and passes through
    unchanged (its store-time value is identically 1, so running statistics
    over it would be degenerate).
    """

    def __init__(
        self,
        hidden_sizes=(64, 64),
        learning_rate: float = 1e-4,
        update_steps: int = 1,
        update_batch_size: int = 64,
        lazy_refresh: bool = False,
        refresh_always: bool = False,
        init_seed=None,
        draw_rng=None,
    ):
        sizes = [FEATURE_DIM, *hidden_sizes, 1]
        acts = ["relu"] * len(hidden_sizes) + ["sigmoid"]
        self.score_net = mlp_init(sizes, acts, seed=init_seed, output_scale=3e-3)
        self.adam = AdamState.for_net(self.score_net, learning_rate=learning_rate)
        self.normalizer = RunningNorm(2)
        self.update_steps = update_steps
        self.update_batch_size = update_batch_size
        self.lazy_refresh = lazy_refresh
        self.refresh_always = refresh_always
        self._rng = as_generator(draw_rng)

        self.last_refresh_step: int | None = None
        self.last_replay_reward: float | None = None
        self.last_update_indices: np.ndarray | None = None
        self.skipped_nonfinite = 0
        self.skipped_no_candidates = 0

    # ------------------------------------------------------------------ features

    def raw_features(self, buffer: ReplayBuffer, indices: np.ndarray, current_step: int) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        age_ratio = buffer.insert_timesteps[indices] / max(current_step, 1)
        return np.column_stack(
            [buffer.rewards[indices], buffer.td_errors[indices], age_ratio]
        )

    def features(self, buffer: ReplayBuffer, indices: np.ndarray, current_step: int) -> np.ndarray:
        raw = self.raw_features(buffer, indices, current_step)
        out = raw.copy()
        out[:, :2] = self.normalizer.normalize(raw[:, :2])
        return out

    def score(self, features: np.ndarray) -> np.ndarray:
        """Inclusion probabilities in (0, 1), one per feature row."""
        return self.score_net.forward(features)[:, 0]

    # ------------------------------------------------------------- store hooks

    def observe_store(self, buffer: ReplayBuffer, idx: int, current_step: int) -> float:
        """Update feature statistics and score the freshly stored slot."""
        raw = self.raw_features(buffer, np.array([idx]), current_step)
        self.normalizer.update(raw[0, :2])
        score = float(self.score(self.features(buffer, np.array([idx]), current_step))[0])
        buffer.priority_scores[idx] = score
        return score

    def refresh_scores(self, buffer: ReplayBuffer, indices: np.ndarray, current_step: int) -> None:
        """Lazily rescore only the replayed slots."""
        indices = np.asarray(indices, dtype=np.int64)
        if len(indices) == 0:
            return
        indices = np.unique(indices[indices < buffer.size])
        buffer.priority_scores[indices] = self.score(self.features(buffer, indices, current_step))

    # ---------------------------------------------------------- episode hooks

    def refresh_subset(self, buffer: ReplayBuffer, current_step: int, rng=None) -> int:
        """Draw a fresh Bernoulli mask over every live slot; returns subset size.

        Scores are recomputed for the whole buffer unless ``lazy_refresh`` is
        set, in which case the cached (lazily updated) scores are used as-is.
        """
        n = len(buffer)
        if n == 0:
            return 0
        rng = self._rng if rng is None else rng
        if self.lazy_refresh:
            scores = buffer.priority_scores[:n]
        else:
            scores = self.score(self.features(buffer, np.arange(n), current_step))
            buffer.priority_scores[:n] = scores
        bits = draw_mask(scores, rng)
        buffer.set_subset_mask(bits)
        self.last_refresh_step = current_step
        return int(bits.sum())

    def update_policy(
        self,
        buffer: ReplayBuffer,
        replay_reward: float,
        current_step: int,
        rng=None,
    ) -> float | None:
        """One REINFORCE update of the scoring network.

        Samples a uniform mini-batch over slots that carry a drawn mask bit
        (slots stored after the last draw have no realized action and are
        excluded) and ascends ``replay_reward * [I log(phi) + (1-I) log(1-phi)]``
        summed over the batch. Returns the minimized surrogate value, or None
        when the update was skipped.
        """
        if replay_reward is None or not np.isfinite(replay_reward):
            self.skipped_nonfinite += 1
            return None
        rng = self._rng if rng is None else rng
        candidates = np.flatnonzero(buffer.mask_drawn[: buffer.size] != MASK_UNDRAWN)
        if len(candidates) == 0:
            self.skipped_no_candidates += 1
            return None

        loss = None
        for _ in range(self.update_steps):
            indices = candidates[rng.integers(0, len(candidates), size=self.update_batch_size)]
            bits = buffer.mask_drawn[indices].astype(np.float64)
            feats = self.features(buffer, indices, current_step)
            out, cache = self.score_net.forward_cached(feats)
            phi = np.clip(out[:, 0], SCORE_EPS, 1.0 - SCORE_EPS)
            log_lik = float(np.sum(bits * np.log(phi) + (1.0 - bits) * np.log(1.0 - phi)))
            loss = -replay_reward * log_lik
            dloss_dout = (-replay_reward * (bits / phi - (1.0 - bits) / (1.0 - phi)))[:, None]
            tape = self.score_net.backward(cache, dloss_dout)
            adam_step(self.score_net, tape, self.adam)
            self.last_update_indices = indices
        return loss

    def on_episode_end(self, tracker: ReplayRewardTracker, buffer: ReplayBuffer, current_step: int) -> int:
        """Episode-end composite: replay reward, policy update, mask refresh.

        The caller records the episode return on ``tracker`` first. The mask
        is redrawn whenever an update ran (an absent replay reward skips
        both, unless ``refresh_always`` forces the redraw). Returns the
        current subset size either way.
        """
        reward = tracker.replay_reward()
        self.last_replay_reward = reward
        if reward is not None:
            self.update_policy(buffer, reward, current_step)
            return self.refresh_subset(buffer, current_step)
        if self.refresh_always:
            return self.refresh_subset(buffer, current_step)
        return len(buffer.subset_indices())
