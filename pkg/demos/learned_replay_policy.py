"""The learned replay policy in isolation: score transitions, draw a mask,
compute the replay reward from a return window, and watch one policy-gradient
step push scores in the reward's direction.

Run: python3 demos/learned_replay_policy.py
"""

import numpy as np

from replay_opt import EroPolicy, ReplayBuffer, ReplayRewardTracker, Transition

rng = np.random.default_rng(0)
buf = ReplayBuffer(64, obs_dim=2, action_dim=1)
policy = EroPolicy(init_seed=0, draw_rng=np.random.default_rng(1))

print("== Store transitions; each gets scored as it arrives ==")
for i in range(32):
    idx = buf.store(
        Transition(
            state=rng.normal(size=2),
            action=rng.normal(size=1),
            reward=float(rng.normal()),
            next_state=rng.normal(size=2),
            done=False,
            insert_timestep=i + 1,
        )
    )
    policy.observe_store(buf, idx, current_step=i + 1)
scores = buf.priority_scores[:32]
print(f"initial scores hover near 0.5: min={scores.min():.3f} max={scores.max():.3f}")

print("\n== Draw a Bernoulli mask over the whole buffer ==")
size = policy.refresh_subset(buf, current_step=32)
print(f"subset holds {size} of {len(buf)} transitions")
print(f"mask bits for the first 16 slots: {buf.mask_drawn[:16].tolist()}")

print("\n== Replay reward from the episode-return window ==")
tracker = ReplayRewardTracker(window=100)
for ret in (-1500.0, -1400.0, -1300.0):
    tracker.record_episode(ret)
    reward = tracker.replay_reward()
    shown = "absent" if reward is None else f"{reward:+.1f}"
    print(f"episode return {ret:+.0f} -> window mean {tracker.window_mean:+.1f}, replay reward {shown}")

print("\n== Policy-gradient steps with a positive replay reward ==")
selected = buf.mask_drawn[:32] == 1
before = buf.priority_scores[:32].copy()


def mask_log_likelihood() -> float:
    phi = np.clip(buf.priority_scores[:32], 1e-8, 1 - 1e-8)
    bits = buf.mask_drawn[:32]
    return float(np.sum(bits * np.log(phi) + (1 - bits) * np.log(1 - phi)))


log_lik_before = mask_log_likelihood()
for _ in range(200):
    policy.update_policy(buf, replay_reward=25.0, current_step=32)
policy.refresh_scores(buf, np.arange(32), current_step=32)
after = buf.priority_scores[:32]

print(f"log-likelihood of the drawn mask: {log_lik_before:.3f} -> {mask_log_likelihood():.3f}")
print(f"mean score of selected slots:   {before[selected].mean():.4f} -> {after[selected].mean():.4f}")
print(f"mean score of unselected slots: {before[~selected].mean():.4f} -> {after[~selected].mean():.4f}")
print("a positive reward makes the next mask look like the one that preceded the improvement;")
print("a negative reward pushes the other way")
