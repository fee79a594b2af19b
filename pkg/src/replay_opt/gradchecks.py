"""Named verification checks behind the ``gradcheck`` CLI command.

Each check returns a max relative error; the shared pass threshold is 1e-4.
The ``corrupt`` hook inflates the named check's reported error past the
threshold and exists purely as a negative control for the exit-code contract.
"""

from __future__ import annotations

import numpy as np

from .ddpg import DdpgAgent, OuNoise
from .nn import AdamState, GradTape, adam_step, grad_check, mlp_init

THRESHOLD = 1e-4
_CORRUPTION = 1e-2


def check_mlp(corrupt: bool = False) -> float:
    rng = np.random.default_rng(100)
    worst = 0.0
    hidden_acts = ("tanh", "relu", "sigmoid")
    for trial in range(6):
        net = mlp_init([3, 8, 2], [hidden_acts[trial % 3], "linear"], seed=trial)
        x = rng.normal(size=(4, 3))
        coeff = rng.normal(size=(4, 2))

        def loss_fn(y, coeff=coeff):
            return float((coeff * y).sum()), coeff.copy()

        worst = max(worst, grad_check(net, loss_fn, x))
    return worst + (_CORRUPTION if corrupt else 0.0)


def _small_agent(seed: int = 0) -> DdpgAgent:
    return DdpgAgent(
        obs_dim=3,
        action_dim=1,
        action_high=np.array([2.0]),
        hidden_sizes=(8, 8),
        actor_seed=seed,
        critic_seed=seed + 1,
    )


def check_critic_loss(corrupt: bool = False) -> float:
    rng = np.random.default_rng(200)
    worst = 0.0
    for trial in range(5):
        agent = _small_agent(trial)
        states = rng.normal(size=(5, 3))
        actions = rng.uniform(-2, 2, size=(5, 1))
        rewards = rng.normal(size=5)
        next_states = rng.normal(size=(5, 3))
        dones = rng.random(5) < 0.4
        targets = agent.critic_targets(rewards, next_states, dones)

        def loss_fn(q, targets=targets):
            td = targets - q[:, 0]
            return float(np.mean(td**2)), (-2.0 * td / len(td))[:, None]

        worst = max(worst, grad_check(agent.critic, loss_fn, np.hstack([states, actions])))
    return worst + (_CORRUPTION if corrupt else 0.0)


def _states_away_from_kinks(agent: DdpgAgent, rng, n: int = 4, gap: float = 1e-3) -> np.ndarray:
    """Draw states keeping every relu pre-activation along the actor-critic
    chain at least ``gap`` from zero, so finite differences stay one-sided."""
    states = rng.normal(size=(n, agent.obs_dim))
    for _ in range(200):
        head, actor_cache = agent.actor.forward_cached(states)
        stacked = np.hstack([states, agent.action_high * head])
        _, critic_cache = agent.critic.forward_cached(stacked)
        closest = min(
            float(np.min(np.abs(z))) for _, z, _ in actor_cache + critic_cache
        )
        if closest >= gap:
            break
        states = rng.normal(size=(n, agent.obs_dim))
    return states


def check_actor_chain(corrupt: bool = False) -> float:
    rng = np.random.default_rng(300)
    worst = 0.0
    for trial in range(5):
        agent = _small_agent(trial + 10)
        # the near-zero head init would push chain gradients under the
        # finite-difference noise floor; give the check net a full-scale head
        agent.actor.weights[-1] = rng.uniform(-0.5, 0.5, agent.actor.weights[-1].shape)
        agent.actor.biases[-1] = rng.uniform(-0.5, 0.5, agent.actor.biases[-1].shape)
        states = _states_away_from_kinks(agent, rng)
        n = len(states)

        def loss_fn(head, agent=agent, states=states):
            actions = agent.action_high * head
            stacked = np.hstack([states, actions])
            q, cache = agent.critic.forward_cached(stacked)
            tape = agent.critic.backward(cache, np.full((n, 1), -1.0 / n))
            return -float(np.mean(q[:, 0])), tape.input_grad[:, agent.obs_dim :] * agent.action_high

        worst = max(worst, grad_check(agent.actor, loss_fn, states))
    return worst + (_CORRUPTION if corrupt else 0.0)


def check_replay_policy_surrogate(corrupt: bool = False) -> float:
    rng = np.random.default_rng(400)
    worst = 0.0
    for trial in range(5):
        net = mlp_init([3, 6, 1], ["relu", "sigmoid"], seed=trial + 20)
        feats = rng.normal(size=(6, 3))
        bits = rng.integers(0, 2, size=6).astype(float)
        reward = float(rng.normal())

        def loss_fn(y, bits=bits, reward=reward):
            phi = np.clip(y[:, 0], 1e-8, 1 - 1e-8)
            loss = -reward * float(np.sum(bits * np.log(phi) + (1 - bits) * np.log(1 - phi)))
            grad = (-reward * (bits / phi - (1 - bits) / (1 - phi)))[:, None]
            return loss, grad

        worst = max(worst, grad_check(net, loss_fn, feats))
    return worst + (_CORRUPTION if corrupt else 0.0)


def check_adam_step(corrupt: bool = False) -> float:
    """Relative error of one Adam step against an independent recompute."""
    rng = np.random.default_rng(500)
    net = mlp_init([2, 4, 1], ["tanh", "linear"], seed=30)
    state = AdamState.for_net(net, learning_rate=1e-3)
    tape = GradTape.zeros_like(net)
    for g in tape.weight_grads + tape.bias_grads:
        g[:] = rng.normal(size=g.shape)
    expected = []
    for p, g in zip(net.weights + net.biases, tape.weight_grads + tape.bias_grads):
        m_hat = (0.1 * g) / (1 - 0.9)
        v_hat = (0.001 * g * g) / (1 - 0.999)
        expected.append(p - 1e-3 * m_hat / (np.sqrt(v_hat) + 1e-8))
    adam_step(net, tape, state)
    worst = 0.0
    for p, e in zip(net.weights + net.biases, expected):
        worst = max(worst, float(np.max(np.abs(p - e) / np.maximum(np.abs(e), 1e-8))))
    return worst + (_CORRUPTION if corrupt else 0.0)


def check_ou_noise_determinism(corrupt: bool = False) -> float:
    a = OuNoise(2, rng=np.random.default_rng(60))
    b = OuNoise(2, rng=np.random.default_rng(60))
    sa = np.array([a.sample() for _ in range(200)])
    sb = np.array([b.sample() for _ in range(200)])
    return float(np.max(np.abs(sa - sb))) + (_CORRUPTION if corrupt else 0.0)


CHECKS = [
    ("mlp", check_mlp),
    ("critic-loss", check_critic_loss),
    ("actor-chain", check_actor_chain),
    ("ero-surrogate", check_replay_policy_surrogate),
    ("adam-step", check_adam_step),
    ("ou-noise", check_ou_noise_determinism),
]


def run_all(corrupt: str | None = None) -> list[tuple[str, float]]:
    return [(name, fn(corrupt=(name == corrupt))) for name, fn in CHECKS]
