"""Dense network substrate: MLPs with hand-written backprop and Adam.

All math is double-precision numpy. Gradients are computed analytically layer
by layer (no autodiff graph), which keeps every derivative inspectable and
lets the finite-difference checker validate the whole stack to tight
tolerances. The same class backs the actor, the critic, and the replay
scoring network.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractViolation, NumericFault
from .seeding import as_generator

ACTIVATIONS = ("tanh", "relu", "sigmoid", "linear")

# Sigmoid heads must stay strictly inside (0, 1); unclipped float64 rounds
# sigmoid(z) to exactly 1.0 once z exceeds ~37.
_SIG_LO = 2.0**-53
_SIG_HI = 1.0 - 2.0**-53


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    expz = np.exp(z[~pos])
    out[~pos] = expz / (1.0 + expz)
    return np.clip(out, _SIG_LO, _SIG_HI)


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return _sigmoid(z)
    return z


def _activation_grad(name: str, z: np.ndarray, out: np.ndarray) -> np.ndarray:
    # derivative wrt the pre-activation, reusing the forward output where cheaper
    if name == "tanh":
        return 1.0 - out * out
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "sigmoid":
        return out * (1.0 - out)
    return np.ones_like(z)


@dataclass
class GradTape:
    """Per-parameter gradient accumulator for one Mlp, plus the input gradient."""

    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]
    input_grad: np.ndarray | None = None

    @classmethod
    def zeros_like(cls, net: "Mlp") -> "GradTape":
        return cls(
            weight_grads=[np.zeros_like(w) for w in net.weights],
            bias_grads=[np.zeros_like(b) for b in net.biases],
        )

    def add_(self, other: "GradTape") -> None:
        for g, o in zip(self.weight_grads, other.weight_grads):
            g += o
        for g, o in zip(self.bias_grads, other.bias_grads):
            g += o

    def scale_(self, factor: float) -> None:
        for g in self.weight_grads:
            g *= factor
        for g in self.bias_grads:
            g *= factor


@dataclass
class Mlp:
    """Fully connected network with per-layer activation tags.

    ``layer_sizes`` lists the input width followed by every layer's output
    width; ``activations`` holds one tag per non-input layer, drawn from
    ``ACTIVATIONS``. Parameters are float64 throughout.
    """

    layer_sizes: list[int]
    activations: list[str]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def param_count(self) -> int:
        return sum((i + 1) * o for i, o in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "Mlp":
        return Mlp(
            layer_sizes=list(self.layer_sizes),
            activations=list(self.activations),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ContractViolation(
                f"expected input of shape (batch, {self.input_dim}), got {x.shape}"
            )
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Run the network on a (batch, input_dim) matrix."""
        h = self._check_input(x)
        for w, b, act in zip(self.weights, self.biases, self.activations):
            h = _activate(act, h @ w + b)
        return h

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        """Forward pass that also returns the intermediates backward() needs."""
        h = self._check_input(x)
        cache = []
        for w, b, act in zip(self.weights, self.biases, self.activations):
            z = h @ w + b
            out = _activate(act, z)
            cache.append((h, z, out))
            h = out
        return h, cache

    def backward(self, cache: list, output_grad: np.ndarray) -> GradTape:
        """Backpropagate d(loss)/d(output) through the cached forward pass.

        Returns gradients for every weight and bias, summed over the batch,
        plus d(loss)/d(input) in ``input_grad``.
        """
        output_grad = np.asarray(output_grad, dtype=np.float64)
        if output_grad.shape != cache[-1][2].shape:
            raise ContractViolation(
                f"output_grad shape {output_grad.shape} does not match "
                f"forward output {cache[-1][2].shape}"
            )
        tape = GradTape(weight_grads=[None] * len(self.weights), bias_grads=[None] * len(self.biases))
        dh = output_grad
        for layer in range(len(self.weights) - 1, -1, -1):
            h_in, z, out = cache[layer]
            dz = dh * _activation_grad(self.activations[layer], z, out)
            tape.weight_grads[layer] = h_in.T @ dz
            tape.bias_grads[layer] = dz.sum(axis=0)
            dh = dz @ self.weights[layer].T
        tape.input_grad = dh
        return tape


def mlp_init(layer_sizes, activations, seed, output_scale: float | None = None) -> Mlp:
    """Build an Mlp with fan-in uniform init, deterministic in ``seed``.

    Hidden layers draw from U(-1/sqrt(fan_in), 1/sqrt(fan_in)). When
    ``output_scale`` is given the final layer instead draws from
    U(-output_scale, output_scale), used to start actor actions near zero and
    replay scores near one half.
    """
    layer_sizes = list(layer_sizes)
    activations = list(activations)
    if len(layer_sizes) < 2:
        raise ConfigError("need at least an input and an output layer size")
    if any((not isinstance(s, (int, np.integer))) or s <= 0 for s in layer_sizes):
        raise ConfigError(f"layer sizes must be positive integers, got {layer_sizes}")
    if len(activations) != len(layer_sizes) - 1:
        raise ConfigError(
            f"need one activation per non-input layer: "
            f"{len(layer_sizes) - 1} layers, {len(activations)} activations"
        )
    for act in activations:
        if act not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {act!r}, expected one of {ACTIVATIONS}")

    rng = as_generator(seed)
    weights, biases = [], []
    last = len(layer_sizes) - 2
    for layer, (fan_in, fan_out) in enumerate(zip(layer_sizes[:-1], layer_sizes[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        if output_scale is not None and layer == last:
            bound = output_scale
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return Mlp(layer_sizes=layer_sizes, activations=activations, weights=weights, biases=biases)


@dataclass
class AdamState:
    """Adam moments and hyperparameters for one Mlp's parameters."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m_w: list[np.ndarray] = field(default_factory=list)
    v_w: list[np.ndarray] = field(default_factory=list)
    m_b: list[np.ndarray] = field(default_factory=list)
    v_b: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_net(cls, net: Mlp, learning_rate: float, **kwargs) -> "AdamState":
        state = cls(learning_rate=learning_rate, **kwargs)
        state.m_w = [np.zeros_like(w) for w in net.weights]
        state.v_w = [np.zeros_like(w) for w in net.weights]
        state.m_b = [np.zeros_like(b) for b in net.biases]
        state.v_b = [np.zeros_like(b) for b in net.biases]
        return state


def adam_step(net: Mlp, tape: GradTape, state: AdamState) -> None:
    """Apply one bias-corrected Adam update to ``net`` in place."""
    for layer, g in enumerate(tape.weight_grads):
        if not np.all(np.isfinite(g)) or not np.all(np.isfinite(tape.bias_grads[layer])):
            raise NumericFault(f"non-finite gradient in layer {layer}")
    state.step_count += 1
    t = state.step_count
    b1, b2, eps, lr = state.beta1, state.beta2, state.epsilon, state.learning_rate
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    params = list(zip(net.weights, tape.weight_grads, state.m_w, state.v_w))
    params += list(zip(net.biases, tape.bias_grads, state.m_b, state.v_b))
    for p, g, m, v in params:
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def grad_check(net: Mlp, loss_fn, x: np.ndarray, step: float = 1e-5) -> float:
    """Compare analytic parameter gradients against central finite differences.

    ``loss_fn`` maps the network output to ``(scalar_loss, dloss_doutput)``
    and must be deterministic. Returns the maximum over parameters of
    ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)``; the caller
    decides what threshold to assert.
    """
    y, cache = net.forward_cached(x)
    _, dy = loss_fn(y)
    tape = net.backward(cache, dy)

    def loss_at_params() -> float:
        return float(loss_fn(net.forward(x))[0])

    worst = 0.0
    arrays = list(zip(net.weights, tape.weight_grads)) + list(zip(net.biases, tape.bias_grads))
    for param, grad in arrays:
        it = np.nditer(param, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = param[idx]
            param[idx] = orig + step
            plus = loss_at_params()
            param[idx] = orig - step
            minus = loss_at_params()
            param[idx] = orig
            numeric = (plus - minus) / (2.0 * step)
            analytic = grad[idx]
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
