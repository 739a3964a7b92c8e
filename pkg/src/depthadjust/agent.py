"""Feed-forward Q-network with explicit gradients, replay, and training.

The network is a small rectifier MLP with one linear output per action,
trained by plain gradient descent on the one-step Bellman error against a
periodically synced target copy. Everything is driven by one seeded
generator, so training is a pure function of (scenes, configs, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .comfort import comfort_score
from .disparity import DisparityMap, scale_disparity
from .env import Action, DepthAdjustEnv, EnvConfig, Transition, encoding_fingerprint
from .errors import (
    ConfigError,
    EmptyBatchError,
    FingerprintMismatchError,
    FormatError,
    LengthMismatchError,
)

MODEL_SCHEMA_VERSION = 1

N_ACTIONS = 3


@dataclass
class QNetwork:
    """Affine layers with rectifier hidden activations and a linear head."""

    weights: list[np.ndarray]  # each (n_in, n_out)
    biases: list[np.ndarray]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_in(self) -> int:
        return self.weights[0].shape[0]

    def copy(self) -> "QNetwork":
        return QNetwork(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


def init_qnetwork(layer_sizes: list[int], rng: np.random.Generator) -> QNetwork:
    """Uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.

    Zero biases make the untrained greedy policy tie-break to the first
    action everywhere, which keeps early episodes long enough for the
    epsilon schedule to see its full step budget.
    """
    if len(layer_sizes) < 2 or any(n < 1 for n in layer_sizes):
        raise ConfigError(f"bad layer sizes {layer_sizes}")
    weights, biases = [], []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-limit, limit, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return QNetwork(weights=weights, biases=biases)


def _forward_cached(
    net: QNetwork, x: np.ndarray
) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    # x is (batch, n_in); returns (q, pre-activations, activations-incl-input).
    acts = [x]
    pre = []
    h = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    q = h @ net.weights[-1] + net.biases[-1]
    return q, pre, acts


def _check_input(net: QNetwork, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.n_in,):
        raise LengthMismatchError(f"input shape {x.shape}, expected ({net.n_in},)")
    return x


def forward(net: QNetwork, x: np.ndarray) -> np.ndarray:
    """Q-values for one encoded state, shape (3,)."""
    x = _check_input(net, x)
    q, _, _ = _forward_cached(net, x[None, :])
    return q[0]


def _backprop(
    net: QNetwork, pre: list[np.ndarray], acts: list[np.ndarray], dq: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    grad_w = [np.empty(0)] * len(net.weights)
    grad_b = [np.empty(0)] * len(net.biases)
    delta = dq
    for layer in range(len(net.weights) - 1, -1, -1):
        grad_w[layer] = acts[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ net.weights[layer].T) * (pre[layer - 1] > 0.0)
    return grad_w, grad_b


def backward(
    net: QNetwork, x: np.ndarray, action: int, target: float
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Exact gradients of (Q(x)[action] - target)^2 for every parameter."""
    x = _check_input(net, x)
    q, pre, acts = _forward_cached(net, x[None, :])
    dq = np.zeros((1, N_ACTIONS))
    dq[0, action] = 2.0 * (q[0, action] - target)
    return _backprop(net, pre, acts, dq)


@dataclass(frozen=True)
class AgentConfig:
    discount: float = 0.9
    learning_rate: float = 1e-3
    batch_size: int = 32
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 20000
    target_sync: int = 200
    buffer_capacity: int = 10000
    episodes: int = 2000
    hidden: tuple[int, int] = (64, 64)
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.discount < 1:
            raise ConfigError("discount must be in [0, 1)")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1 or self.target_sync < 1 or self.buffer_capacity < 1:
            raise ConfigError("batch_size, target_sync, buffer_capacity must be >= 1")
        if self.eps_decay_steps < 1:
            raise ConfigError("eps_decay_steps must be >= 1")
        for name in ("eps_start", "eps_end"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.eps_end > self.eps_start:
            raise ConfigError("eps_end must be <= eps_start")
        if self.episodes < 0:
            raise ConfigError("episodes must be >= 0")
        hidden = tuple(int(n) for n in self.hidden)
        if not hidden or any(n < 1 for n in hidden):
            raise ConfigError("hidden layer sizes must be positive")
        object.__setattr__(self, "hidden", hidden)


def epsilon_at(step: int, config: AgentConfig) -> float:
    """Linear schedule from eps_start to eps_end over eps_decay_steps."""
    frac = min(1.0, step / config.eps_decay_steps)
    return config.eps_start + (config.eps_end - config.eps_start) * frac


def select_action(
    net: QNetwork, x: np.ndarray, epsilon: float, rng: np.random.Generator | None
) -> int:
    """Epsilon-greedy action; greedy ties break to the lowest index."""
    if epsilon > 0:
        if rng is None:
            raise ConfigError("exploration requires an RNG")
        if rng.random() < epsilon:
            return int(rng.integers(N_ACTIONS))
    return int(np.argmax(forward(net, x)))


class ReplayItem(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """FIFO ring of encoded transitions; sampling uses the caller's RNG."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("capacity must be >= 1")
        self.capacity = capacity
        self._items: list[ReplayItem] = []
        self._cursor = 0

    def push(self, item: ReplayItem) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._cursor] = item
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[ReplayItem]:
        if batch_size > len(self._items):
            raise EmptyBatchError(
                f"requested {batch_size} samples from buffer of {len(self._items)}"
            )
        idx = rng.choice(len(self._items), size=batch_size, replace=False)
        return [self._items[i] for i in idx]

    def __len__(self) -> int:
        return len(self._items)


def from_transition(transition: Transition) -> ReplayItem:
    return ReplayItem(
        state=transition.state.encoded,
        action=int(transition.action),
        reward=transition.reward,
        next_state=transition.next_state.encoded,
        done=transition.done,
    )


def train_step(
    net: QNetwork,
    target_net: QNetwork,
    batch: list[ReplayItem],
    config: AgentConfig,
) -> float:
    """One gradient-descent step on the batch Bellman MSE; returns the
    pre-update loss. Only ``net`` is modified."""
    if not batch:
        raise EmptyBatchError("empty batch")
    x = np.stack([item.state for item in batch])
    x_next = np.stack([item.next_state for item in batch])
    actions = np.array([item.action for item in batch])
    rewards = np.array([item.reward for item in batch])
    done = np.array([item.done for item in batch])

    q_next, _, _ = _forward_cached(target_net, x_next)
    targets = rewards + np.where(done, 0.0, config.discount * q_next.max(axis=1))

    q, pre, acts = _forward_cached(net, x)
    rows = np.arange(len(batch))
    residual = q[rows, actions] - targets
    loss = float(np.mean(residual**2))

    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * residual / len(batch)
    grad_w, grad_b = _backprop(net, pre, acts, dq)
    for layer in range(len(net.weights)):
        net.weights[layer] -= config.learning_rate * grad_w[layer]
        net.biases[layer] -= config.learning_rate * grad_b[layer]
    return loss


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    episode_return: float
    final_vc: float
    final_ratio: float
    steps: int
    epsilon: float


@dataclass
class TrainingLog:
    episodes: list[EpisodeRecord] = field(default_factory=list)
    losses: list[tuple[int, float]] = field(default_factory=list)


def train(
    scenes: list[DisparityMap],
    env_config: EnvConfig,
    agent_config: AgentConfig,
    progress: Callable[[EpisodeRecord], None] | None = None,
) -> tuple[QNetwork, TrainingLog]:
    """Train a Q-network over the scene set, cycling scenes round-robin.

    Per step: epsilon-greedy action, environment step, replay push, one
    gradient update once the buffer can fill a batch, and a target-network
    copy every ``target_sync`` updates. ``progress`` (if given) is called
    with each completed :class:`EpisodeRecord`.
    """
    if not scenes:
        raise ConfigError("need at least one training scene")
    rng = np.random.default_rng(agent_config.seed)
    sizes = [env_config.encoded_length, *agent_config.hidden, N_ACTIONS]
    net = init_qnetwork(sizes, rng)
    target_net = net.copy()
    buffer = ReplayBuffer(agent_config.buffer_capacity)
    log = TrainingLog()
    global_step = 0
    updates = 0

    for episode in range(agent_config.episodes):
        env = DepthAdjustEnv(scenes[episode % len(scenes)], env_config)
        state = env.reset()
        episode_return = 0.0
        steps = 0
        eps = epsilon_at(global_step, agent_config)
        while not env.done:
            eps = epsilon_at(global_step, agent_config)
            action = select_action(net, state.encoded, eps, rng)
            transition = env.step(Action(action))
            buffer.push(from_transition(transition))
            episode_return += transition.reward
            state = transition.next_state
            global_step += 1
            steps += 1
            if len(buffer) >= agent_config.batch_size:
                batch = buffer.sample(agent_config.batch_size, rng)
                loss = train_step(net, target_net, batch, agent_config)
                updates += 1
                log.losses.append((updates, loss))
                if updates % agent_config.target_sync == 0:
                    target_net = net.copy()
        record = EpisodeRecord(
            episode=episode,
            episode_return=episode_return,
            final_vc=env.comfort(),
            final_ratio=state.camera.ratio,
            steps=steps,
            epsilon=eps,
        )
        log.episodes.append(record)
        if progress is not None:
            progress(record)
    return net, log


def rollout_greedy(
    net: QNetwork, scene: DisparityMap, env_config: EnvConfig
) -> tuple[list[Transition], DisparityMap]:
    """Greedy policy until termination; returns the trace and adjusted map."""
    env = DepthAdjustEnv(scene, env_config)
    state = env.reset()
    transitions = []
    while not env.done:
        action = select_action(net, state.encoded, 0.0, None)
        transition = env.step(Action(action))
        transitions.append(transition)
        state = transition.next_state
    return transitions, scale_disparity(scene, state.camera.ratio)


def final_comfort(transitions: list[Transition], config: EnvConfig) -> float:
    """Comfort score of the terminal state of a trajectory."""
    if not transitions:
        raise EmptyBatchError("empty trajectory")
    return comfort_score(transitions[-1].next_state.features, config.model)


def write_training_log_csv(
    log: TrainingLog, episodes_path: str | Path, losses_path: str | Path
) -> None:
    lines = ["episode,return,final_vc,final_ratio,steps,epsilon"]
    for r in log.episodes:
        lines.append(
            f"{r.episode},{r.episode_return!r},{r.final_vc!r},"
            f"{r.final_ratio!r},{r.steps},{r.epsilon!r}"
        )
    Path(episodes_path).write_text("\n".join(lines) + "\n", encoding="ascii")
    lines = ["update,loss"]
    for update, loss in log.losses:
        lines.append(f"{update},{loss!r}")
    Path(losses_path).write_text("\n".join(lines) + "\n", encoding="ascii")


def save_model(path: str | Path, net: QNetwork, env_config: EnvConfig) -> None:
    """Persist parameters with the encoding fingerprint of ``env_config``."""
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "layer_sizes": net.layer_sizes,
        "fingerprint": encoding_fingerprint(env_config),
        "weights": [[float(v) for v in w.ravel()] for w in net.weights],
        "biases": [[float(v) for v in b] for b in net.biases],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="ascii")


def load_model(path: str | Path, env_config: EnvConfig | None = None) -> QNetwork:
    """Load a saved network; reject it if the stored encoding fingerprint
    does not match ``env_config``."""
    try:
        doc = json.loads(Path(path).read_text(encoding="ascii"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad model file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise FormatError(f"unsupported model schema in {path}")
    try:
        sizes = [int(n) for n in doc["layer_sizes"]]
        fingerprint = doc["fingerprint"]
        weights = [
            np.array(flat, dtype=np.float64).reshape(n_in, n_out)
            for flat, n_in, n_out in zip(doc["weights"], sizes[:-1], sizes[1:])
        ]
        biases = [np.array(b, dtype=np.float64) for b in doc["biases"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad model file {path}: {exc}") from exc
    if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
        raise FormatError(f"layer count mismatch in {path}")
    if any(b.shape != (n,) for b, n in zip(biases, sizes[1:])):
        raise FormatError(f"bias shape mismatch in {path}")
    if sizes[-1] != N_ACTIONS:
        raise FormatError(f"model head must have {N_ACTIONS} outputs")
    if env_config is not None and fingerprint != encoding_fingerprint(env_config):
        raise FingerprintMismatchError(
            "model was trained under a different feature/encoding configuration"
        )
    return QNetwork(weights=weights, biases=biases)
