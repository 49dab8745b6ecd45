"""Q-learning trend investors: actions, replay memory, and training.

A trend investor sees only the mean mid of its neighbouring dealers. Its
seven actions are sell/buy with a fixed holding horizon (ids 0-2 sell for
100/250/500 ticks, ids 4-6 buy for the same horizons) plus id 3, do
nothing. Trades always use the system's maximum trade size. One decision
is in flight at a time: while a trade (or a do-nothing observation) is
open, the agent's turns are consumed waiting; once the horizon elapses the
next turn closes it, realises the reward, stores the transition, and runs
one training update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from otcsim import neural
from otcsim.config import SimConfig

STATE_WINDOW = 512
N_ACTIONS = 7
HOLDING_TICKS = (100, 250, 500)
DO_NOTHING = 3
# Do-nothing observations resolve on the shortest horizon so their temporal
# scale stays comparable to real trades.
IDLE_HORIZON = 100


def action_direction(action: int) -> int:
    """+1 for buys (4-6), -1 for sells (0-2), 0 for do-nothing."""
    if action < DO_NOTHING:
        return -1
    if action > DO_NOTHING:
        return 1
    return 0


def action_holding(action: int) -> int:
    if action == DO_NOTHING:
        return IDLE_HORIZON
    return HOLDING_TICKS[action if action < DO_NOTHING else action - 4]


@dataclass
class OpenTrade:
    direction: int  # +1 the investor bought, -1 it sold
    size: float
    open_price: float
    opened_at: int
    holding: int
    state: np.ndarray  # visible window at open time
    action: int


@dataclass
class PendingIdle:
    opened_at: int
    state: np.ndarray


class ReplayMemory:
    """Ring buffer of (state, action, reward, next state) transitions.

    States are kept in float32 to bound memory; training casts back up.
    Overwrites the oldest entry once capacity is reached.
    """

    def __init__(self, capacity: int, state_dim: int = STATE_WINDOW):
        self.capacity = capacity
        self.state_dim = state_dim
        self.size = 0
        self._cursor = 0
        self._s = np.empty((0, state_dim), dtype=np.float32)
        self._a = np.empty(0, dtype=np.int64)
        self._r = np.empty(0, dtype=np.float64)
        self._s2 = np.empty((0, state_dim), dtype=np.float32)

    def __len__(self) -> int:
        return self.size

    def _grow(self) -> None:
        new_rows = min(self.capacity, max(256, 2 * len(self._a)))
        if new_rows <= len(self._a):
            return
        self._s = np.resize(self._s, (new_rows, self.state_dim))
        self._s2 = np.resize(self._s2, (new_rows, self.state_dim))
        self._a = np.resize(self._a, new_rows)
        self._r = np.resize(self._r, new_rows)

    def push(self, s, a, r, s2) -> None:
        if self._cursor >= len(self._a):
            self._grow()
        i = self._cursor
        self._s[i] = s
        self._a[i] = a
        self._r[i] = r
        self._s2[i] = s2
        self._cursor = (self._cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        idx = rng.choice(self.size, size=batch, replace=False)
        return self._s[idx], self._a[idx], self._r[idx], self._s2[idx]


class TrendInvestor:
    """One learning agent: online/target networks, memory, and schedule."""

    def __init__(self, index: int, config: SimConfig, init_seed):
        self.index = index
        self.config = config
        init_rng = np.random.Generator(np.random.PCG64(init_seed))
        # float32 keeps every activation small and fast; precision is ample
        # for Q-values on unit-scale rewards.
        self.online = neural.build_q_network(
            init_rng, STATE_WINDOW, N_ACTIONS, dtype=np.float32
        )
        self.target = self.online.copy()
        self.online.consolidate()
        self.target.consolidate()
        self.optimizer = neural.Adam(
            [self.online.flat_params], learning_rate=config.learning_rate
        )
        self.memory = ReplayMemory(config.replay_capacity)
        self.epsilon = 1.0
        self.frozen = False  # loaded weights, no further learning
        self.updates = 0
        self.realized_profit = 0.0
        self.open_trade: OpenTrade | None = None
        self.pending_idle: PendingIdle | None = None
        # (tick, update index, epsilon, batch mse, cumulative profit)
        self.telemetry: list[tuple[int, int, float, float, float]] = []
        self._shift = config.initial_price
        self._scale = 10.0

    def _normalize(self, states: np.ndarray) -> np.ndarray:
        x = (states.astype(np.float32) - np.float32(self._shift)) / np.float32(self._scale)
        return x.reshape(-1, 1, STATE_WINDOW)

    def q_values(self, state: np.ndarray) -> np.ndarray:
        return self.online.forward(self._normalize(np.asarray(state)[None, :]))[0]

    def select_action(self, state: np.ndarray, rng: np.random.Generator) -> int:
        """Epsilon-greedy over the online network; ties go to the first index."""
        if rng.random() < self.epsilon:
            return int(rng.integers(N_ACTIONS))
        return int(np.argmax(self.q_values(state)))

    def store_transition(
        self, s: np.ndarray, action: int, reward: float, s2: np.ndarray
    ) -> None:
        self.memory.push(
            np.asarray(s, dtype=np.float32), action, reward, np.asarray(s2, np.float32)
        )

    def train_step(self, rng: np.random.Generator, tick: int = -1) -> float | None:
        """One minibatch update; skipped silently until memory covers a batch.

        Bellman targets bootstrap off the target network; rewards are
        scaled down to price-relative units so losses are comparable
        across price levels. Each completed update decays epsilon.
        """
        cfg = self.config
        if self.frozen or len(self.memory) < cfg.batch_size:
            return None
        s, a, r, s2 = self.memory.sample(cfg.batch_size, rng)
        next_q = self.target.forward(self._normalize(s2)).max(axis=1)
        targets = (r / cfg.reward_scale + cfg.discount * next_q).astype(np.float32)
        loss, _ = neural.masked_mse_loss(self.online, self._normalize(s), a, targets)
        self.optimizer.step([self.online.flat_params], [self.online.flat_grads])
        neural.soft_update(self.target, self.online, cfg.tau)
        self.epsilon = max(cfg.epsilon_floor, self.epsilon * cfg.epsilon_decay)
        self.updates += 1
        self.telemetry.append(
            (tick, self.updates, self.epsilon, loss, self.realized_profit)
        )
        return loss

    @property
    def at_floor(self) -> bool:
        return self.epsilon <= self.config.epsilon_floor
