"""Simulation lifecycle: seeding, agent creation, scheduling, and interventions.

Each tick: one eligible actor (value investors, trend investors, and any
dealer past its soft position limit when the broker market is on) is drawn
uniformly and allowed one action, so the system sees at most one trade per
tick. All dealer mids are then refreshed and recorded, along with the
global mean mid and each trend investor's visible mean.

A single RNG stream drives everything at run time, consumed in a fixed
order (scheduler draw, then the actor's own draws, then tie-breaks), so a
(config, seed) pair replays exactly. Trend investor weight initialisation
uses per-agent substreams derived from the seed.
"""

from __future__ import annotations

import numpy as np

from otcsim import market, network
from otcsim.config import SimConfig
from otcsim.market import DEALER_BUYS, DEALER_SELLS, DealerBook, Trade
from otcsim.network import NetworkTopology, Role
from otcsim.trend import (
    DO_NOTHING,
    IDLE_HORIZON,
    STATE_WINDOW,
    OpenTrade,
    PendingIdle,
    TrendInvestor,
    action_holding,
)

_HISTORY_CHUNK = 1 << 14


def draw_targets(
    n: int,
    disparity: float,
    sigma: float,
    rng: np.random.Generator,
    center: float = 100.0,
) -> np.ndarray:
    """Draw investor targets from the two-mode Gaussian mixture.

    Each target comes from N(center + disparity, sigma) or
    N(center - disparity, sigma) with probability one half each.
    """
    if n == 0:
        return np.empty(0)
    signs = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    return center + signs * disparity + rng.normal(0.0, sigma, n)


class Simulation:
    """One world: network, dealers, investors, histories, and the schedule."""

    def __init__(self, config: SimConfig, seed: int | None = None):
        config.validate()
        self.config = config
        self.seed = config.rng_seed if seed is None else seed
        self.rng = np.random.Generator(np.random.PCG64(self.seed))

        cfg = config
        self.n_dealers = cfg.n_dealers
        self.net: NetworkTopology = network.generate_network(
            cfg.n_dealers, cfg.n_value_investors, cfg.n_trend_investors,
            cfg.prob_of_link, self.rng,
        )
        self.book = DealerBook(
            cfg.n_dealers, cfg.bid_offer, cfg.skew_coefficient, cfg.initial_price
        )
        self.vi_ids = self.net.by_role(Role.VALUE_INVESTOR)
        self.ti_ids = self.net.by_role(Role.TREND_INVESTOR)
        self.vi_targets = draw_targets(
            cfg.n_value_investors, cfg.market_disparity, cfg.target_mixture_sigma,
            self.rng, center=cfg.initial_price,
        )
        self.vi_inventory = np.zeros(cfg.n_value_investors)
        self.ti_inventory = np.zeros(cfg.n_trend_investors)
        self.value_investors_removed = False

        self.trends = [
            TrendInvestor(agent_id, cfg, np.random.SeedSequence([self.seed, agent_id]))
            for agent_id in self.ti_ids
        ]

        # Static neighbour caches (the network never rewires mid-run).
        self._vi_dealers = [
            np.fromiter(sorted(self.net.dealer_neighbors(v)), dtype=np.int64)
            for v in self.vi_ids
        ]
        self._ti_dealers = [
            np.fromiter(sorted(self.net.dealer_neighbors(t)), dtype=np.int64)
            for t in self.ti_ids
        ]
        # Per dealer: itself plus dealer neighbours (trade print visibility),
        # and dealer neighbours only (inter-dealer counterparties).
        self._mm_peers = [
            np.fromiter(sorted(self.net.dealer_neighbors(m)), dtype=np.int64)
            for m in range(cfg.n_dealers)
        ]
        self._mm_visibility = [
            np.concatenate(([m], self._mm_peers[m])) for m in range(cfg.n_dealers)
        ]
        # Row-normalised neighbour weights: visible mean = weights @ mids.
        self._vis_weights = np.zeros((cfg.n_trend_investors, cfg.n_dealers))
        for slot, dealers in enumerate(self._ti_dealers):
            self._vis_weights[slot, dealers] = 1.0 / len(dealers)

        self.tick = 0
        # With no learners the trained regime starts immediately.
        self.trained_tick: int | None = 0 if not self.trends else None
        self._investor_pool = list(self.vi_ids) + list(self.ti_ids)
        self.trades: list[Trade] = []
        # (tick, agent slot, action, visible price, visible price 50 ago,
        #  visible min so far, visible max so far)
        self.decisions: list[tuple] = []

        cap = _HISTORY_CHUNK
        self._mid_hist = np.empty((cap, cfg.n_dealers))
        self._mean_hist = np.empty(cap)
        self._inv_hist = np.empty(cap)  # summed dealer inventory per tick
        self._vis_hist = np.empty((cap, cfg.n_trend_investors))
        self._vis_min = np.full(cfg.n_trend_investors, np.inf)
        self._vis_max = np.full(cfg.n_trend_investors, -np.inf)
        self._write_history_row(0)

    # ------------------------------------------------------------------
    # Histories

    def _write_history_row(self, row: int) -> None:
        if row >= len(self._mean_hist):
            grow = len(self._mean_hist) * 2
            self._mid_hist = np.resize(self._mid_hist, (grow, self._mid_hist.shape[1]))
            self._mean_hist = np.resize(self._mean_hist, grow)
            self._inv_hist = np.resize(self._inv_hist, grow)
            self._vis_hist = np.resize(self._vis_hist, (grow, self._vis_hist.shape[1]))
        mids = self._mid_hist[row]
        np.multiply(self.book.inventory, -self.book.skew_coefficient, out=mids)
        mids += self.book.last_price
        self._mean_hist[row] = np.add.reduce(mids) / len(mids)
        self._inv_hist[row] = np.add.reduce(self.book.inventory)
        if self.trends:
            vis = self._vis_weights @ mids
            self._vis_hist[row] = vis
            np.minimum(self._vis_min, vis, out=self._vis_min)
            np.maximum(self._vis_max, vis, out=self._vis_max)

    @property
    def mid_history(self) -> np.ndarray:
        """Per-dealer mid series, one row per recorded tick (tick+1 rows)."""
        return self._mid_hist[: self.tick + 1]

    @property
    def mean_mid_history(self) -> np.ndarray:
        return self._mean_hist[: self.tick + 1]

    @property
    def dealer_inventory_history(self) -> np.ndarray:
        """Summed dealer inventory, one value per recorded tick."""
        return self._inv_hist[: self.tick + 1]

    def visible_window(self, slot: int) -> np.ndarray:
        """Latest 512 visible mean mids for a trend investor, padded with
        the initial price before the simulation start."""
        n = self.tick + 1
        window = np.full(STATE_WINDOW, self.config.initial_price)
        take = min(n, STATE_WINDOW)
        window[STATE_WINDOW - take :] = self._vis_hist[n - take : n, slot]
        return window

    # ------------------------------------------------------------------
    # Scheduling

    def _actor_pool(self) -> list[int]:
        pool = self._investor_pool
        if self.config.enable_broker_market:
            limit = self.config.dealer_position_limit
            inv = self.book.inventory
            if inv.max(initial=0.0) > limit or inv.min(initial=0.0) < -limit:
                pool = pool + [
                    int(m) for m in np.flatnonzero(np.abs(inv) > limit)
                ]
        return pool

    def step(self) -> Trade | None:
        """Advance one tick; returns the trade executed this tick, if any."""
        pool = self._actor_pool()
        trade = None
        if pool:
            actor = pool[int(self.rng.integers(len(pool)))]
            trade = self._act(actor)
        self._write_history_row(self.tick + 1)
        self.tick += 1
        return trade

    def run(self, n_ticks: int) -> None:
        for _ in range(n_ticks):
            self.step()

    def run_until_trained(self, max_ticks: int = 2_000_000) -> int:
        """Advance until every trend investor sits at the epsilon floor."""
        while self.trained_tick is None:
            if self.tick >= max_ticks:
                raise RuntimeError(f"not trained after {max_ticks} ticks")
            self.step()
        return self.trained_tick

    def _act(self, actor: int) -> Trade | None:
        if actor >= self.n_dealers + len(self.vi_ids):
            return self._trend_act(actor - self.n_dealers - len(self.vi_ids))
        if actor >= self.n_dealers:
            return self._value_act(actor - self.n_dealers)
        return self._dealer_act(actor)

    # ------------------------------------------------------------------
    # Actions

    def _execute(self, dealer: int, counterparty: int, flag: int, price: float,
                 size: float) -> Trade:
        """Book a trade: move both inventories, propagate the print to the
        dealers that can see it, and append to the event log."""
        buyer, seller = (counterparty, dealer) if flag == DEALER_SELLS else (dealer, counterparty)
        trade = Trade(self.tick, buyer, seller, dealer, price, size, flag)
        self.book.inventory[dealer] += size
        self._credit_counterparty(counterparty, -size)
        market.observe_trade(self.book, self._mm_visibility[dealer], price)
        self.trades.append(trade)
        return trade

    def _credit_counterparty(self, agent: int, amount: float) -> None:
        if agent < self.n_dealers:
            self.book.inventory[agent] += amount
        elif agent < self.n_dealers + len(self.vi_ids):
            self.vi_inventory[agent - self.n_dealers] += amount
        else:
            self.ti_inventory[agent - self.n_dealers - len(self.vi_ids)] += amount

    def _value_act(self, slot: int) -> Trade | None:
        cand = market.best_value_candidate(
            self.book,
            self._vi_dealers[slot],
            float(self.vi_targets[slot]),
            self.config.vi_sigma,
            self.config.trade_size_cap,
            self.rng,
        )
        if cand is None:
            return None
        dealer, flag, price, size = cand
        return self._execute(dealer, self.vi_ids[slot], flag, price, size)

    def _dealer_act(self, dealer: int) -> Trade | None:
        """Inter-dealer recycling for a dealer past its soft limit: shed as
        much inventory as one capped trade allows, at the best peer quote."""
        inventory = float(self.book.inventory[dealer])
        peers = self._mm_peers[dealer]
        if len(peers) == 0:
            return None
        cap = self.config.trade_size_cap
        shed = float(np.clip(-inventory, -cap, cap))
        if shed == 0.0:
            return None
        # The counterparty takes the other side of the shed amount.
        size = -shed
        flag = DEALER_SELLS if size < 0 else DEALER_BUYS
        counterparty, price = market.best_quote(self.book, peers, flag, size, self.rng)
        return self._execute(counterparty, dealer, flag, price, size)

    def _trend_act(self, slot: int) -> Trade | None:
        agent = self.trends[slot]
        tick = self.tick
        if agent.open_trade is not None:
            ot = agent.open_trade
            if tick - ot.opened_at < ot.holding:
                return None
            flag = DEALER_BUYS if ot.direction > 0 else DEALER_SELLS
            size = ot.size if ot.direction > 0 else -ot.size
            dealer, price = market.best_quote(
                self.book, self._ti_dealers[slot], flag, size, self.rng
            )
            trade = self._execute(dealer, self.ti_ids[slot], flag, price, size)
            reward = ot.direction * ot.size * (price - ot.open_price)
            agent.realized_profit += reward
            agent.store_transition(ot.state, ot.action, reward, self.visible_window(slot))
            agent.open_trade = None
            agent.train_step(self.rng, tick)
            self._check_trained()
            return trade
        if agent.pending_idle is not None:
            idle = agent.pending_idle
            if tick - idle.opened_at < IDLE_HORIZON:
                return None
            agent.store_transition(idle.state, DO_NOTHING, 0.0, self.visible_window(slot))
            agent.pending_idle = None
            agent.train_step(self.rng, tick)
            self._check_trained()
            return None
        state = self.visible_window(slot)
        action = agent.select_action(state, self.rng)
        self._record_decision(slot, action)
        if action == DO_NOTHING:
            agent.pending_idle = PendingIdle(tick, state)
            return None
        direction = 1 if action > DO_NOTHING else -1
        cap = self.config.trade_size_cap
        flag = DEALER_SELLS if direction > 0 else DEALER_BUYS
        size = -cap if direction > 0 else cap
        dealer, price = market.best_quote(
            self.book, self._ti_dealers[slot], flag, size, self.rng
        )
        trade = self._execute(dealer, self.ti_ids[slot], flag, price, size)
        agent.open_trade = OpenTrade(
            direction, cap, price, tick, action_holding(action), state, action
        )
        return trade

    def _record_decision(self, slot: int, action: int) -> None:
        row = self.tick
        price = float(self._vis_hist[row, slot])
        back = row - 50
        price_back = (
            float(self._vis_hist[back, slot]) if back >= 0 else self.config.initial_price
        )
        self.decisions.append(
            (
                self.tick,
                slot,
                action,
                price,
                price_back,
                float(self._vis_min[slot]),
                float(self._vis_max[slot]),
            )
        )

    def _check_trained(self) -> None:
        if self.trained_tick is None and all(a.at_floor for a in self.trends):
            self.trained_tick = self.tick

    # ------------------------------------------------------------------
    # Interventions (applied between ticks)

    def apply_crash(self) -> None:
        """Re-mark every value investor target 20% lower, immediately."""
        self.vi_targets *= 0.80

    def force_dealers_short(self) -> None:
        """Set every dealer's inventory past the short side of the soft limit
        by one full trade size, so a single capped trade cannot clear it."""
        breach = self.config.dealer_position_limit + self.config.trade_size_cap
        self.book.inventory[:] = -breach

    def remove_value_investors(self) -> None:
        """Drop all value investors from the actor pool and the network."""
        if self.value_investors_removed:
            return
        self.value_investors_removed = True
        self._investor_pool = list(self.ti_ids)
        self.net = self.net.without_nodes(self.vi_ids)

    # ------------------------------------------------------------------
    # Views

    def total_inventory(self) -> float:
        return float(
            self.book.inventory.sum()
            + self.vi_inventory.sum()
            + self.ti_inventory.sum()
        )

    def arbitrage_now(self) -> float:
        """Best bid minus best offer across dealers; positive is free money."""
        mids = self.book.mids()
        return float(mids.max() - mids.min() - self.book.bid_offer)

    def snapshot(self) -> dict:
        """JSON-ready view of the world at the current tick."""
        mids = self.book.mids()
        half = self.book.bid_offer / 2.0
        return {
            "tick": self.tick,
            "seed": self.seed,
            "config": self.config.to_dict(),
            "fingerprint": self.config.replace(rng_seed=self.seed).fingerprint(),
            "mids": mids.tolist(),
            "bids": (mids - half).tolist(),
            "offers": (mids + half).tolist(),
            "inventories": self.book.inventory.tolist(),
            "mean_mid": float(mids.mean()),
            "arbitrage": self.arbitrage_now(),
            "targets": self.vi_targets.tolist(),
            "value_investors_removed": self.value_investors_removed,
            "epsilons": [a.epsilon for a in self.trends],
            "profits": [a.realized_profit for a in self.trends],
            "trained_tick": self.trained_tick,
            "edges": sorted(self.net.edges),
            "roles": {str(n): r.value for n, r in sorted(self.net.roles.items())},
        }
