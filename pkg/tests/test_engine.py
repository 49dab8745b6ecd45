import numpy as np
import pytest

from otcsim.config import ConfigError, SimConfig
from otcsim.engine import Simulation, draw_targets
from otcsim.market import DEALER_BUYS
from otcsim.network import Role


def rng(seed=0):
    return np.random.default_rng(seed)


class TestDrawTargets:
    def test_collapsed_modes_center_on_initial_price(self):
        xs = draw_targets(100_000, 0.0, 5.0, rng(1))
        assert abs(xs.mean() - 100.0) < 0.05

    def test_mixture_moments(self):
        # Oracle: equal mixture of N(100-d, s) and N(100+d, s) has mean 100
        # and variance s^2 + d^2.
        xs = draw_targets(100_000, 20.0, 5.0, rng(2))
        assert abs(xs.mean() - 100.0) < 0.2
        assert xs.std() == pytest.approx(np.sqrt(5.0**2 + 20.0**2), rel=0.02)

    def test_empty(self):
        assert draw_targets(0, 20.0, 5.0, rng()).size == 0


class TestInit:
    def test_default_population_and_prices(self):
        sim = Simulation(SimConfig(rng_seed=1))
        assert len(sim.net.roles) == 25
        assert np.all(sim.book.mids() == 100.0)
        assert [a.epsilon for a in sim.trends] == [1.0] * 5
        assert len(sim.mean_mid_history) == 1

    def test_same_seed_reproduces_bit_identical_state(self):
        a = Simulation(SimConfig(rng_seed=9))
        b = Simulation(SimConfig(rng_seed=9))
        assert a.net.edges == b.net.edges
        np.testing.assert_array_equal(a.vi_targets, b.vi_targets)
        wa = np.concatenate([p.ravel() for p in a.trends[0].online.param_arrays()])
        wb = np.concatenate([p.ravel() for p in b.trends[0].online.param_arrays()])
        np.testing.assert_array_equal(wa, wb)

    def test_zero_dealers_rejected_with_field_message(self):
        with pytest.raises(ConfigError, match="n_dealers"):
            Simulation(SimConfig(n_dealers=0))

    def test_bad_probability_rejected(self):
        with pytest.raises(ConfigError, match="prob_of_link"):
            SimConfig(prob_of_link=1.5).validate()


class TestScheduler:
    def test_empty_pool_still_advances_and_records(self):
        cfg = SimConfig(n_value_investors=0, n_trend_investors=0, rng_seed=1)
        sim = Simulation(cfg)
        assert sim.step() is None
        assert sim.tick == 1
        assert len(sim.mean_mid_history) == 2
        assert not sim.trades

    def test_lone_eager_investor_trades_when_drawn(self):
        cfg = SimConfig(
            n_value_investors=1, n_trend_investors=0, prob_of_link=1.0, rng_seed=2
        )
        sim = Simulation(cfg)
        sim.vi_targets[0] = 150.0  # far above every offer
        trade = sim.step()
        assert trade is not None and trade.size < 0  # dealer sells to the buyer

    def test_uniform_selection_over_pool(self):
        # Broker market off keeps the pool at exactly the 15 investors.
        cfg = SimConfig(rng_seed=5, enable_broker_market=False)
        sim = Simulation(cfg)
        counts = {}
        original = sim._act

        def spy(actor):
            counts[actor] = counts.get(actor, 0) + 1
            return original(actor)

        sim._act = spy
        n = 10_000
        sim.run(n)
        assert set(counts) == set(sim.vi_ids) | set(sim.ti_ids)
        p = 1 / 15
        bound = 3 * np.sqrt(n * p * (1 - p))
        for actor, c in counts.items():
            assert abs(c - n * p) < bound + 1e-9, f"actor {actor} drawn {c}"

    def test_at_most_one_trade_per_tick(self):
        sim = Simulation(SimConfig(rng_seed=6))
        for _ in range(2000):
            before = len(sim.trades)
            sim.step()
            assert len(sim.trades) - before <= 1

    def test_breaching_dealer_joins_pool_only_with_broker_market(self):
        cfg = SimConfig(rng_seed=7)
        sim = Simulation(cfg)
        sim.book.inventory[3] = 25.0
        assert 3 in sim._actor_pool()
        sim.book.inventory[3] = 15.0
        assert 3 not in sim._actor_pool()
        off = Simulation(cfg.replace(enable_broker_market=False))
        off.book.inventory[3] = 25.0
        assert 3 not in off._actor_pool()


class TestHistories:
    def test_lengths_track_ticks(self):
        sim = Simulation(SimConfig(rng_seed=8))
        sim.run(777)
        assert len(sim.mean_mid_history) == 778
        assert sim.mid_history.shape == (778, 10)

    def test_global_history_is_rowwise_mean(self):
        sim = Simulation(SimConfig(rng_seed=9))
        sim.run(1500)
        np.testing.assert_allclose(
            sim.mean_mid_history, sim.mid_history.mean(axis=1), atol=1e-12
        )

    def test_recorded_mid_matches_quote_identity(self):
        sim = Simulation(SimConfig(rng_seed=10))
        sim.run(500)
        expected = sim.book.last_price - 0.001 * sim.book.inventory
        np.testing.assert_allclose(sim.mid_history[-1], expected, atol=1e-12)


class TestDeterminism:
    def test_identical_runs_match_exactly(self):
        logs = []
        for _ in range(2):
            sim = Simulation(SimConfig(rng_seed=11))
            sim.run(3000)
            logs.append(
                (
                    [(t.tick, t.buyer, t.seller, t.dealer, t.price, t.size, t.flag) for t in sim.trades],
                    sim.mean_mid_history.copy(),
                    sim.book.inventory.copy(),
                )
            )
        assert logs[0][0] == logs[1][0]
        np.testing.assert_array_equal(logs[0][1], logs[1][1])
        np.testing.assert_array_equal(logs[0][2], logs[1][2])


class TestConservation:
    def test_total_inventory_is_invariant(self):
        sim = Simulation(SimConfig(rng_seed=12))
        for _ in range(5000):
            sim.step()
        assert abs(sim.total_inventory()) < 1e-9

    def test_per_trade_transfer_is_zero_sum(self):
        sim = Simulation(SimConfig(rng_seed=13))
        for _ in range(500):
            before = sim.total_inventory()
            sim.step()
            assert sim.total_inventory() == pytest.approx(before, abs=1e-12)


class TestInterdealer:
    def overloaded_sim(self):
        cfg = SimConfig(prob_of_link=1.0, n_value_investors=0, n_trend_investors=0, rng_seed=14)
        sim = Simulation(cfg)
        sim.book.inventory[0] = 25.0
        sim.book.last_price[:] = [100.0, 100.0, 99.0] + [98.0] * 7
        return sim

    def test_breacher_sells_cap_to_highest_bidder(self):
        sim = self.overloaded_sim()
        trade = sim._dealer_act(0)
        assert trade is not None
        assert trade.seller == 0 and trade.flag == DEALER_BUYS
        assert trade.size == 3.0  # counterparty buys the capped shed
        assert trade.dealer == 1  # highest last price quotes the best bid
        assert sim.book.inventory[0] == 22.0
        assert sim.book.inventory[1] == 3.0

    def test_print_visible_to_counterparty_neighbors(self):
        sim = self.overloaded_sim()
        trade = sim._dealer_act(0)
        assert np.all(sim.book.last_price == trade.price)  # complete dealer graph

    def test_isolated_breacher_does_nothing(self):
        cfg = SimConfig(prob_of_link=0.0, n_value_investors=1, n_trend_investors=0, rng_seed=15)
        sim = Simulation(cfg)
        sim.book.inventory[2] = 30.0
        assert sim._dealer_act(2) is None


class TestInterventions:
    def test_crash_scales_targets_once_and_twice(self):
        sim = Simulation(SimConfig(rng_seed=16))
        sim.vi_targets[:] = np.linspace(90, 120, 10)
        first = sim.vi_targets * 0.8
        sim.apply_crash()
        np.testing.assert_allclose(sim.vi_targets, first)
        sim.apply_crash()
        np.testing.assert_allclose(sim.vi_targets, first * 0.8)

    def test_force_short_magnitude_and_pool_eligibility(self):
        sim = Simulation(SimConfig(rng_seed=17))
        pre_last = sim.book.last_price.copy()
        sim.force_dealers_short()
        assert np.all(sim.book.inventory == -23.0)
        assert set(range(10)) <= set(sim._actor_pool())
        np.testing.assert_allclose(sim.book.mids(), pre_last + 0.023, atol=1e-12)

    def test_remove_value_investors(self):
        sim = Simulation(SimConfig(rng_seed=18))
        sim.run(200)
        n_trades = len(sim.trades)
        sim.remove_value_investors()
        pool = sim._actor_pool()
        assert set(pool) == set(sim.ti_ids)
        assert all(sim.net.roles[n] is not Role.VALUE_INVESTOR for n in sim.net.roles)
        sim.run(2000)
        vi_set = set(sim.vi_ids)
        assert all(
            t.buyer not in vi_set and t.seller not in vi_set
            for t in sim.trades[n_trades:]
        )
        # remaining investors still have dealer access
        for t in sim.ti_ids:
            assert sim.net.dealer_neighbors(t)


class TestSnapshot:
    def test_fields_and_quote_identity(self):
        sim = Simulation(SimConfig(rng_seed=19))
        sim.run(300)
        snap = sim.snapshot()
        for key in ("tick", "mids", "bids", "offers", "inventories", "mean_mid",
                    "arbitrage", "targets", "epsilons", "edges", "roles", "config",
                    "fingerprint"):
            assert key in snap
        mids = np.asarray(snap["mids"])
        inv = np.asarray(snap["inventories"])
        last = sim.book.last_price
        np.testing.assert_allclose(mids, last - 0.001 * inv, atol=1e-12)
        assert snap["tick"] == 300
