import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otcsim.market import (
    DEALER_BUYS,
    DEALER_SELLS,
    DealerBook,
    Trade,
    best_quote,
    best_value_candidate,
    observe_trade,
    quote_price,
    solve_value_trade,
)


def book(n=1, bid_offer=1.0, a=0.001, price=100.0):
    return DealerBook(n, bid_offer, a, price)


def rng(seed=0):
    return np.random.default_rng(seed)


class TestQuotePrice:
    def test_sell_three_units_flat_book(self):
        b = book()
        # last + b/2 - a*(0 - 3) = 100 + 0.5 + 0.003
        assert quote_price(b, 0, DEALER_SELLS, -3) == pytest.approx(100.503, abs=1e-12)

    def test_degenerate_parameters_collapse_to_last_price(self):
        b = book(bid_offer=0.0, a=0.0)
        b.inventory[0] = 17.0
        for flag in (DEALER_SELLS, DEALER_BUYS):
            for s in (-3, 0, 2.5):
                assert quote_price(b, 0, flag, s) == 100.0

    def test_long_inventory_cheapens_the_offer(self):
        b = book()
        b.inventory[0] = 20.0
        p = quote_price(b, 0, DEALER_SELLS, -3)
        assert p == pytest.approx(100.483, abs=1e-12)
        assert p < 100.503  # long dealer undercuts its flat self

    @given(
        inv=st.floats(-50, 50),
        s=st.floats(-3, 3),
        shift=st.floats(0.1, 5),
    )
    @settings(max_examples=50, deadline=None)
    def test_strictly_decreasing_in_post_trade_inventory(self, inv, s, shift):
        b = book()
        b.inventory[0] = inv
        lo = quote_price(b, 0, DEALER_SELLS, s)
        hi = quote_price(b, 0, DEALER_SELLS, s + shift)
        assert hi < lo

    def test_bid_below_offer(self):
        b = book()
        b.inventory[0] = 7.0
        assert quote_price(b, 0, DEALER_BUYS, 2) < quote_price(b, 0, DEALER_SELLS, -2)


class TestMids:
    def test_flat_inventory(self):
        assert book().mids()[0] == 100.0

    def test_short_dealer_quotes_higher(self):
        b = book()
        b.inventory[0] = -20.0
        assert b.mid(0) == pytest.approx(100.02, abs=1e-12)

    def test_idempotent_recompute(self):
        b = book()
        b.inventory[0] = 5.0
        assert b.mid(0) == b.mid(0)

    def test_bids_offers_symmetric(self):
        b = book(n=3)
        b.inventory[:] = [1.0, -2.0, 0.0]
        np.testing.assert_allclose(b.offers() - b.bids(), 1.0)
        np.testing.assert_allclose((b.offers() + b.bids()) / 2, b.mids())


class TestObserveTrade:
    def test_only_counterparty_and_its_neighbors_update(self):
        b = book(n=3)
        observe_trade(b, np.array([0, 1]), 101.0)  # dealer 0 trades; 1 neighbours it
        assert b.last_price.tolist() == [101.0, 101.0, 100.0]

    def test_fully_connected_all_adopt(self):
        b = book(n=4)
        observe_trade(b, np.arange(4), 99.25)
        assert set(b.last_price.tolist()) == {99.25}

    def test_isolated_dealer_only_self(self):
        b = book(n=2)
        observe_trade(b, np.array([1]), 102.0)
        assert b.last_price.tolist() == [100.0, 102.0]


class TestBestQuote:
    def test_buyer_takes_minimum(self):
        b = book(n=2)
        b.last_price[:] = [100.0, 99.9]  # dealer 1 quotes 100.4 sell
        dealer, price = best_quote(b, np.array([0, 1]), DEALER_SELLS, -1, rng())
        assert dealer == 1
        assert price == pytest.approx(100.4 + 0.001)

    def test_single_candidate(self):
        b = book(n=3)
        dealer, _ = best_quote(b, np.array([2]), DEALER_BUYS, 1, rng())
        assert dealer == 2

    def test_exact_ties_uniform(self):
        b = book(n=4)
        g = rng(5)
        counts = np.zeros(4)
        for _ in range(4000):
            dealer, _ = best_quote(b, np.arange(4), DEALER_SELLS, -1, g)
            counts[dealer] += 1
        # chi-squared against uniform over 4 symmetric dealers
        expected = 1000.0
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        assert chi2 < 16.27  # p > 0.001 at 3 dof

    def test_no_rng_consumed_without_tie(self):
        b = book(n=2)
        b.last_price[:] = [100.0, 99.0]
        g1, g2 = rng(3), rng(3)
        best_quote(b, np.arange(2), DEALER_SELLS, -1, g1)
        assert g1.integers(1000) == g2.integers(1000)


def eq4_price(last, flag, bid_offer, a, inv, size):
    return last + flag * bid_offer / 2 - a * (inv + size)


class TestSolveValueTrade:
    def test_documented_example(self):
        b = book()
        price, size = solve_value_trade(b, 0, DEALER_SELLS, target=110.0, sigma=5.0, cap=1e9)
        assert price == pytest.approx(100.5019, abs=5e-5)
        assert size == pytest.approx(-1.8996, abs=5e-5)

    def test_joint_solution_satisfies_both_equations(self):
        # Oracle: plug the solved pair back into the dealer pricing rule and
        # the investor sizing rule; both residuals must vanish.
        g = rng(1)
        n = 100_000
        last = 100 + g.normal(0, 5, n)
        inv = g.normal(0, 30, n)
        targets = 100 + g.normal(0, 15, n)
        sigmas = g.uniform(1, 10, n)
        a = 0.001
        flags = np.where(g.random(n) < 0.5, 1, -1)
        prices = (last + flags * 0.5 - a * (inv - targets / sigmas)) / (1 + a / sigmas)
        sizes = (prices - targets) / sigmas
        eq4 = last + flags * 0.5 - a * (inv + sizes)
        assert np.abs(prices - eq4).max() < 1e-9
        assert np.abs(sizes - (prices - targets) / sigmas).max() < 1e-9
        # spot-check the implementation against the same algebra
        b = book()
        for k in range(200):
            b.last_price[0] = last[k]
            b.inventory[0] = inv[k]
            p, s = solve_value_trade(b, 0, int(flags[k]), targets[k], sigmas[k], cap=1e9)
            assert p == pytest.approx(prices[k], abs=1e-9)
            assert s == pytest.approx(sizes[k], abs=1e-9)

    def test_target_at_unskewed_offer_gives_zero_size(self):
        b = book(a=0.0)
        price, size = solve_value_trade(b, 0, DEALER_SELLS, target=100.5, sigma=5.0, cap=3.0)
        assert size == 0.0
        assert price == pytest.approx(100.5)

    def test_clamp_reprices_with_dealer_rule(self):
        b = book()
        price, size = solve_value_trade(b, 0, DEALER_SELLS, target=130.0, sigma=5.0, cap=3.0)
        assert size == -3.0
        assert price == pytest.approx(100.503, abs=1e-12)
        assert price == pytest.approx(eq4_price(100, 1, 1.0, 0.001, 0, -3), abs=1e-12)


class TestBestValueCandidate:
    def test_no_profitable_side(self):
        b = book(n=2)
        got = best_value_candidate(b, np.arange(2), target=100.0, sigma=5.0, cap=3.0, rng=rng())
        assert got is None

    def test_buy_when_offer_below_target(self):
        b = book(n=2)
        got = best_value_candidate(b, np.arange(2), target=104.0, sigma=5.0, cap=3.0, rng=rng())
        assert got is not None
        dealer, flag, price, size = got
        assert flag == DEALER_SELLS and size < 0
        assert price < 104.0

    def test_larger_edge_wins(self):
        # dealer 0 short and quoting high: selling to it beats buying from 1
        b = book(n=2)
        b.last_price[:] = [110.0, 100.5]
        got = best_value_candidate(b, np.arange(2), target=100.0, sigma=5.0, cap=3.0, rng=rng())
        dealer, flag, price, size = got
        assert dealer == 0 and flag == DEALER_BUYS and size > 0
        assert abs(price - 100.0) > 5.0

    def test_feasibility_survives_clamping(self):
        b = book(n=1)
        got = best_value_candidate(b, np.arange(1), target=150.0, sigma=5.0, cap=3.0, rng=rng())
        dealer, flag, price, size = got
        assert size == -3.0
        assert price < 150.0


class TestTrade:
    def test_sign_convention_enforced(self):
        with pytest.raises(ValueError):
            Trade(0, 1, 0, 0, 100.0, 3.0, DEALER_SELLS)  # dealer sells => size < 0
        with pytest.raises(ValueError):
            Trade(0, 1, 0, 0, 100.0, 0.0, DEALER_SELLS)
        t = Trade(0, 1, 0, 0, 100.5, -3.0, DEALER_SELLS)
        assert t.size == -3.0
