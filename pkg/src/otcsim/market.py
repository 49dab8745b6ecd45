"""Dealer quoting, trade pricing, and investor/dealer trade construction.

Sign conventions, used everywhere:

* `flag` is the dealer's side: +1 when the dealer sells, -1 when it buys.
* `size` is signed from the dealer's perspective: positive when the dealer
  buys (its inventory grows), negative when it sells. A dealer selling 3
  units therefore trades flag=+1, size=-3.

A dealer quoting a trade of size S prices it off the last trade price it
saw, half the fixed bid-offer in its favour, and a linear penalty `a` on
the inventory it would hold after the trade:

    price = last_price + flag * bid_offer / 2 - a * (inventory + S)

Mid prices follow the same rule at S = 0 with no bid-offer term. Long
dealers quote lower to attract buyers, short dealers quote higher.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEALER_SELLS = 1
DEALER_BUYS = -1


@dataclass(frozen=True)
class Trade:
    """One executed trade, recorded from the quoting dealer's perspective."""

    tick: int
    buyer: int
    seller: int
    dealer: int
    price: float
    size: float  # signed; > 0 means the dealer bought
    flag: int  # +1 dealer sold, -1 dealer bought

    def __post_init__(self):
        if self.size == 0:
            raise ValueError("trade size must be nonzero")
        if self.flag not in (DEALER_SELLS, DEALER_BUYS):
            raise ValueError("flag must be +1 (dealer sells) or -1 (dealer buys)")
        if (self.size < 0) != (self.flag == DEALER_SELLS):
            raise ValueError("flag inconsistent with size sign convention")


class DealerBook:
    """Vectorized state of all market makers.

    Holds, per dealer, the last trade price it has seen and its current
    inventory; everything else (mid, bid, offer, trade quotes) is derived
    on demand so quotes can never drift out of sync with state.
    """

    def __init__(
        self,
        n_dealers: int,
        bid_offer: float,
        skew_coefficient: float,
        initial_price: float,
    ):
        if n_dealers < 1:
            raise ValueError("n_dealers: at least one dealer is required")
        self.n_dealers = n_dealers
        self.bid_offer = float(bid_offer)
        self.skew_coefficient = float(skew_coefficient)
        self.last_price = np.full(n_dealers, float(initial_price))
        self.inventory = np.zeros(n_dealers)

    def mids(self) -> np.ndarray:
        """Current mid of every dealer: last seen price skewed against inventory."""
        return self.last_price - self.skew_coefficient * self.inventory

    def mid(self, dealer: int) -> float:
        return float(self.last_price[dealer] - self.skew_coefficient * self.inventory[dealer])

    def bids(self) -> np.ndarray:
        return self.mids() - self.bid_offer / 2.0

    def offers(self) -> np.ndarray:
        return self.mids() + self.bid_offer / 2.0

    def copy(self) -> "DealerBook":
        clone = DealerBook(
            self.n_dealers, self.bid_offer, self.skew_coefficient, 0.0
        )
        clone.last_price = self.last_price.copy()
        clone.inventory = self.inventory.copy()
        return clone


def quote_price(book: DealerBook, dealer: int, flag: int, size: float) -> float:
    """Price the dealer proposes for a trade of signed `size` on side `flag`."""
    return float(
        book.last_price[dealer]
        + flag * book.bid_offer / 2.0
        - book.skew_coefficient * (book.inventory[dealer] + size)
    )


def quote_prices(
    book: DealerBook, dealers: np.ndarray, flag: int, size: float
) -> np.ndarray:
    """Vectorized `quote_price` over a set of dealers at a common size."""
    return (
        book.last_price[dealers]
        + flag * book.bid_offer / 2.0
        - book.skew_coefficient * (book.inventory[dealers] + size)
    )


def best_quote(
    book: DealerBook,
    dealers: np.ndarray,
    flag: int,
    size: float,
    rng: np.random.Generator,
) -> tuple[int, float]:
    """Most competitive quote among `dealers` for the given side and size.

    The counterparty buys when the dealer sells (flag=+1), so it wants the
    minimum price; when the dealer buys it wants the maximum. Exact price
    ties are broken uniformly at random; the RNG is consumed only when a
    tie actually occurs.
    """
    prices = quote_prices(book, dealers, flag, size)
    best = prices.min() if flag == DEALER_SELLS else prices.max()
    ties = np.flatnonzero(prices == best)
    pick = ties[0] if len(ties) == 1 else ties[int(rng.integers(len(ties)))]
    return int(dealers[pick]), float(prices[pick])


def solve_value_trade(
    book: DealerBook,
    dealer: int,
    flag: int,
    target: float,
    sigma: float,
    cap: float,
) -> tuple[float, float]:
    """Joint price and size for a value investor trading with one dealer.

    The investor sizes proportionally to mispricing, S = (P - T) / sigma,
    while the dealer prices the resulting size; solving both at once gives

        P = (last + flag*b/2 - a*(I - T/sigma)) / (1 + a/sigma)

    If |S| exceeds `cap`, the size is clamped and the price recomputed from
    the dealer's quoting rule at the clamped size, which keeps the dealer
    side exact and leaves the clamped price no worse for the investor.
    """
    a = book.skew_coefficient
    price = (
        book.last_price[dealer]
        + flag * book.bid_offer / 2.0
        - a * (book.inventory[dealer] - target / sigma)
    ) / (1.0 + a / sigma)
    size = (price - target) / sigma
    if abs(size) > cap:
        size = cap if size > 0 else -cap
        price = quote_price(book, dealer, flag, size)
    return float(price), float(size)


def best_value_candidate(
    book: DealerBook,
    dealers: np.ndarray,
    target: float,
    sigma: float,
    cap: float,
    rng: np.random.Generator,
) -> tuple[int, int, float, float] | None:
    """Best feasible trade for a value investor across its dealers and both sides.

    A candidate is feasible when the investor profits versus its target:
    buying (dealer sells) below target, or selling (dealer buys) above it.
    Among feasible candidates the one maximizing |price - target| wins;
    exact ties are broken uniformly (RNG touched only on an actual tie).
    Returns (dealer, flag, price, size) or None when no profitable trade
    exists. Row 0 is the dealer-sells side, row 1 dealer-buys.
    """
    # Scalar arithmetic on purpose: the per-investor dealer sets are a
    # handful of entries and array-op dispatch costs more than the math.
    a = book.skew_coefficient
    half = book.bid_offer / 2.0
    denom = 1.0 + a / sigma
    toff = target / sigma
    lasts = book.last_price[dealers].tolist()
    invs = book.inventory[dealers].tolist()
    best_edge = 0.0
    ties: list[tuple[int, int, float, float]] = []
    for flag in (DEALER_SELLS, DEALER_BUYS):
        signed_half = half if flag == DEALER_SELLS else -half
        for i in range(len(lasts)):
            last, inv = lasts[i], invs[i]
            price = (last + signed_half - a * (inv - toff)) / denom
            size = (price - target) / sigma
            if size > cap:
                size = cap
                price = last + signed_half - a * (inv + size)
            elif size < -cap:
                size = -cap
                price = last + signed_half - a * (inv + size)
            if size == 0.0:
                continue
            if flag == DEALER_SELLS:
                if price >= target:
                    continue
                edge = target - price
            else:
                if price <= target:
                    continue
                edge = price - target
            if edge > best_edge:
                best_edge = edge
                ties = [(i, flag, price, size)]
            elif edge == best_edge and ties:
                ties.append((i, flag, price, size))
    if not ties:
        return None
    i, flag, price, size = ties[0] if len(ties) == 1 else ties[int(rng.integers(len(ties)))]
    return int(dealers[i]), flag, price, size


def observe_trade(
    book: DealerBook, visibility: np.ndarray, price: float
) -> None:
    """Propagate a trade print to the dealers that can see it.

    `visibility` must already contain the quoting dealer itself plus its
    dealer network neighbours; all of them adopt the trade price as their
    last seen price, every other dealer is untouched.
    """
    book.last_price[visibility] = price
