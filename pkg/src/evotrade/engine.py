"""Frequent batch auction matching engine.

Orders submitted during a timestep are staged; run_batch(t) then discovers a
single clearing price (maximum executable volume, ties by minimum absolute
imbalance, then last-price-or-midpoint), matches eligible orders in
price-time priority, and rests unfilled limit remainders. Market orders
never rest: whatever is left of them after the batch is discarded.

The engine is deliberately time-agnostic: the caller owns the clock and
passes t to observe/submit-batch/purge so the surrounding loop stays
explicit and testable.
"""
from __future__ import annotations

import csv
import math

import numpy as np

from . import kernels
from .orders import (
    ASK,
    BID,
    MarketObservation,
    NaP,
    Order,
    OrderRejected,
    Trade,
    round_to_tick,
)


class MatchingEngine:
    def __init__(self, tick_size: float = 0.01, initial_price=100.0, max_order_age: int = 100):
        self.tick_size = tick_size
        self.last_price = initial_price if initial_price is not None else NaP
        self.max_order_age = max_order_age
        self.bids: list[Order] = []
        self.asks: list[Order] = []
        self._staged: list[Order] = []
        self._seq = 0

    # ------------------------------------------------------------------ #
    # order intake

    def submit(self, order: Order, t: int) -> Order:
        """Validate and stage an order for the batch at timestep t."""
        if order.side not in (BID, ASK):
            raise OrderRejected(f"unknown side {order.side!r}")
        if not isinstance(order.shares, (int, np.integer)) or order.shares < 1:
            raise OrderRejected(f"shares must be a positive integer, got {order.shares!r}")
        if order.time_in_force < 0:
            raise OrderRejected("time_in_force must be nonnegative")
        if order.price is not NaP:
            p = float(order.price)
            if not math.isfinite(p) or p < 0:
                raise OrderRejected(f"bad limit price {order.price!r}")
            canonical = round_to_tick(p, self.tick_size)
            if abs(canonical - p) > 1e-9:
                raise OrderRejected(f"price {p} is not on the {self.tick_size} tick grid")
            order.price = canonical
        order.shares = int(order.shares)
        order.submit_time = t
        order.remaining = order.shares
        order.seq = self._seq
        self._seq += 1
        self._staged.append(order)
        return order

    # ------------------------------------------------------------------ #
    # batch execution

    def run_batch(self, t: int):
        """Clear the batch at timestep t. Returns (clearing_price, trades).

        clearing_price is NaP when no trade occurs; trades is a list of
        Trade records, every one at the single clearing price.
        """
        staged = self._staged
        self._staged = []
        bids = sorted(
            self.bids + [o for o in staged if o.side == BID],
            key=lambda o: (-o.price_key(), o.submit_time, o.seq),
        )
        asks = sorted(
            self.asks + [o for o in staged if o.side == ASK],
            key=lambda o: (o.price_key(), o.submit_time, o.seq),
        )

        last = self.last_price if self.last_price is not NaP else math.nan
        price_raw, volume = kernels.find_clearing(
            np.array([o.price_key() for o in bids], dtype=np.float64),
            np.array([o.remaining for o in bids], dtype=np.int64),
            np.array([o.price_key() for o in asks], dtype=np.float64),
            np.array([o.remaining for o in asks], dtype=np.int64),
            last,
            self.tick_size,
        )

        if volume == 0 or math.isnan(price_raw):
            self.bids = [o for o in bids if not o.is_market()]
            self.asks = [o for o in asks if not o.is_market()]
            return NaP, []

        price = round_to_tick(price_raw, self.tick_size)
        bid_fills = self._allocate(bids, price, volume, BID)
        ask_fills = self._allocate(asks, price, volume, ASK)
        trades = self._pair_fills(bid_fills, ask_fills, price, t)

        self.bids = [o for o in bids if o.remaining > 0 and not o.is_market()]
        self.asks = [o for o in asks if o.remaining > 0 and not o.is_market()]
        self.last_price = price
        return price, trades

    @staticmethod
    def _allocate(orders, price, volume, side):
        """Fill shares in priority order among orders eligible at price."""
        fills = []
        left = volume
        for o in orders:
            if left == 0:
                break
            key = o.price_key()
            if side == BID and key < price:
                break  # sorted descending, nothing further is eligible
            if side == ASK and key > price:
                break
            take = min(o.remaining, left)
            if take > 0:
                o.remaining -= take
                fills.append((o, take))
                left -= take
        if left != 0:  # pragma: no cover - guarded by the clearing kernel
            raise RuntimeError("batch volume exceeded eligible shares")
        return fills

    @staticmethod
    def _pair_fills(bid_fills, ask_fills, price, t):
        trades = []
        bi = ai = 0
        b_left = bid_fills[0][1] if bid_fills else 0
        a_left = ask_fills[0][1] if ask_fills else 0
        while bi < len(bid_fills) and ai < len(ask_fills):
            n = min(b_left, a_left)
            b, _ = bid_fills[bi]
            a, _ = ask_fills[ai]
            trades.append(
                Trade(
                    buy_order_id=b.order_id,
                    sell_order_id=a.order_id,
                    buy_owner=b.owner_id,
                    sell_owner=a.owner_id,
                    shares=n,
                    price=price,
                    timestep=t,
                )
            )
            b_left -= n
            a_left -= n
            if b_left == 0:
                bi += 1
                if bi < len(bid_fills):
                    b_left = bid_fills[bi][1]
            if a_left == 0:
                ai += 1
                if ai < len(ask_fills):
                    a_left = ask_fills[ai][1]
        return trades

    # ------------------------------------------------------------------ #
    # book maintenance and observation

    def purge_stale(self, t: int) -> int:
        """Drop resting orders whose lifetime has elapsed; returns count."""
        purged = 0
        for name in ("bids", "asks"):
            kept = []
            for o in getattr(self, name):
                lifetime = o.time_in_force if o.time_in_force > 0 else self.max_order_age
                if t - o.submit_time >= lifetime:
                    purged += 1
                else:
                    kept.append(o)
            setattr(self, name, kept)
        return purged

    def clear_book(self) -> int:
        """End-of-day clear: drop every resting order; last_price survives."""
        n = len(self.bids) + len(self.asks)
        self.bids = []
        self.asks = []
        return n

    def observe(self, t: int) -> MarketObservation:
        """Public snapshot: last price plus resting depth (staged excluded)."""
        depth_bid: dict = {}
        depth_ask: dict = {}
        for o in self.bids:
            depth_bid[o.price] = depth_bid.get(o.price, 0) + o.remaining
        for o in self.asks:
            depth_ask[o.price] = depth_ask.get(o.price, 0) + o.remaining
        return MarketObservation(
            timestep=t,
            price=self.last_price,
            depth_bid=depth_bid,
            depth_ask=depth_ask,
            interest_bid=sum(depth_bid.values()),
            interest_ask=sum(depth_ask.values()),
        )


def write_trade_log(trades, path) -> None:
    """Dump trades as CSV: timestep,price,shares,buy_owner,sell_owner."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestep", "price", "shares", "buy_owner", "sell_owner"])
        for tr in trades:
            w.writerow([tr.timestep, repr(float(tr.price)), tr.shares,
                        tr.buy_owner, tr.sell_owner])
