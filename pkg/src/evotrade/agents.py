"""Trading agent species.

Each agent maps the public pre-batch observation plus its own private state
to zero, one, or two orders per timestep. The six static species follow the
reference listings line for line (including their quirks, e.g. the market
maker's shift floor of 0.01 in the long-inventory branch); the neural agent
wraps an evolvable genome and trades on consecutive state deltas.

All species share the same wealth accounting: profit is mark-to-market
wealth minus the initial endowment, so the cash endowment itself is
unobservable in results and short positions are allowed everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import neural
from .orders import ASK, BID, NaP, Order, limit_price


@dataclass
class AgentParams:
    """Species parameter defaults shared across a market."""

    endowment_cash: float = 10_000.0
    mean_order_size: int = 100  # E[N] for ZI/ZIP Poisson share draws
    vol_scale: float = 10.0  # Exponential scale for vol_pref draws
    mo_dx: float = 0.05
    fv_dx: float = 0.05
    fv_tolerance: float = 1.0
    fv_value_spread: float = 5.0  # mean_price ~ initial + U(-spread, spread)
    mr_window: int = 50
    mr_tolerance: float = 1.0
    mm_window: int = 50
    mm_target_inventory: int = 0
    mm_tolerance: float = 50.0
    mm_spread: float = 0.05
    mm_shares: int = 100


def draw_shares(rng, mean) -> int:
    return max(1, int(rng.poisson(mean)))


class Agent:
    """Common wealth accounting and order-id bookkeeping."""

    species = "?"

    def __init__(self, agent_id: str, params: AgentParams, tick: float = 0.01):
        self.agent_id = agent_id
        self.params = params
        self.tick = tick
        self.cash = params.endowment_cash
        self.shares_held = 0
        self.initial_wealth = params.endowment_cash
        self.profit = 0.0
        self._order_n = 0

    def _next_order_id(self) -> str:
        self._order_n += 1
        return f"{self.agent_id}-{self._order_n}"

    def _order(self, side, shares, price, time_in_force=0) -> Order:
        return Order(
            owner_id=self.agent_id,
            order_id=self._next_order_id(),
            side=side,
            shares=shares,
            price=price,
            time_in_force=time_in_force,
        )

    def fill(self, side, shares, price) -> None:
        if side == BID:
            self.cash -= shares * price
            self.shares_held += shares
        else:
            self.cash += shares * price
            self.shares_held -= shares

    def mark(self, price) -> None:
        if price is NaP:
            self.profit = self.cash - self.initial_wealth
        else:
            self.profit = self.cash + self.shares_held * price - self.initial_wealth

    def act(self, obs, rng) -> list:
        raise NotImplementedError


class ZeroIntelligence(Agent):
    """Uniform price noise around the last clearing price."""

    species = "ZI"

    def __init__(self, agent_id, params, rng, tick=0.01):
        super().__init__(agent_id, params, tick)
        self.vol_pref = rng.exponential(params.vol_scale)

    def act(self, obs, rng):
        p = obs.price
        if p is NaP:
            return []
        side = BID if rng.random() < 0.5 else ASK
        price = p + self.vol_pref * rng.uniform(-1.0, 1.0)
        shares = draw_shares(rng, self.params.mean_order_size)
        return [self._order(side, shares, limit_price(price, self.tick))]


class ZeroIntelligencePlus(Agent):
    """ZI sizing and side choice, but pure market orders (no price)."""

    species = "ZIP"

    def act(self, obs, rng):
        if obs.price is NaP:
            return []
        side = BID if rng.random() < 0.5 else ASK
        shares = draw_shares(rng, self.params.mean_order_size)
        return [self._order(side, shares, NaP)]


class Momentum(Agent):
    species = "MO"

    def __init__(self, agent_id, params, tick=0.01):
        super().__init__(agent_id, params, tick)
        self.last = None
        self.dx = params.mo_dx

    def act(self, obs, rng):
        p = obs.price
        if p is NaP:
            return []
        if self.last is None:
            self.last = p
            return []
        dp = self.last - p
        if dp > 0:
            side, price = ASK, p + self.dx
        elif dp < 0:
            side, price = BID, p - self.dx
        else:
            side = ASK if rng.random() < 0.5 else BID
            price = p
        self.last = p
        shares = draw_shares(rng, self.params.mean_order_size)
        return [self._order(side, shares, limit_price(price, self.tick))]


class FundamentalValue(Agent):
    """Trades against deviations from a private value estimate."""

    species = "FV"

    def __init__(self, agent_id, params, rng, initial_price=100.0, tick=0.01):
        super().__init__(agent_id, params, tick)
        self.mean_price = initial_price + rng.uniform(-params.fv_value_spread, params.fv_value_spread)
        self.price_tolerance = params.fv_tolerance
        self.vol_pref = rng.exponential(params.vol_scale)
        self.dx = params.fv_dx

    def act(self, obs, rng):
        p = obs.price
        if p is NaP:
            return []
        if p > self.mean_price + self.price_tolerance:
            side = ASK
            price = p + self.dx + self.vol_pref * rng.random() - self.vol_pref / 2
        elif p < self.mean_price - self.price_tolerance:
            side = BID
            price = p - self.dx + self.vol_pref * rng.random() - self.vol_pref / 2
        else:
            return []
        shares = draw_shares(rng, self.params.mean_order_size)
        return [self._order(side, shares, limit_price(price, self.tick))]


class MeanReverting(Agent):
    """Bets on reversion to the mean of a rolling price window."""

    species = "MR"

    def __init__(self, agent_id, params, rng, tick=0.01):
        super().__init__(agent_id, params, tick)
        self.prices = np.zeros(params.mr_window)
        self.current_ind = 0
        self.price_tolerance = params.mr_tolerance
        self.vol_pref = rng.exponential(params.vol_scale)

    def act(self, obs, rng):
        p = obs.price
        if p is NaP:
            return []
        self.prices[self.current_ind] = p
        self.current_ind = (self.current_ind + 1) % len(self.prices)
        filled = self.prices[self.prices > 0]
        if filled.size == 0:
            return []
        mean_price = filled.mean()
        if p > mean_price + self.price_tolerance:
            side, price = ASK, p - self.vol_pref * rng.random()
        elif p < mean_price - self.price_tolerance:
            side, price = BID, p + self.vol_pref * rng.random()
        else:
            return []
        shares = draw_shares(rng, self.params.mean_order_size)
        return [self._order(side, shares, limit_price(price, self.tick))]


class MarketMaker(Agent):
    """Two-sided quotes around a rolling mean, leaning against inventory."""

    species = "MM"

    def __init__(self, agent_id, params, tick=0.01):
        super().__init__(agent_id, params, tick)
        self.prices = np.zeros(params.mm_window)
        self.current_ind = 0
        self.target_inventory_size = params.mm_target_inventory
        self.inventory_tolerance = params.mm_tolerance
        self.spread = params.mm_spread
        self.shift = 0.0
        self.shares = params.mm_shares

    def act(self, obs, rng):
        if obs.price is NaP:
            return []
        self.prices[self.current_ind] = obs.price
        self.current_ind = (self.current_ind + 1) % len(self.prices)
        filled = self.prices[self.prices > 0]
        if filled.size == 0:
            return []
        p = float(filled.mean())

        divergence = self.shares_held - self.target_inventory_size
        if divergence > self.inventory_tolerance:
            self.shift = max(0.01, self.shift - 0.01)
            self.spread += 0.01
        elif divergence < -self.inventory_tolerance:
            self.shift += 0.01
            self.spread += 0.01
        else:
            self.shift = 0.0
            self.spread = max(0.01, self.spread - 0.01)

        bid = self._order(
            BID,
            max(int(self.shares - divergence), 10),
            limit_price(round(p - self.spread + self.shift, 2), self.tick),
            time_in_force=0,
        )
        ask = self._order(
            ASK,
            max(int(self.shares + divergence), 10),
            limit_price(round(p + self.spread + self.shift, 2), self.tick),
            time_in_force=0,
        )
        return [bid, ask]


class NeuralAgent(Agent):
    """Genome-driven agent trading on consecutive observation/state deltas.

    Inputs are the changes since its previous decision: price, resting bid
    and ask interest, own cash, shares, and profit, each divided by its
    scale. The first observation only primes the deltas.
    """

    species = "NN"

    def __init__(self, agent_id, params, genome, scales=None, tick=0.01):
        super().__init__(agent_id, params, tick)
        self.genome = np.ascontiguousarray(genome, dtype=np.float64)
        self.scales = scales or neural.InputScales()
        self._prev = None  # (price, vb, va, cash, shares, profit)

    def act(self, obs, rng):
        p = obs.price
        if p is NaP:
            return []
        now = (p, obs.interest_bid, obs.interest_ask, self.cash, self.shares_held, self.profit)
        prev = self._prev
        self._prev = now
        if prev is None:
            return []
        x = self.scales.apply(
            now[0] - prev[0],
            now[1] - prev[1],
            now[2] - prev[2],
            now[3] - prev[3],
            now[4] - prev[4],
            now[5] - prev[5],
        )
        action = neural.decode(neural.forward(self.genome, x), self.tick)
        if action.shares == 0:
            return []
        return [self._order(action.side, action.shares, limit_price(p + action.d_price, self.tick))]


SPECIES = ("ZI", "ZIP", "MO", "FV", "MR", "MM")
STATIC_CLASSES = {
    "ZI": ZeroIntelligence,
    "ZIP": ZeroIntelligencePlus,
    "MO": Momentum,
    "FV": FundamentalValue,
    "MR": MeanReverting,
    "MM": MarketMaker,
}
