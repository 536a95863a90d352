"""Order primitives shared by the auction engine, agents, and logs.

Prices live on a fixed tick grid (0.01 by default). A market order carries no
price at all: its price field is the NaP sentinel ("not a price"), which
compares equal only to itself and survives round-trips through repr. Numeric
code that needs an array representation maps NaP to nan at the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field


class _NaPType:
    """Singleton sentinel for 'not a price' (market orders, empty tape)."""

    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NaP"

    def __bool__(self):
        return False

    def __deepcopy__(self, memo):
        return self

    def __copy__(self):
        return self


NaP = _NaPType()

BID = "bid"
ASK = "ask"

TICK_SIZE = 0.01


def is_nap(price) -> bool:
    return price is NaP


def round_to_tick(price: float, tick: float = TICK_SIZE) -> float:
    """Snap a raw price onto the tick grid (nearest, half to even).

    The result is canonical: every float that rounds to the same grid index
    returns the exact same float, so price levels computed along different
    arithmetic paths (n*tick vs round(x, 2)) compare equal downstream.
    """
    r = price / tick
    n = int(r)
    diff = r - n
    if diff > 0.5 or (diff == 0.5 and n % 2 != 0):
        n += 1
    elif diff < -0.5 or (diff == -0.5 and n % 2 != 0):
        n -= 1
    return round(n * tick, 9)


def limit_price(price: float, tick: float = TICK_SIZE) -> float:
    """Tick-round a computed price and clamp it to at least one tick.

    Agents use this so a noisy formula can never emit a zero or negative
    limit price; the engine itself rejects such orders outright.
    """
    p = round_to_tick(price, tick)
    return p if p >= tick else tick


class OrderRejected(ValueError):
    """Raised by the engine when an order fails validation."""


@dataclass
class Order:
    """A single bid or ask.

    price is either NaP (market order) or a positive multiple of the tick
    size. time_in_force of 0 means the engine's default resting lifetime.
    Engine-managed fields (submit_time, remaining, seq) are filled in on
    submission; agents only set the first five.
    """

    owner_id: str
    order_id: str
    side: str
    shares: int
    price: object  # float on the tick grid, or NaP
    time_in_force: int = 0
    submit_time: int = -1
    remaining: int = field(default=0, repr=False)
    seq: int = field(default=-1, repr=False)

    def is_market(self) -> bool:
        return self.price is NaP

    def price_key(self) -> float:
        """Price for priority ordering: market orders beat every limit."""
        if self.price is NaP:
            return float("inf") if self.side == BID else float("-inf")
        return self.price


@dataclass(frozen=True)
class Trade:
    """One execution at the batch clearing price."""

    buy_order_id: str
    sell_order_id: str
    buy_owner: str
    sell_owner: str
    shares: int
    price: float
    timestep: int


@dataclass(frozen=True)
class MarketObservation:
    """Public pre-batch snapshot handed to every agent.

    price is the last clearing price (NaP before any trade). Depths map
    price level -> resting shares; interest_bid/interest_ask are the
    totals over all resting levels. Staged orders for the current batch
    are not visible.
    """

    timestep: int
    price: object
    depth_bid: dict
    depth_ask: dict
    interest_bid: int
    interest_ask: int
