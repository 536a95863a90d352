"""One market simulation: a population of agents around one batch auction.

The per-timestep cycle is: every agent sees the same pre-batch observation
and stages orders; the batch clears; fills settle into agent ledgers; agents
mark to the new price; the book drops stale orders; every steps_per_day
steps the whole book is cleared (end of day).

The observation stream (pre-batch price and resting interest) is recorded
alongside the post-batch price path: the former is what both neural agents
in the market and the standalone marginalized algorithms consume, the
latter is what the diffusion analysis runs on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .agents import (
    AgentParams,
    FundamentalValue,
    MarketMaker,
    MeanReverting,
    Momentum,
    NeuralAgent,
    ZeroIntelligence,
    ZeroIntelligencePlus,
)
from .engine import MatchingEngine
from .orders import ASK, BID, NaP


@dataclass(frozen=True)
class MarketSpec:
    """Agent-type counts for one market draw."""

    zi: int = 0
    zip: int = 0
    mo: int = 0
    fv: int = 0
    mr: int = 0
    mm: int = 0
    nn: int = 0

    def total(self) -> int:
        return self.zi + self.zip + self.mo + self.fv + self.mr + self.mm + self.nn

    def static_total(self) -> int:
        return self.total() - self.nn


@dataclass
class MarketResult:
    prices: np.ndarray  # post-batch clearing price path, nan where no trade yet
    obs_price: np.ndarray  # pre-batch observation stream
    obs_interest_bid: np.ndarray
    obs_interest_ask: np.ndarray
    nn_profits: np.ndarray  # final profit per neural genome, genome order
    agent_profits: list  # (species, agent_id, final_profit)
    turnover: float  # sum of shares*price over all trades
    n_trades: int
    wealth: np.ndarray | None = None  # (T, n_agents) profit paths when recorded
    trades: list | None = None


def build_agents(spec: MarketSpec, genomes, params: AgentParams, rng, initial_price=100.0,
                 tick=0.01, scales=None) -> list:
    """Instantiate the population in a fixed, reproducible order."""
    if len(genomes) != spec.nn:
        raise ValueError(f"spec wants {spec.nn} genomes, got {len(genomes)}")
    agents = []
    for i in range(spec.zi):
        agents.append(ZeroIntelligence(f"zi-{i}", params, rng, tick))
    for i in range(spec.zip):
        agents.append(ZeroIntelligencePlus(f"zip-{i}", params, tick))
    for i in range(spec.mo):
        agents.append(Momentum(f"mo-{i}", params, tick))
    for i in range(spec.fv):
        agents.append(FundamentalValue(f"fv-{i}", params, rng, initial_price, tick))
    for i in range(spec.mr):
        agents.append(MeanReverting(f"mr-{i}", params, rng, tick))
    for i in range(spec.mm):
        agents.append(MarketMaker(f"mm-{i}", params, tick))
    for i, genome in enumerate(genomes):
        agents.append(NeuralAgent(f"nn-{i}", params, genome, scales, tick))
    return agents


def run_market(spec: MarketSpec, genomes, config, rng,
               record_wealth=False, record_trades=False) -> MarketResult:
    """Run one market for config.timesteps batches."""
    T = config.timesteps
    engine = MatchingEngine(config.tick_size, config.initial_price, config.max_order_age)
    agents = build_agents(
        spec, genomes, config.agents, rng, config.initial_price, config.tick_size
    )
    owners = {a.agent_id: a for a in agents}

    prices = np.full(T, math.nan)
    obs_price = np.full(T, math.nan)
    obs_vb = np.zeros(T)
    obs_va = np.zeros(T)
    wealth = np.zeros((T, len(agents))) if record_wealth else None
    all_trades = [] if record_trades else None
    turnover = 0.0
    n_trades = 0

    for t in range(T):
        obs = engine.observe(t)
        if obs.price is not NaP:
            obs_price[t] = obs.price
        obs_vb[t] = obs.interest_bid
        obs_va[t] = obs.interest_ask

        for agent in agents:
            for order in agent.act(obs, rng):
                engine.submit(order, t)

        price, trades = engine.run_batch(t)
        for tr in trades:
            owners[tr.buy_owner].fill(BID, tr.shares, tr.price)
            owners[tr.sell_owner].fill(ASK, tr.shares, tr.price)
            turnover += tr.shares * tr.price
        n_trades += len(trades)
        if all_trades is not None:
            all_trades.extend(trades)

        mark = engine.last_price
        for agent in agents:
            agent.mark(mark)
        if mark is not NaP:
            prices[t] = mark
        if wealth is not None:
            for i, agent in enumerate(agents):
                wealth[t, i] = agent.profit

        engine.purge_stale(t)
        if config.steps_per_day > 0 and (t + 1) % config.steps_per_day == 0:
            engine.clear_book()

    return MarketResult(
        prices=prices,
        obs_price=obs_price,
        obs_interest_bid=obs_vb,
        obs_interest_ask=obs_va,
        nn_profits=np.array([a.profit for a in agents if a.species == "NN"]),
        agent_profits=[(a.species, a.agent_id, a.profit) for a in agents],
        turnover=turnover,
        n_trades=n_trades,
        wealth=wealth,
        trades=all_trades,
    )
