"""Turning in-market neural agents into standalone trading algorithms.

In the market an agent sees the price change together with the change in
resting bid/ask interest. Outside the market only the price change is
observable, so the interest inputs are replaced by their conditional
expectations given the price change, estimated by k-nearest-neighbor
averaging (l1 distance on the price change) over a corpus of
(dX, dVb, dVa) triples harvested from simulations run with the identity
mechanism (no selection interference).

Neighbor ties at the cutoff distance are resolved by corpus insertion
order, and the index is required to reproduce a brute-force linear scan
exactly; tests pin that equivalence.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, neural
from .market import MarketSpec, run_market
from .orders import BID

STREAM_CORPUS = 5  # seed-sequence stream id for corpus runs


@dataclass
class Corpus:
    dx: np.ndarray
    dvb: np.ndarray
    dva: np.ndarray
    provenance: list = field(default_factory=list)

    def __post_init__(self):
        self.dx = np.asarray(self.dx, dtype=np.float64)
        self.dvb = np.asarray(self.dvb, dtype=np.float64)
        self.dva = np.asarray(self.dva, dtype=np.float64)
        if not (len(self.dx) == len(self.dvb) == len(self.dva)):
            raise ValueError("corpus columns must have equal length")
        for name, col in (("dx", self.dx), ("dvb", self.dvb), ("dva", self.dva)):
            if not np.isfinite(col).all():
                raise ValueError(f"corpus column {name} contains non-finite values")

    def __len__(self) -> int:
        return len(self.dx)


def harvest_rows(obs_price, obs_vb, obs_va):
    """Consecutive deltas of an observation stream, skipping no-price steps."""
    p = np.asarray(obs_price, dtype=np.float64)
    vb = np.asarray(obs_vb, dtype=np.float64)
    va = np.asarray(obs_va, dtype=np.float64)
    ok = np.isfinite(p[1:]) & np.isfinite(p[:-1])
    return (np.diff(p)[ok], np.diff(vb)[ok], np.diff(va)[ok])


def generate_corpus(config, n_runs: int, seed: int, genomes=None, jobs: int = 1) -> Corpus:
    """Harvest (dX, dVb, dVa) triples from n_runs identity-mechanism markets.

    config is an EvoConfig (market shape knobs are reused). When genomes
    are given, run r embeds genome r mod len(genomes) as a single neural
    agent; otherwise markets are statics-only.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be positive")
    cols_dx, cols_dvb, cols_dva, prov = [], [], [], []
    for r in range(n_runs):
        rng = np.random.default_rng(np.random.SeedSequence([seed, STREAM_CORPUS, r]))
        n_nn = 1 if genomes else 0
        counts = rng.multinomial(config.n_agents - n_nn, config.static_probs)
        spec = MarketSpec(
            zi=int(counts[0]),
            zip=int(counts[1]),
            mo=int(counts[2]),
            fv=int(counts[3]),
            mr=int(counts[4]),
            mm=int(counts[5]),
            nn=n_nn,
        )
        run_genomes = [genomes[r % len(genomes)]] if genomes else []
        res = run_market(spec, run_genomes, config, rng)
        dx, dvb, dva = harvest_rows(res.obs_price, res.obs_interest_bid, res.obs_interest_ask)
        cols_dx.append(dx)
        cols_dvb.append(dvb)
        cols_dva.append(dva)
        prov.append({"run": r, "rows": int(len(dx)), "nn": n_nn})
    return Corpus(
        dx=np.concatenate(cols_dx),
        dvb=np.concatenate(cols_dvb),
        dva=np.concatenate(cols_dva),
        provenance=prov,
    )


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dx", "dvb", "dva"])
        for i in range(len(corpus)):
            w.writerow([repr(float(corpus.dx[i])),
                        repr(float(corpus.dvb[i])),
                        repr(float(corpus.dva[i]))])


def load_corpus(path) -> Corpus:
    dx, dvb, dva = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["dx", "dvb", "dva"]:
            raise ValueError(f"{path}: expected header dx,dvb,dva, got {header}")
        for ln, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ValueError(f"{path}:{ln}: expected 3 fields, got {len(row)}")
            try:
                vals = [float(v) for v in row]
            except ValueError as e:
                raise ValueError(f"{path}:{ln}: {e}") from None
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{path}:{ln}: non-finite corpus value")
            dx.append(vals[0])
            dvb.append(vals[1])
            dva.append(vals[2])
    return Corpus(dx=np.array(dx), dvb=np.array(dvb), dva=np.array(dva))


class NeighborIndex:
    """Sorted-array nearest-neighbor index over the corpus dx column."""

    def __init__(self, dx):
        dx = np.asarray(dx, dtype=np.float64)
        if dx.size == 0:
            raise ValueError("cannot index an empty corpus")
        if not np.isfinite(dx).all():
            raise ValueError("dx contains non-finite values")
        order = np.argsort(dx, kind="stable").astype(np.int64)
        self.sorted_dx = np.ascontiguousarray(dx[order])
        self.order = np.ascontiguousarray(order)
        self.n = dx.size

    def query(self, q: float, k: int) -> np.ndarray:
        """Insertion indices of the k nearest rows, (distance, index) order."""
        if not math.isfinite(q):
            raise ValueError("query must be finite")
        if k < 1 or k > self.n:
            raise ValueError(f"k must be in [1, {self.n}], got {k}")
        return np.asarray(kernels.knn_select(self.sorted_dx, self.order, float(q), int(k)))


def conditional_expectation(index: NeighborIndex, corpus: Corpus, dx_star: float, k: int):
    """kNN estimates of E[dVb | dX = dx_star] and E[dVa | dX = dx_star]."""
    sel = index.query(dx_star, k)
    return float(corpus.dvb[sel].mean()), float(corpus.dva[sel].mean())


class TradingState:
    """Cash/position ledger shared by standalone algorithms.

    Starts flat with zero cash, so profit is simply cash + shares * price.
    """

    def __init__(self):
        self.reset()

    def reset(self) -> None:
        self.cash = 0.0
        self.shares_held = 0
        self.profit = 0.0
        self._prev = None

    def _deltas(self):
        cur = (self.cash, self.shares_held, self.profit)
        prev = self._prev
        self._prev = cur
        if prev is None:
            return 0.0, 0, 0.0
        return cur[0] - prev[0], cur[1] - prev[1], cur[2] - prev[2]

    def execute(self, action: neural.NetAction, price: float) -> None:
        """Fill the action at price (no costs, no slippage) and re-mark."""
        if action.shares > 0:
            if action.side == BID:
                self.cash -= action.shares * price
                self.shares_held += action.shares
            else:
                self.cash += action.shares * price
                self.shares_held -= action.shares
        self.profit = self.cash + self.shares_held * price


class MarginalizedAlgo(TradingState):
    """A genome trading on (dX, E[dVb|dX], E[dVa|dX]) plus its own deltas."""

    def __init__(self, genome, index: NeighborIndex, corpus: Corpus, k: int = 10,
                 scales=None, tick: float = 0.01):
        self.genome = np.ascontiguousarray(genome, dtype=np.float64)
        self.index = index
        self.corpus = corpus
        self.k = k
        self.scales = scales or neural.InputScales()
        self.tick = tick
        super().__init__()

    def step(self, dx: float, price: float) -> neural.NetAction:
        evb, eva = conditional_expectation(self.index, self.corpus, dx, self.k)
        dcash, dshares, dprofit = self._deltas()
        x = self.scales.apply(dx, evb, eva, dcash, dshares, dprofit)
        return neural.decode(neural.forward(self.genome, x), self.tick)


def marginalized_step(algo, dx: float, price: float) -> neural.NetAction:
    """One standalone decision: price change in, order intention out."""
    return algo.step(dx, price)
