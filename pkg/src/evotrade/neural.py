"""Evolvable feed-forward policy network.

Architecture is fixed: 6 inputs -> tanh(20) -> tanh(10) -> linear 3. A
genome is the flat float64 parameter vector, weights first in row-major
layer order, then biases:

    [W1 (20x6) | W2 (10x20) | W3 (3x10) | b1 (20) | b2 (10) | b3 (3)]

which is 350 weights + 33 biases = 383 parameters.

The three raw outputs decode to an order intention: sign of the first picks
the side, the second scales to a share count, the third is a bounded price
offset from the current price.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .orders import ASK, BID, TICK_SIZE, round_to_tick

GENOME_SIZE = kernels.N_PARAMS  # 383

INIT_SCALE = 0.5
SHARES_UNIT = 100
MAX_SHARES = 1000
MAX_PRICE_OFFSET = 1.0


@dataclass(frozen=True)
class InputScales:
    """Divisors normalizing the six state deltas fed to the network.

    Order of inputs: (dX, dVb, dVa, dCash, dShares, dProfit).
    """

    price: float = 1.0
    interest: float = 1000.0
    cash: float = 1000.0
    shares: float = 100.0
    profit: float = 1000.0

    def apply(self, dx, dvb, dva, dcash, dshares, dprofit):
        return np.array(
            [
                dx / self.price,
                dvb / self.interest,
                dva / self.interest,
                dcash / self.cash,
                dshares / self.shares,
                dprofit / self.profit,
            ],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class NetAction:
    side: str
    shares: int
    d_price: float


def init_random(rng, scale: float = INIT_SCALE) -> np.ndarray:
    """Fresh genome: every parameter i.i.d. N(0, scale^2)."""
    return rng.normal(0.0, scale, GENOME_SIZE)


def forward(params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Raw 3-vector network output for one scaled input vector."""
    params = np.ascontiguousarray(params, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if params.shape != (GENOME_SIZE,):
        raise ValueError(f"genome must have shape ({GENOME_SIZE},), got {params.shape}")
    if x.shape != (kernels.N_IN,):
        raise ValueError(f"input must have shape ({kernels.N_IN},), got {x.shape}")
    return np.asarray(kernels.nn_forward(params, x))


def decode(raw: np.ndarray, tick: float = TICK_SIZE) -> NetAction:
    """Map raw network output to (side, shares, price offset).

    side: bid iff raw[0] >= 0. shares: round(|raw[1]| * 100) clamped to
    [0, 1000]; zero means abstain. d_price: raw[2] clamped to [-1, 1] and
    snapped to the tick grid.
    """
    side = BID if raw[0] >= 0 else ASK
    shares = int(round(abs(float(raw[1])) * SHARES_UNIT))
    if shares > MAX_SHARES:
        shares = MAX_SHARES
    d = float(raw[2])
    if d > MAX_PRICE_OFFSET:
        d = MAX_PRICE_OFFSET
    elif d < -MAX_PRICE_OFFSET:
        d = -MAX_PRICE_OFFSET
    return NetAction(side=side, shares=shares, d_price=round_to_tick(d, tick))


@dataclass
class GenomeRecord:
    sim_id: int
    generation: int
    fitness: float
    params: np.ndarray


def save_genomes(records, path) -> None:
    """One genome per line: sim_id,generation,fitness,383 parameters."""
    with open(path, "w") as fh:
        for rec in records:
            if len(rec.params) != GENOME_SIZE:
                raise ValueError(f"genome has {len(rec.params)} parameters, want {GENOME_SIZE}")
            vals = ",".join("%.17g" % v for v in rec.params)
            fh.write(f"{rec.sim_id},{rec.generation},{'%.17g' % rec.fitness},{vals}\n")


def load_genomes(path) -> list:
    records = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3 + GENOME_SIZE:
                raise ValueError(
                    f"{path}:{ln}: expected {3 + GENOME_SIZE} fields, got {len(parts)}"
                )
            records.append(
                GenomeRecord(
                    sim_id=int(parts[0]),
                    generation=int(parts[1]),
                    fitness=float(parts[2]),
                    params=np.array([float(v) for v in parts[3:]], dtype=np.float64),
                )
            )
    return records
