"""Pure-numpy kernel implementations.

This is the reference backend: the compiled module in _kernels.pyx mirrors
these semantics operation for operation. Clearing-price search and neighbor
selection are integer / exact-float-comparison logic, so the two backends
return bitwise-identical results; the network forward pass may differ in the
last few ulps because dot-product association differs.
"""
from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

# Fixed network architecture: 6 inputs, two tanh hidden layers (20, 10),
# 3 linear outputs. Weights first (row-major), then biases.
N_IN = 6
N_H1 = 20
N_H2 = 10
N_OUT = 3
N_WEIGHTS = N_H1 * N_IN + N_H2 * N_H1 + N_OUT * N_H2
N_PARAMS = N_WEIGHTS + N_H1 + N_H2 + N_OUT

_W1_END = N_H1 * N_IN
_W2_END = _W1_END + N_H2 * N_H1
_W3_END = _W2_END + N_OUT * N_H2
_B1_END = _W3_END + N_H1
_B2_END = _B1_END + N_H2


def nn_forward(params, x):
    """Evaluate the 6-20-10-3 network on one input vector."""
    w1 = params[:_W1_END].reshape(N_H1, N_IN)
    w2 = params[_W1_END:_W2_END].reshape(N_H2, N_H1)
    w3 = params[_W2_END:_W3_END].reshape(N_OUT, N_H2)
    b1 = params[_W3_END:_B1_END]
    b2 = params[_B1_END:_B2_END]
    b3 = params[_B2_END:]
    h1 = np.tanh(w1 @ x + b1)
    h2 = np.tanh(w2 @ h1 + b2)
    return w3 @ h2 + b3


def _tick_index(price, tick):
    return int(round(price / tick))


def _midpoint_on_grid(lo, hi, tick):
    # integer tick arithmetic so every backend lands on the same float
    s = _tick_index(lo, tick) + _tick_index(hi, tick)
    if s % 2 == 0:
        mid = s // 2
    else:
        half = s // 2  # true midpoint is half + 0.5; round half to even
        mid = half if half % 2 == 0 else half + 1
    return mid * tick


def find_clearing(bid_prices, bid_shares, ask_prices, ask_shares, last_price, tick):
    """Single clearing price for one batch.

    bid_prices descending with +inf for market orders; ask_prices ascending
    with -inf for market orders; shares are positive int64. last_price is
    nan when there is no reference price yet. Returns (price, volume);
    (nan, 0) when no trade is possible.

    Rule: maximize executable volume; break ties by minimum absolute
    order imbalance; break remaining ties by taking last_price if it lies
    inside the surviving candidate interval, else the interval midpoint
    rounded to the tick grid.
    """
    nb = len(bid_prices)
    na = len(ask_prices)
    if nb == 0 or na == 0:
        return (math.nan, 0)
    if bid_prices[0] < ask_prices[0]:
        return (math.nan, 0)

    finite_b = bid_prices[np.isfinite(bid_prices)]
    finite_a = ask_prices[np.isfinite(ask_prices)]
    cands = np.unique(np.concatenate([finite_b, finite_a]))

    if cands.size == 0:
        # market orders on both sides and nothing else
        if math.isnan(last_price):
            return (math.nan, 0)
        vol = int(min(bid_shares.sum(), ask_shares.sum()))
        return (last_price, vol) if vol > 0 else (math.nan, 0)

    demand = np.array(
        [int(bid_shares[bid_prices >= c].sum()) for c in cands], dtype=np.int64
    )
    supply = np.array(
        [int(ask_shares[ask_prices <= c].sum()) for c in cands], dtype=np.int64
    )
    volume = np.minimum(demand, supply)
    best = int(volume.max())
    if best == 0:
        return (math.nan, 0)

    at_best = volume == best
    imbalance = np.abs(demand - supply)
    min_imb = int(imbalance[at_best].min())
    surviving = cands[at_best & (imbalance == min_imb)]
    lo = float(surviving[0])
    hi = float(surviving[-1])

    if not math.isnan(last_price) and lo <= last_price <= hi:
        price = last_price
    else:
        price = _midpoint_on_grid(lo, hi, tick)
    return (price, best)


def knn_select(sorted_vals, orig_idx, query, k):
    """Indices of the k nearest rows to query under |value - query|.

    sorted_vals are the corpus values ascending; orig_idx maps each sorted
    position back to its insertion index. Distance ties are broken by the
    smallest insertion index, exactly as a linear scan over the corpus in
    insertion order would. Returns int64 insertion indices ordered by
    (distance, insertion index).
    """
    n = len(sorted_vals)
    if k <= 0 or k > n:
        raise ValueError(f"k must be in [1, {n}], got {k}")

    lo = int(np.searchsorted(sorted_vals, query, side="left"))

    # outward walk to find the kth smallest distance
    i = lo - 1
    j = lo
    d_max = 0.0
    for _ in range(k):
        dl = query - sorted_vals[i] if i >= 0 else math.inf
        dr = sorted_vals[j] - query if j < n else math.inf
        if dl <= dr:
            d_max = dl
            i -= 1
        else:
            d_max = dr
            j += 1

    # strict interior: distance < d_max
    a = lo
    while a > 0 and (query - sorted_vals[a - 1]) < d_max:
        a -= 1
    b = lo
    while b < n and (sorted_vals[b] - query) < d_max:
        b += 1

    # boundary blocks: distance == d_max, competing on insertion index
    a2 = a
    while a2 > 0 and (query - sorted_vals[a2 - 1]) == d_max:
        a2 -= 1
    b2 = b
    while b2 < n and (sorted_vals[b2] - query) == d_max:
        b2 += 1

    need = k - (b - a)
    ties = sorted(int(orig_idx[p]) for p in range(a2, a)) + sorted(
        int(orig_idx[p]) for p in range(b, b2)
    )
    ties.sort()
    chosen = ties[:need]

    out = [(abs(sorted_vals[p] - query), int(orig_idx[p])) for p in range(a, b)]
    out.extend((d_max, o) for o in chosen)
    out.sort()
    return np.array([o for _, o in out], dtype=np.int64)
