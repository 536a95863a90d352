# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels.

Semantics mirror _kernels_py.py operation for operation; that module is
the reference. Clearing and neighbor selection must return bitwise
identical results to the fallback, so every comparison below is written
against the same float values the numpy code sees.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, isnan, tanh

cnp.import_array()

BACKEND = "cython"

N_IN = 6
N_H1 = 20
N_H2 = 10
N_OUT = 3
N_WEIGHTS = N_H1 * N_IN + N_H2 * N_H1 + N_OUT * N_H2
N_PARAMS = N_WEIGHTS + N_H1 + N_H2 + N_OUT

def nn_forward(double[::1] params, double[::1] x):
    # layout offsets: W1 ends at 120, W2 at 320, W3 at 350,
    # b1 at 370, b2 at 380, b3 at 383
    cdef double h1[20]
    cdef double h2[10]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(3)
    cdef double acc
    cdef int i, j

    for i in range(20):
        acc = params[350 + i]
        for j in range(6):
            acc += params[i * 6 + j] * x[j]
        h1[i] = tanh(acc)
    for i in range(10):
        acc = params[370 + i]
        for j in range(20):
            acc += params[120 + i * 20 + j] * h1[j]
        h2[i] = tanh(acc)
    for i in range(3):
        acc = params[380 + i]
        for j in range(10):
            acc += params[320 + i * 10 + j] * h2[j]
        out[i] = acc
    return out


cdef long long _tick_index(double price, double tick):
    # price/tick is within float noise of an integer here; Python's
    # int(round(x)) and this agree for every non-halfway value
    cdef double r = price / tick
    cdef double f = r - (<long long> r)
    cdef long long n = <long long> r
    if f > 0.5 or (f == 0.5 and n % 2 != 0):
        n += 1
    elif f < -0.5 or (f == -0.5 and n % 2 != 0):
        n -= 1
    return n


cdef double _midpoint_on_grid(double lo, double hi, double tick):
    cdef long long s = _tick_index(lo, tick) + _tick_index(hi, tick)
    cdef long long mid, half
    if s % 2 == 0:
        mid = s // 2
    else:
        half = s // 2
        if s < 0:
            half -= 1  # match floor division toward -inf like Python
        mid = half if half % 2 == 0 else half + 1
    return mid * tick


cdef Py_ssize_t _count_ge(double[::1] desc, double x):
    # number of entries >= x in a descending array (+inf allowed)
    cdef Py_ssize_t lo = 0, hi = desc.shape[0], m
    while lo < hi:
        m = (lo + hi) // 2
        if desc[m] >= x:
            lo = m + 1
        else:
            hi = m
    return lo


cdef Py_ssize_t _count_le(double[::1] asc, double x):
    # number of entries <= x in an ascending array (-inf allowed)
    cdef Py_ssize_t lo = 0, hi = asc.shape[0], m
    while lo < hi:
        m = (lo + hi) // 2
        if asc[m] <= x:
            lo = m + 1
        else:
            hi = m
    return lo


def find_clearing(double[::1] bid_prices, long long[::1] bid_shares,
                  double[::1] ask_prices, long long[::1] ask_shares,
                  double last_price, double tick):
    cdef Py_ssize_t nb = bid_prices.shape[0]
    cdef Py_ssize_t na = ask_prices.shape[0]
    if nb == 0 or na == 0:
        return (float("nan"), 0)
    if bid_prices[0] < ask_prices[0]:
        return (float("nan"), 0)

    cdef cnp.ndarray finite_b = np.asarray(bid_prices)[np.isfinite(np.asarray(bid_prices))]
    cdef cnp.ndarray finite_a = np.asarray(ask_prices)[np.isfinite(np.asarray(ask_prices))]
    cdef cnp.ndarray cands_arr = np.unique(np.concatenate([finite_b, finite_a]))
    cdef double[::1] cands = np.ascontiguousarray(cands_arr)
    cdef Py_ssize_t ncand = cands.shape[0]

    cdef long long total_b = 0, total_a = 0
    cdef Py_ssize_t i
    if ncand == 0:
        if isnan(last_price):
            return (float("nan"), 0)
        for i in range(nb):
            total_b += bid_shares[i]
        for i in range(na):
            total_a += ask_shares[i]
        if total_b < total_a:
            total_a = total_b
        if total_a > 0:
            return (last_price, total_a)
        return (float("nan"), 0)

    # prefix share sums over priority-sorted inputs
    cdef cnp.ndarray[long long, ndim=1] pre_b = np.empty(nb + 1, dtype=np.int64)
    cdef cnp.ndarray[long long, ndim=1] pre_a = np.empty(na + 1, dtype=np.int64)
    pre_b[0] = 0
    for i in range(nb):
        pre_b[i + 1] = pre_b[i] + bid_shares[i]
    pre_a[0] = 0
    for i in range(na):
        pre_a[i + 1] = pre_a[i] + ask_shares[i]

    cdef long long best = 0, vol, demand, supply, imb, min_imb = 0
    cdef Py_ssize_t c
    cdef cnp.ndarray[long long, ndim=1] demands = np.empty(ncand, dtype=np.int64)
    cdef cnp.ndarray[long long, ndim=1] supplies = np.empty(ncand, dtype=np.int64)
    for c in range(ncand):
        demand = pre_b[_count_ge(bid_prices, cands[c])]
        supply = pre_a[_count_le(ask_prices, cands[c])]
        demands[c] = demand
        supplies[c] = supply
        vol = demand if demand < supply else supply
        if vol > best:
            best = vol
    if best == 0:
        return (float("nan"), 0)

    cdef double lo = 0.0, hi = 0.0
    cdef bint seen = False
    for c in range(ncand):
        vol = demands[c] if demands[c] < supplies[c] else supplies[c]
        if vol != best:
            continue
        imb = demands[c] - supplies[c]
        if imb < 0:
            imb = -imb
        if not seen or imb < min_imb:
            min_imb = imb
            seen = False  # restart the interval at the new best imbalance
        if not seen:
            lo = cands[c]
            hi = cands[c]
            seen = True
        elif imb == min_imb:
            hi = cands[c]

    cdef double price
    if (not isnan(last_price)) and lo <= last_price <= hi:
        price = last_price
    else:
        price = _midpoint_on_grid(lo, hi, tick)
    return (price, best)


def knn_select(double[::1] sorted_vals, long long[::1] orig_idx, double query, long long k):
    cdef Py_ssize_t n = sorted_vals.shape[0]
    if k <= 0 or k > n:
        raise ValueError(f"k must be in [1, {n}], got {k}")

    # leftmost insertion point for query
    cdef Py_ssize_t lo = 0, hi = n, m
    while lo < hi:
        m = (lo + hi) // 2
        if sorted_vals[m] < query:
            lo = m + 1
        else:
            hi = m

    cdef Py_ssize_t i = lo - 1, j = lo
    cdef double d_max = 0.0, dl, dr
    cdef long long step
    for step in range(k):
        dl = (query - sorted_vals[i]) if i >= 0 else float("inf")
        dr = (sorted_vals[j] - query) if j < n else float("inf")
        if dl <= dr:
            d_max = dl
            i -= 1
        else:
            d_max = dr
            j += 1

    cdef Py_ssize_t a = lo, b = lo
    while a > 0 and (query - sorted_vals[a - 1]) < d_max:
        a -= 1
    while b < n and (sorted_vals[b] - query) < d_max:
        b += 1
    cdef Py_ssize_t a2 = a, b2 = b
    while a2 > 0 and (query - sorted_vals[a2 - 1]) == d_max:
        a2 -= 1
    while b2 < n and (sorted_vals[b2] - query) == d_max:
        b2 += 1

    cdef Py_ssize_t need = k - (b - a)
    cdef list ties = []
    cdef Py_ssize_t p
    for p in range(a2, a):
        ties.append(orig_idx[p])
    for p in range(b, b2):
        ties.append(orig_idx[p])
    ties.sort()

    cdef list out = []
    for p in range(a, b):
        out.append((fabs(sorted_vals[p] - query), orig_idx[p]))
    for p in range(need):
        out.append((d_max, ties[p]))
    out.sort()

    cdef cnp.ndarray[long long, ndim=1] result = np.empty(k, dtype=np.int64)
    for p in range(k):
        result[p] = out[p][1]
    return result
