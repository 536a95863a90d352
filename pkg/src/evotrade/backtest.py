"""Tick-data backtesting with risk supervision.

Raw quote ticks (pair, timestamp, bid, ask) become per-month episodes: the
first episode_seconds of the month, bucketed to bucket_seconds, mid-price
averaged per bucket, gaps forward-filled, and the whole path rescaled so it
starts at exactly base_price. An algorithm walks the path one step at a
time; its order is filled at the current price with no costs or slippage.
After every step three risk routines run in a fixed order and the first
that fires halts the episode on the spot.

The risk routines are deliberate line-for-line translations of their
reference listings, quirks included: cut_losses with roll_ind = 0 takes the
max over the whole history (the [-0:] slice), and an unknown method halts
rather than guessing.
"""
from __future__ import annotations

import csv
import math
import warnings
from calendar import timegm
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

_TS_FORMAT = "%Y%m%d %H:%M:%S.%f"


@dataclass(frozen=True)
class TickRecord:
    pair: str
    ts_ms: int  # epoch milliseconds, UTC
    bid: float
    ask: float

    @property
    def mid(self) -> float:
        return (self.bid + self.ask) / 2.0


def _parse_ts(text: str) -> int:
    dt = datetime.strptime(text, _TS_FORMAT)
    return timegm(dt.timetuple()) * 1000 + dt.microsecond // 1000


def _format_ts(ts_ms: int) -> str:
    sec, ms = divmod(ts_ms, 1000)
    dt = datetime.fromtimestamp(sec, tz=timezone.utc)
    return dt.strftime("%Y%m%d %H:%M:%S") + f".{ms:03d}"


def ingest_ticks(path, on_reject=None):
    """Stream TickRecords from a headerless CSV: pair,timestamp,bid,ask.

    A malformed line raises with its line number; a crossed quote
    (bid > ask) is skipped, reported through on_reject when given.
    """
    with open(path, newline="") as fh:
        for ln, row in enumerate(csv.reader(fh), start=1):
            if len(row) != 4:
                raise ValueError(f"{path}:{ln}: expected 4 fields, got {len(row)}")
            pair, ts_text, bid_text, ask_text = row
            try:
                ts = _parse_ts(ts_text.strip())
                bid = float(bid_text)
                ask = float(ask_text)
            except ValueError:
                raise ValueError(f"{path}:{ln}: malformed tick {row!r}") from None
            if not (math.isfinite(bid) and math.isfinite(ask)):
                raise ValueError(f"{path}:{ln}: non-finite quote {row!r}")
            rec = TickRecord(pair=pair.strip(), ts_ms=ts, bid=bid, ask=ask)
            if bid > ask:
                if on_reject is not None:
                    on_reject(rec)
                continue
            yield rec


def load_ticks(path):
    """Eager ingest: (records sorted stably by timestamp, n_rejected)."""
    rejected = [0]

    def bump(_):
        rejected[0] += 1

    records = list(ingest_ticks(path, on_reject=bump))
    records.sort(key=lambda r: r.ts_ms)
    return records, rejected[0]


def write_ticks(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for r in records:
            w.writerow([r.pair, _format_ts(r.ts_ms), repr(float(r.bid)), repr(float(r.ask))])


# ---------------------------------------------------------------------- #
# episode construction


@dataclass
class EpisodeSeries:
    pair: str
    month: str  # "YYYY-MM"
    prices: np.ndarray  # rescaled bucket means, prices[0] == base exactly
    scale: float  # base_price / first raw bucket mean
    n_ticks: int

    @property
    def tag(self) -> str:
        return f"{self.pair} {self.month}"


def month_start_ms(month: str) -> int:
    try:
        year, mon = month.split("-")
        dt = datetime(int(year), int(mon), 1, tzinfo=timezone.utc)
    except ValueError:
        raise ValueError(f"month must look like YYYY-MM, got {month!r}") from None
    return int(dt.timestamp()) * 1000


def months_in_range(start: str, end: str) -> list:
    """Month tags from start (inclusive) to end (exclusive)."""
    y0, m0 = (int(v) for v in start.split("-"))
    y1, m1 = (int(v) for v in end.split("-"))
    out = []
    y, m = y0, m0
    while (y, m) < (y1, m1):
        out.append(f"{y:04d}-{m:02d}")
        m += 1
        if m > 12:
            y, m = y + 1, 1
    return out


def build_episode(records, pair: str, month: str, episode_seconds: int = 1_000_000,
                  bucket_seconds: int = 10, base_price: float = 100.0) -> EpisodeSeries:
    """Bucketed, forward-filled, rescaled mid-price path for one month."""
    start = month_start_ms(month)
    span = episode_seconds * 1000
    width = bucket_seconds * 1000
    n_buckets = episode_seconds // bucket_seconds
    sums = np.zeros(n_buckets)
    counts = np.zeros(n_buckets, dtype=np.int64)
    n_ticks = 0
    for rec in records:
        if rec.pair != pair:
            continue
        off = rec.ts_ms - start
        if off < 0 or off >= span:
            continue
        b = off // width
        sums[b] += rec.mid
        counts[b] += 1
        n_ticks += 1
    if n_ticks == 0:
        raise ValueError(f"no ticks for {pair} in {month}")

    filled = np.flatnonzero(counts)
    first, last = filled[0], filled[-1]
    prices = np.empty(last - first + 1)
    level = math.nan
    for i in range(first, last + 1):
        if counts[i] > 0:
            level = sums[i] / counts[i]
        prices[i - first] = level

    scale = base_price / prices[0]
    prices *= scale
    prices[0] = base_price  # exact, independent of float division noise
    return EpisodeSeries(pair=pair, month=month, prices=prices, scale=scale, n_ticks=n_ticks)


# ---------------------------------------------------------------------- #
# risk routines (verbatim translations)


@dataclass
class RiskConfig:
    loss_lower_limit: float = -0.5
    loss_method: str = "absolute"
    roll_ind: int = 100
    delta_lower_limit: float = -0.5
    max_shares: int = 150


def cut_losses(profit_arr, lower_limit=-0.5, method="absolute", roll_ind=100) -> bool:
    """Halt when the profit level breaches a floor.

    absolute (or a history shorter than roll_ind): halt iff the latest
    profit is at or below lower_limit. rolling: halt iff the latest profit
    minus lower_limit sits below the max over the last roll_ind entries
    (roll_ind = 0 means the whole history). Any other method halts.
    """
    if (method == "absolute") or (len(profit_arr) <= roll_ind):
        if profit_arr[-1] <= lower_limit:
            return True
        return False
    elif method == "rolling":
        max_profit = np.max(profit_arr[-roll_ind:])
        if profit_arr[-1] - lower_limit < max_profit:
            return True
        return False
    else:  # unknown method: halt rather than propagate the mistake
        return True


def cut_losses_delta(profit_arr, lower_limit=-0.5) -> bool:
    """Halt when the one-step profit change is at or below lower_limit."""
    if (len(profit_arr) >= 2) and (profit_arr[-1] - profit_arr[-2] <= lower_limit):
        return True
    return False


def limit_leverage(shares_arr, max_shares=150) -> bool:
    """Halt when the absolute position reaches max_shares."""
    if np.abs(shares_arr[-1]) >= max_shares:
        return True
    return False


# ---------------------------------------------------------------------- #
# episode execution


@dataclass
class BacktestResult:
    genome_id: str
    pair: str
    month: str
    profit: np.ndarray
    shares: np.ndarray
    final_profit: float
    halt_reason: str  # none | cut_losses | cut_losses_delta | limit_leverage
    halt_t: int | None


def run_episode(algo, episode: EpisodeSeries, risk: RiskConfig,
                genome_id: str = "") -> BacktestResult:
    """Walk one episode: decide, fill at the current price, mark, check risk.

    The algo only needs step(dx, price) -> action, execute(action, price),
    reset(), and profit/shares_held attributes; MarginalizedAlgo and any
    scripted stand-in satisfy that.
    """
    algo.reset()
    prices = episode.prices
    T = len(prices)
    profit = np.zeros(T)
    shares = np.zeros(T, dtype=np.int64)
    halt_reason = "none"
    halt_t = None

    for t in range(1, T):
        dx = prices[t] - prices[t - 1]
        action = algo.step(dx, prices[t])
        algo.execute(action, prices[t])
        profit[t] = algo.profit
        shares[t] = algo.shares_held

        view_p = profit[: t + 1]
        view_s = shares[: t + 1]
        if cut_losses(view_p, risk.loss_lower_limit, risk.loss_method, risk.roll_ind):
            halt_reason, halt_t = "cut_losses", t
        elif cut_losses_delta(view_p, risk.delta_lower_limit):
            halt_reason, halt_t = "cut_losses_delta", t
        elif limit_leverage(view_s, risk.max_shares):
            halt_reason, halt_t = "limit_leverage", t
        if halt_t is not None:
            profit = profit[: t + 1]
            shares = shares[: t + 1]
            break

    return BacktestResult(
        genome_id=genome_id,
        pair=episode.pair,
        month=episode.month,
        profit=profit,
        shares=shares,
        final_profit=float(profit[-1]),
        halt_reason=halt_reason,
        halt_t=halt_t,
    )


def select_elite(results, k: int) -> list:
    """Top-k genome ids by total profit over the given results.

    Ties rank by genome id ascending. Fewer distinct ids than k returns
    them all and warns.
    """
    totals: dict = {}
    for r in results:
        totals[r.genome_id] = totals.get(r.genome_id, 0.0) + r.final_profit
    ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    if len(ranked) < k:
        warnings.warn(f"only {len(ranked)} genomes available, wanted top {k}")
    return ranked[:k]


def write_results_csv(results, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["genome_id", "pair", "month", "final_profit", "halt_reason", "halt_t"])
        for r in results:
            w.writerow([
                r.genome_id,
                r.pair,
                r.month,
                repr(float(r.final_profit)),
                r.halt_reason,
                "" if r.halt_t is None else r.halt_t,
            ])
