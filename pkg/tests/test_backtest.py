"""Tick ingestion, episode construction, risk supervision, episode runs."""
import numpy as np
import pytest

from evotrade.backtest import (
    EpisodeSeries,
    RiskConfig,
    TickRecord,
    build_episode,
    cut_losses,
    cut_losses_delta,
    ingest_ticks,
    limit_leverage,
    load_ticks,
    month_start_ms,
    months_in_range,
    run_episode,
    select_elite,
    write_results_csv,
    write_ticks,
)
from evotrade.marginalize import TradingState
from evotrade.neural import NetAction
from evotrade.orders import ASK, BID


class ScriptedAlgo(TradingState):
    """Plays back a fixed list of (side, shares) actions, then abstains."""

    def __init__(self, plan):
        self.plan = list(plan)
        self._i = 0
        super().__init__()

    def reset(self):
        super().reset()
        self._i = 0

    def step(self, dx, price):
        if self._i < len(self.plan):
            side, shares = self.plan[self._i]
            self._i += 1
            return NetAction(side, shares, 0.0)
        return NetAction(BID, 0, 0.0)


def flat_episode(prices, pair="EURUSD", month="2010-01"):
    return EpisodeSeries(pair=pair, month=month,
                         prices=np.asarray(prices, dtype=np.float64),
                         scale=1.0, n_ticks=len(prices))


LOOSE = RiskConfig(loss_lower_limit=-1e9, delta_lower_limit=-1e9, max_shares=10**9)


# --------------------------------------------------------------------- #
# tick ingestion


def test_ingest_ticks_round_trip(tmp_path):
    p = tmp_path / "EURUSD-2010-01.csv"
    p.write_text(
        "EURUSD,20100101 00:00:00.000,1.4321,1.4324\n"
        "EURUSD,20100101 00:00:02.500,1.4322,1.4326\n"
    )
    recs = list(ingest_ticks(p))
    assert len(recs) == 2
    assert recs[0].pair == "EURUSD"
    assert recs[0].bid == 1.4321 and recs[0].ask == 1.4324
    assert recs[1].ts_ms - recs[0].ts_ms == 2500
    assert recs[0].mid == pytest.approx((1.4321 + 1.4324) / 2)

    out = tmp_path / "copy.csv"
    write_ticks(recs, out)
    again = list(ingest_ticks(out))
    assert again == recs


def test_ingest_ticks_malformed_line_number(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(
        "EURUSD,20100101 00:00:00.000,1.0,1.1\n"
        "EURUSD,not a time,1.0,1.1\n"
    )
    with pytest.raises(ValueError, match=r"t\.csv:2"):
        list(ingest_ticks(p))
    p.write_text("EURUSD,20100101 00:00:00.000,1.0\n")
    with pytest.raises(ValueError, match="expected 4 fields"):
        list(ingest_ticks(p))
    p.write_text("EURUSD,20100101 00:00:00.000,inf,1.0\n")
    with pytest.raises(ValueError, match="non-finite"):
        list(ingest_ticks(p))


def test_ingest_ticks_skips_crossed_quotes(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(
        "EURUSD,20100101 00:00:00.000,1.0,1.1\n"
        "EURUSD,20100101 00:00:01.000,1.2,1.1\n"
        "EURUSD,20100101 00:00:02.000,1.0,1.1\n"
    )
    rejected = []
    recs = list(ingest_ticks(p, on_reject=rejected.append))
    assert len(recs) == 2
    assert len(rejected) == 1
    assert rejected[0].bid == 1.2


def test_load_ticks_sorts_by_timestamp(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(
        "EURUSD,20100101 00:00:05.000,1.0,1.1\n"
        "EURUSD,20100101 00:00:01.000,2.0,2.1\n"
        "EURUSD,20100101 00:00:05.000,3.0,3.1\n"
    )
    recs, rejected = load_ticks(p)
    assert rejected == 0
    assert [r.bid for r in recs] == [2.0, 1.0, 3.0]  # stable on the tie


# --------------------------------------------------------------------- #
# episode construction


def tick(pair, ts_ms, mid):
    return TickRecord(pair=pair, ts_ms=ts_ms, bid=mid, ask=mid)


def test_build_episode_buckets_and_forward_fill():
    start = month_start_ms("2010-01")
    recs = [
        tick("EURUSD", start + 1_000, 1.30),
        tick("EURUSD", start + 6_000, 1.34),  # same 10 s bucket
        tick("EURUSD", start + 25_000, 1.40),  # bucket 2; bucket 1 is a gap
    ]
    ep = build_episode(recs, "EURUSD", "2010-01", episode_seconds=60,
                       bucket_seconds=10, base_price=100.0)
    # raw bucket means: [1.32, gap, 1.40] -> forward fill -> ends at bucket 2
    assert len(ep.prices) == 3
    assert ep.prices[0] == 100.0  # forced exactly
    assert ep.prices[1] == pytest.approx(100.0)
    assert ep.prices[2] == pytest.approx(1.40 * (100.0 / 1.32))
    assert ep.scale == pytest.approx(100.0 / 1.32)
    assert ep.n_ticks == 3


def test_build_episode_filters_pair_and_window():
    start = month_start_ms("2010-01")
    recs = [
        tick("EURUSD", start + 1_000, 1.30),
        tick("GBPUSD", start + 2_000, 1.50),  # wrong pair
        tick("EURUSD", start - 1_000, 9.99),  # before the month
        tick("EURUSD", start + 61_000, 9.99),  # past the episode window
        tick("EURUSD", start + 31_000, 1.36),
    ]
    ep = build_episode(recs, "EURUSD", "2010-01", episode_seconds=60,
                       bucket_seconds=10)
    assert ep.n_ticks == 2
    assert len(ep.prices) == 4  # buckets 0..3, trailing empties truncated


def test_build_episode_no_ticks_is_an_error():
    with pytest.raises(ValueError, match="no ticks"):
        build_episode([], "EURUSD", "2010-01")


def test_month_helpers():
    assert months_in_range("2010-01", "2010-04") == ["2010-01", "2010-02", "2010-03"]
    assert months_in_range("2010-11", "2011-02") == ["2010-11", "2010-12", "2011-01"]
    assert months_in_range("2010-01", "2010-01") == []
    with pytest.raises(ValueError):
        month_start_ms("201001")


# --------------------------------------------------------------------- #
# risk routine truth tables


def test_cut_losses_absolute():
    assert cut_losses(np.array([0.0, -0.5])) is True  # inclusive boundary
    assert cut_losses(np.array([0.0, -0.49])) is False
    assert cut_losses(np.array([0.0, -0.51])) is True
    assert cut_losses(np.array([0.3])) is False


def test_cut_losses_short_history_acts_absolute_even_when_rolling():
    arr = np.array([0.0, -0.4])
    assert cut_losses(arr, method="rolling", roll_ind=100) is False
    assert cut_losses(np.array([0.0, -0.5]), method="rolling", roll_ind=100) is True


def test_cut_losses_rolling():
    # retreat from the rolling max by more than |lower_limit| halts
    arr = np.array([0.0, 1.0, 0.6])
    assert cut_losses(arr, lower_limit=-0.5, method="rolling", roll_ind=2) is False
    assert cut_losses(arr, lower_limit=-0.3, method="rolling", roll_ind=2) is True
    # drawdown measured only over the window: widening it past the old
    # high-water mark changes the verdict
    arr = np.array([0.0, 5.0, 0.1, 0.2, 0.15])
    assert cut_losses(arr, lower_limit=-0.5, method="rolling", roll_ind=3) is False
    assert cut_losses(arr, lower_limit=-0.5, method="rolling", roll_ind=4) is True


def test_cut_losses_rolling_zero_window_spans_everything():
    # the [-0:] slice is the whole array, a quirk kept on purpose
    arr = np.array([5.0, 0.0])
    assert cut_losses(arr, method="rolling", roll_ind=0) is True
    arr = np.array([0.1, 0.1])
    assert cut_losses(arr, method="rolling", roll_ind=0) is False


def test_cut_losses_unknown_method_halts():
    assert cut_losses(np.array([10.0, 20.0] * 60), method="martingale", roll_ind=3) is True


def test_cut_losses_delta():
    assert cut_losses_delta(np.array([0.0])) is False  # needs two points
    assert cut_losses_delta(np.array([1.0, 0.5])) is True  # drop of exactly 0.5
    assert cut_losses_delta(np.array([1.0, 0.51])) is False
    assert cut_losses_delta(np.array([1.0, 0.4])) is True
    assert cut_losses_delta(np.array([1.0, 2.0])) is False
    assert cut_losses_delta(np.array([1.0, 0.8]), lower_limit=-0.1) is True


def test_limit_leverage_inclusive_boundary():
    assert limit_leverage(np.array([0, 150])) is True
    assert limit_leverage(np.array([0, 149])) is False
    assert limit_leverage(np.array([0, -150])) is True
    assert limit_leverage(np.array([0, -151])) is True
    assert limit_leverage(np.array([0, 0])) is False
    assert limit_leverage(np.array([200, 10])) is False  # only the last counts


# --------------------------------------------------------------------- #
# episode execution


def test_run_episode_hand_ledger():
    # buy 10 at 100, hold, sell 10 at 103, stay flat
    prices = [100.0, 100.0, 101.5, 103.0, 102.0]
    algo = ScriptedAlgo([(BID, 10), (BID, 0), (ASK, 10), (BID, 0)])
    res = run_episode(algo, flat_episode(prices), LOOSE, genome_id="x")
    assert res.halt_reason == "none" and res.halt_t is None
    assert res.shares.tolist() == [0, 10, 10, 0, 0]
    assert np.allclose(res.profit, [0.0, 0.0, 15.0, 30.0, 30.0])
    assert res.final_profit == 30.0


def test_run_episode_accounting_identity():
    """One-step profit change equals prior position times the price move."""
    rng = np.random.default_rng(60)
    prices = 100.0 + np.cumsum(rng.normal(0, 0.3, 50))
    prices[0] = 100.0
    plan = [(BID if rng.random() < 0.5 else ASK, int(rng.integers(0, 20)))
            for _ in range(49)]
    res = run_episode(ScriptedAlgo(plan), flat_episode(prices), LOOSE)
    for t in range(1, len(res.profit)):
        want = res.shares[t - 1] * (prices[t] - prices[t - 1])
        assert res.profit[t] - res.profit[t - 1] == pytest.approx(want, abs=1e-9)


def test_run_episode_halts_on_loss_floor():
    # long 10 shares, price collapses 0.06 per step: pi hits -0.6 <= -0.5
    prices = [100.0, 100.0, 99.94, 99.88, 99.82, 99.76, 99.70, 99.64]
    algo = ScriptedAlgo([(BID, 10)])
    res = run_episode(algo, flat_episode(prices), RiskConfig(max_shares=1000))
    assert res.halt_reason == "cut_losses"
    assert res.profit[-1] <= -0.5
    assert len(res.profit) == res.halt_t + 1  # truncated at the halt


def test_run_episode_halts_on_delta():
    prices = [100.0, 100.0, 99.0]  # one-step drop of 1.0 on 10 shares
    algo = ScriptedAlgo([(BID, 10), (BID, 0)])
    risk = RiskConfig(loss_lower_limit=-1e9, delta_lower_limit=-0.5, max_shares=10**9)
    res = run_episode(algo, flat_episode(prices), risk)
    assert res.halt_reason == "cut_losses_delta"
    assert res.halt_t == 2


def test_run_episode_halts_on_leverage():
    prices = [100.0, 100.0, 100.0]
    algo = ScriptedAlgo([(BID, 150)])
    risk = RiskConfig(loss_lower_limit=-1e9, delta_lower_limit=-1e9, max_shares=150)
    res = run_episode(algo, flat_episode(prices), risk)
    assert res.halt_reason == "limit_leverage"
    assert res.halt_t == 1
    assert res.shares.tolist() == [0, 150]


def test_run_episode_risk_check_order():
    # a single step that trips every routine reports cut_losses first
    prices = [100.0, 99.0]
    algo = ScriptedAlgo([(ASK, 200)])  # short 200: leverage breach too
    algo_plan_profit_drop = algo
    risk = RiskConfig(loss_lower_limit=1e9, delta_lower_limit=1e9, max_shares=150)
    # with absurd limits every check fires; cut_losses wins the elif chain
    res = run_episode(algo_plan_profit_drop, flat_episode(prices), risk)
    assert res.halt_reason == "cut_losses"


def test_run_episode_resets_algo_state():
    prices = [100.0, 101.0, 102.0]
    algo = ScriptedAlgo([(BID, 5), (BID, 0)])
    first = run_episode(algo, flat_episode(prices), LOOSE)
    second = run_episode(algo, flat_episode(prices), LOOSE)
    assert np.array_equal(first.profit, second.profit)
    assert np.array_equal(first.shares, second.shares)


# --------------------------------------------------------------------- #
# elite selection and persistence


def _result(gid, profit, month):
    from evotrade.backtest import BacktestResult
    return BacktestResult(genome_id=gid, pair="EURUSD", month=month,
                          profit=np.array([0.0, profit]),
                          shares=np.array([0, 0]), final_profit=profit,
                          halt_reason="none", halt_t=None)


def test_select_elite_totals_and_ties():
    results = [
        _result("b", 1.0, "2010-01"),
        _result("b", 2.0, "2010-02"),
        _result("a", 3.0, "2010-01"),
        _result("c", 3.0, "2010-01"),
    ]
    elite = select_elite(results, 2)
    assert elite == [("a", 3.0), ("b", 3.0)]  # tie at 3.0: id order


def test_select_elite_warns_when_short():
    with pytest.warns(UserWarning, match="only 1"):
        elite = select_elite([_result("a", 1.0, "2010-01")], 5)
    assert elite == [("a", 1.0)]


def test_write_results_csv(tmp_path):
    res = _result("g1", 0.125, "2010-01")
    halted = _result("g2", -1.0, "2010-02")
    halted = halted.__class__(**{**halted.__dict__, "halt_reason": "cut_losses",
                                 "halt_t": 7})
    p = tmp_path / "results.csv"
    write_results_csv([res, halted], p)
    lines = p.read_text().strip().splitlines()
    assert lines[0] == "genome_id,pair,month,final_profit,halt_reason,halt_t"
    assert lines[1] == "g1,EURUSD,2010-01,0.125,none,"
    assert lines[2] == "g2,EURUSD,2010-02,-1.0,cut_losses,7"
