"""Genome layout, forward pass, action decoding, persistence."""
import numpy as np
import pytest

from evotrade import neural
from evotrade.neural import (
    GENOME_SIZE,
    GenomeRecord,
    InputScales,
    decode,
    forward,
    init_random,
    load_genomes,
    save_genomes,
)
from evotrade.orders import ASK, BID


def numpy_forward(params, x):
    """Plain-numpy re-statement of the network as the oracle."""
    w1 = params[0:120].reshape(20, 6)
    w2 = params[120:320].reshape(10, 20)
    w3 = params[320:350].reshape(3, 10)
    b1 = params[350:370]
    b2 = params[370:380]
    b3 = params[380:383]
    h1 = np.tanh(w1 @ x + b1)
    h2 = np.tanh(w2 @ h1 + b2)
    return w3 @ h2 + b3


def test_genome_size_is_layer_arithmetic():
    # 20*6 + 10*20 + 3*10 weights plus 20 + 10 + 3 biases
    assert GENOME_SIZE == 120 + 200 + 30 + 20 + 10 + 3 == 383


def test_zero_genome_outputs_zero():
    out = forward(np.zeros(GENOME_SIZE), np.ones(6))
    assert np.array_equal(out, np.zeros(3))


def test_output_bias_passes_through():
    params = np.zeros(GENOME_SIZE)
    params[380:383] = [0.25, -1.5, 3.0]
    out = forward(params, np.zeros(6))
    assert np.allclose(out, [0.25, -1.5, 3.0], atol=1e-15)


def test_forward_matches_numpy_oracle():
    rng = np.random.default_rng(11)
    for _ in range(300):
        params = init_random(rng)
        x = rng.normal(0, 2, 6)
        got = forward(params, x)
        want = numpy_forward(params, x)
        assert np.allclose(got, want, rtol=1e-12, atol=1e-12)


def test_forward_validates_shapes():
    with pytest.raises(ValueError):
        forward(np.zeros(GENOME_SIZE - 1), np.zeros(6))
    with pytest.raises(ValueError):
        forward(np.zeros(GENOME_SIZE), np.zeros(5))


def test_init_random_distribution():
    rng = np.random.default_rng(3)
    draws = np.stack([init_random(rng) for _ in range(400)])
    assert abs(draws.mean()) < 0.01
    assert abs(draws.std() - 0.5) < 0.01


def test_decode_side_and_shares():
    a = decode(np.array([0.0, 0.5, 0.0]))
    assert a.side == BID and a.shares == 50  # raw[0] >= 0 means bid
    a = decode(np.array([-0.1, 0.5, 0.0]))
    assert a.side == ASK
    a = decode(np.array([1.0, -0.337, 0.0]))
    assert a.shares == 34  # magnitude times 100, rounded
    a = decode(np.array([1.0, 0.004, 0.0]))
    assert a.shares == 0  # rounds to zero: abstain
    a = decode(np.array([1.0, 25.0, 0.0]))
    assert a.shares == 1000  # hard cap


def test_decode_price_offset_clamps_and_snaps():
    a = decode(np.array([1.0, 1.0, 3.7]))
    assert a.d_price == 1.0
    a = decode(np.array([1.0, 1.0, -2.0]))
    assert a.d_price == -1.0
    a = decode(np.array([1.0, 1.0, 0.123456]))
    assert a.d_price == 0.12  # snapped onto the tick grid


def test_input_scales_apply():
    s = InputScales()
    x = s.apply(0.5, 200.0, 300.0, 1500.0, 50.0, -250.0)
    assert np.allclose(x, [0.5, 0.2, 0.3, 1.5, 0.5, -0.25])


def test_genome_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(17)
    recs = [
        GenomeRecord(sim_id=4, generation=g, fitness=float(rng.normal()) * 100,
                     params=init_random(rng))
        for g in range(5)
    ]
    path = tmp_path / "genomes.csv"
    save_genomes(recs, path)
    back = load_genomes(path)
    assert len(back) == 5
    for a, b in zip(recs, back):
        assert (a.sim_id, a.generation) == (b.sim_id, b.generation)
        assert a.fitness == b.fitness  # %.17g preserves doubles exactly
        assert np.array_equal(a.params, b.params)


def test_load_genomes_reports_bad_lines(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0,0,1.5,0.1,0.2\n")
    with pytest.raises(ValueError, match=r"bad\.csv:1"):
        load_genomes(path)
