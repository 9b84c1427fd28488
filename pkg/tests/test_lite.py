import math
from decimal import Decimal, getcontext

import numpy as np
import pytest

from dacr import lite


def hp_params(f, tau, s):
    """(k, L) with 60-digit decimal arithmetic, written independently of the module."""
    getcontext().prec = 60
    n = 3 * f + 1
    ph = Decimal(2 * f + 1) / n
    pd = Decimal(2 * f + 1 - s) / n
    lf = Decimal(f).ln()
    t = Decimal(str(tau))
    rho = (1 / ph).ln() / (1 / pd).ln()
    k = math.ceil(t * lf / (1 / pd).ln())
    L = math.ceil(t * (rho * lf).exp() * lf)
    return k, L


def test_honest_probability():
    p = lite.lite_params(10, 1.5)
    assert math.isclose(p.p_h, 21 / 31)


def test_no_censoring_gives_unit_exponent():
    p = lite.lite_params(10, 1.5, s=0)
    assert p.p_d == p.p_h and p.rho == 1


@pytest.mark.parametrize("f", [16, 32, 64])
def test_params_match_high_precision(f):
    p = lite.lite_params(f, 1.5)
    assert (p.k, p.L) == hp_params(f, 1.5, p.s)
    assert p.s == math.ceil(1.5 * f / math.log(f))


def test_batch_success_edges():
    assert lite.batch_success_prob(0.5, 3, 0) == 0
    assert lite.batch_success_prob(1.0, 3, 7) == 1


def test_batch_success_matches_bernoulli(rng):
    p, k, L, trials = 21 / 31, 5, 20, 100_000
    hits = (rng.random((trials, L, k)) < p).all(axis=2).any(axis=1).mean()
    want = lite.batch_success_prob(p, k, L)
    assert abs(hits - want) <= 3 * math.sqrt(want * (1 - want) / trials)


def test_sample_matrix_deterministic_and_in_range():
    a = lite.sample_matrix(b"c" * 32, 3, 31, 4, 9)
    assert a.shape == (9, 4) and a.min() >= 0 and a.max() < 31
    assert np.array_equal(a, lite.sample_matrix(b"c" * 32, 3, 31, 4, 9))
    assert not np.array_equal(a, lite.sample_matrix(b"c" * 32, 4, 31, 4, 9))


def test_uncensored_leader_passes():
    assert lite.run_query_game(49, 16, [], seed=0).leader_ok


def test_maximal_censoring_fails():
    f = 32
    prm = lite.lite_params(f, 1.5)
    game = lite.QueryGame(f, prm)
    fails = sum(not game.run(list(range(f + 1, 2 * f + 1)), np.random.default_rng(s)).leader_ok for s in range(100))
    assert fails >= 99


def test_grinding_does_not_help():
    # at f=16 a 2**10 grind does cross f+1 with these parameters; see the notes
    f = 32
    prm = lite.lite_params(f, 1.5)
    game = lite.QueryGame(f, prm)
    cens = list(range(2 * f + 1 - prm.s, 2 * f + 1))
    best = lite.grind(game, cens, np.random.default_rng(0), 2 ** 10)
    assert best < f + 1


def test_game_rejects_wrong_n():
    with pytest.raises(ValueError):
        lite.run_query_game(10, 3, [], 0)
