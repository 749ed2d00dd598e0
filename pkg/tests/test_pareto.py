import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_front
from sparsesr import exprcore as ec
from sparsesr.pareto import ParetoFront, non_dominated, update_pareto, utopia_distances, utopia_select
from sparsesr.sisso import ModelCandidate


def cand(c, r, i=0):
    e = ec.var(i)
    return ModelCandidate((i,), (e,), np.ones(1), 0.0, float(r), 0.0, float(c), e)


def pts(front):
    return sorted((m.complexity, m.rmse) for m in front)


def test_equal_complexity_lower_rmse_wins():
    f = update_pareto(ParetoFront([cand(2, 1.0, 0)]), [cand(2, 0.5, 1)])
    assert pts(f) == [(2, 0.5)]


def test_equal_rmse_higher_complexity_dominated():
    f = update_pareto(ParetoFront(), [cand(1, 0.9, 0), cand(3, 0.9, 1)])
    assert pts(f) == [(1, 0.9)]


def test_duplicate_key_keeps_lower_rmse():
    f = update_pareto(ParetoFront(), [cand(3, 0.5, 0), cand(3, 0.2, 0)])
    assert pts(f) == [(3, 0.2)]


def test_tolerance_absorbs_float_noise():
    f = update_pareto(ParetoFront(), [cand(1, 0.5, 0), cand(2, 0.5 - 1e-14, 1)])
    assert pts(f) == [(1, 0.5)]


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        non_dominated([cand(1, np.nan)])


def test_hundred_random_match_oracle(rng):
    cs = [cand(rng.integers(0, 30), rng.uniform(0, 1), i) for i in range(100)]
    f = update_pareto(ParetoFront(), cs)
    assert pts(f) == brute_front([(m.complexity, m.rmse, m.key) for m in cs])


def test_utopia_single_entry():
    m = cand(4, 0.3)
    assert utopia_select(ParetoFront([m])) is m


def test_utopia_tie_prefers_simpler():
    f = ParetoFront([cand(0, 1.0, 0), cand(10, 0.0, 1)])
    assert utopia_select(f).complexity == 0


def test_utopia_middle_entry():
    f = ParetoFront([cand(0, 1.0, 0), cand(5, 0.1, 1), cand(20, 0.05, 2)])
    d = utopia_distances(f)
    assert d[1] == pytest.approx(np.hypot(0.25, 0.05 / 0.95))
    assert d[0] == pytest.approx(1.0) and d[2] == pytest.approx(1.0)
    assert utopia_select(f).complexity == 5
    assert utopia_select(f, log_rmse=True).complexity == 5


def test_utopia_empty_errors():
    with pytest.raises(ValueError):
        utopia_select(ParetoFront())


FOUR = [(0, 1.0), (4, 0.5), (6, 1e-9), (8, 1e-11)]


def test_log_mode_prefers_near_exact_fit():
    f = ParetoFront([cand(c, r, i) for i, (c, r) in enumerate(FOUR)])
    assert utopia_select(f).complexity == 4
    assert utopia_select(f, log_rmse=True).complexity == 6


def test_front_utopia_uses_mode():
    entries = [cand(c, r, i) for i, (c, r) in enumerate(FOUR)]
    assert ParetoFront(entries, log_rmse=True).utopia.complexity == 6
    assert ParetoFront(entries).utopia.complexity == 4


GRID = st.tuples(st.integers(0, 15), st.integers(0, 20), st.integers(0, 25))


def consistent(raw):
    """Candidates whose key determines (complexity, rmse), as for fits on one dataset."""
    first = {}
    for c, r, i in raw:
        first.setdefault(i, (c, r))
    return [cand(*first[i], i) for _, _, i in raw]


@given(st.lists(GRID, min_size=1, max_size=60))
@settings(max_examples=250)
def test_update_matches_oracle(raw):
    cs = [cand(c, r / 10, i) for c, r, i in raw]
    f = update_pareto(ParetoFront(), cs)
    assert pts(f) == brute_front([(m.complexity, m.rmse, m.key) for m in cs])
    rm = [m.rmse for m in f]
    assert [m.complexity for m in f] == sorted(m.complexity for m in f)
    assert all(b < a for a, b in zip(rm, rm[1:]))


@given(st.lists(GRID, min_size=1, max_size=40), st.lists(GRID, max_size=40), st.randoms())
@settings(max_examples=200)
def test_idempotent_and_order_independent(a, b, rnd):
    both = consistent(a + b)
    ca, cb = both[:len(a)], both[len(a):]
    once = update_pareto(ParetoFront(), ca + cb)
    twice = update_pareto(once, ca + cb)
    assert pts(once) == pts(twice)
    split = update_pareto(update_pareto(ParetoFront(), cb), ca)
    shuffled = list(ca + cb)
    rnd.shuffle(shuffled)
    assert [m.key for m in split] == [m.key for m in once]
    assert [m.key for m in update_pareto(ParetoFront(), shuffled)] == [m.key for m in once]


@given(st.lists(GRID, min_size=1, max_size=40), st.floats(0.01, 100), st.floats(-5, 5))
@settings(max_examples=200)
def test_linear_utopia_affine_invariant(raw, scale, shift):
    cs = [cand(c, r / 10 + 1, i) for c, r, i in raw]
    f = update_pareto(ParetoFront(), cs)
    g = update_pareto(ParetoFront(), [cand(m.complexity, scale * m.rmse + shift + 10 * scale, m.features[0])
                                      for m in f])
    assert utopia_select(f).key == utopia_select(g).key


@given(st.lists(GRID, min_size=1, max_size=40), st.floats(0.001, 1000))
@settings(max_examples=200)
def test_log_utopia_scale_invariant(raw, scale):
    cs = [cand(c, r / 10 + 0.05, i) for c, r, i in raw]
    f = update_pareto(ParetoFront(), cs)
    g = ParetoFront([cand(m.complexity, scale * m.rmse, m.features[0]) for m in f])
    assert utopia_select(f, log_rmse=True).key == utopia_select(g, log_rmse=True).key
