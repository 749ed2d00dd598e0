import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_l0, brute_sis
from sparsesr.expansion import OperatorSet, expand_level, initial_pool
from sparsesr.sisso import (SissoError, batched_lstsq, c2_sisso, fit_model, intercept_model, l0_best,
                            l0_scan, sis)


def raw_pool(data):
    return initial_pool(data, list(range(data.shape[1])), dedup=False)


def test_sis_dominant_feature(rng):
    f1 = rng.normal(size=40)
    f2 = rng.normal(size=40)
    f2 -= (f2 @ f1) / (f1 @ f1) * f1
    pool = raw_pool(np.column_stack([f1, f2]))
    assert sis(2 * f1, pool, 1) == [1]


def test_sis_zero_weights_tie_break(rng):
    data = rng.normal(size=(30, 5))
    data -= data.mean(axis=0)
    pool = raw_pool(data)
    assert sis(np.ones(30), pool, 3) == [1, 2, 3]


def test_sis_excludes_intercept_and_constants(rng):
    data = np.column_stack([np.full(20, 2.0), rng.normal(size=20)])
    pool = raw_pool(data)
    assert sis(rng.normal(size=20), pool, 5) == [2]
    with pytest.raises(SissoError):
        sis(rng.normal(size=20), pool, 1, exclude=[2])
    with pytest.raises(ValueError):
        sis(rng.normal(size=20), pool, 0)


def test_sis_top20_of_200(rng):
    pool = raw_pool(rng.normal(size=(50, 200)))
    y = rng.normal(size=50)
    assert sis(y, pool, 20) == brute_sis(pool.columns, y, 20, range(1, 201))


@given(st.integers(0, 2**31), st.integers(1, 12), st.floats(0.01, 1000))
@settings(max_examples=200)
def test_sis_matches_brute_force(seed, k, scale):
    r = np.random.default_rng(seed)
    d = int(r.integers(2, 40))
    pool = raw_pool(r.normal(size=(25, d)) * r.uniform(0.1, 10, d))
    y = r.normal(size=25)
    excl = [int(i) for i in r.choice(np.arange(1, d + 1), size=min(2, d - 1), replace=False)]
    eligible = [i for i in range(1, d + 1) if i not in excl]
    got = sis(y, pool, k, exclude=excl)
    assert got == brute_sis(pool.columns, y, k, eligible)
    assert sis(scale * y, pool, k, exclude=excl) == got


def test_l0_exact_representation(rng):
    data = rng.uniform(1, 5, (20, 5))
    y = 3 * data[:, 1] + 1
    m = l0_best(y, raw_pool(data), [1, 2, 3, 4, 5], 1)
    assert m.features == (2,)
    assert m.coefficients[0] == pytest.approx(3, abs=1e-10)
    assert m.intercept == pytest.approx(1, abs=1e-10)
    assert m.rmse < 1e-10


def test_l0_full_subspace_equals_lstsq(rng):
    data = rng.normal(size=(30, 4))
    y = rng.normal(size=30)
    m = l0_best(y, raw_pool(data), [1, 2, 3, 4], 4)
    X = np.column_stack([np.ones(30), data])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    assert np.allclose(np.r_[m.intercept, m.coefficients], coef, atol=1e-10)


def test_l0_rank_deficient_skipped(rng):
    x = rng.normal(size=20)
    data = np.column_stack([x, 2 * x, rng.normal(size=20)])
    pool = raw_pool(data)
    scan = l0_scan(rng.normal(size=20), pool, [1, 2, 3], 2)
    rows = {tuple(c): r for c, r in zip(scan.combos.tolist(), scan.rmse)}
    assert np.isinf(rows[(1, 2)])
    assert np.isfinite(rows[(1, 3)])
    with pytest.raises(SissoError, match="no solvable 2-term model"):
        l0_scan(rng.normal(size=20), pool, [1, 2], 2)


def test_l0_ties_prefer_lower_complexity():
    x = np.linspace(1, 4, 15)
    ops = OperatorSet.from_names(["id", "mul", "sq"])
    pool = expand_level(initial_pool(x[:, None], [0], ops), ops, dedup=False)
    mul = pool.canonical_strings.index("(x1 * x1)")
    sq = pool.canonical_strings.index("(x1 ^ 2)")
    scan = l0_scan(x ** 2, pool, [mul, sq], 1)
    assert abs(scan.rmse[0] - scan.rmse[1]) < 1e-12
    # Ranked by assembled-model bits: c*(x1*x1)+c0 reuses the mul symbol.
    assert scan.complexity[list(scan.combos[:, 0]).index(mul)] < scan.complexity[list(scan.combos[:, 0]).index(sq)]
    assert l0_best(x ** 2, pool, [mul, sq], 1).features == (mul,)


@given(st.integers(0, 2**31), st.integers(2, 8), st.integers(1, 3))
@settings(max_examples=200)
def test_l0_matches_exhaustive(seed, k, t):
    t = min(t, k)
    r = np.random.default_rng(seed)
    n = int(r.integers(t + 3, 30))
    d = k + int(r.integers(0, 5))
    pool = raw_pool(r.normal(size=(n, d)))
    y = r.normal(size=n)
    sub = sorted(int(i) for i in r.choice(np.arange(1, d + 1), size=k, replace=False))
    m = l0_best(y, pool, sub, t)
    ssr, combo, coef = brute_l0(pool.columns, y, sub, t)
    assert m.features == combo
    assert m.rmse == pytest.approx(np.sqrt(ssr / n), rel=1e-8, abs=1e-12)
    assert np.allclose(np.r_[m.intercept, m.coefficients], coef, rtol=1e-6, atol=1e-8)


@given(st.integers(0, 2**31), st.integers(1, 3))
@settings(max_examples=200)
def test_normal_equations(seed, t):
    r = np.random.default_rng(seed)
    n = int(r.integers(t + 2, 40))
    data = r.normal(size=(n, 6)) * r.uniform(0.01, 100, 6)
    pool = raw_pool(data)
    y = r.normal(size=n) * r.uniform(0.1, 100)
    m = l0_best(y, pool, [1, 2, 3, 4, 5, 6], t)
    res = y - m.predict(data)
    tol = 1e-6 * np.linalg.norm(y)
    assert abs(res.sum()) / np.sqrt(n) <= tol
    for i in m.features:
        col = pool.columns[:, i]
        assert abs(res @ col) / np.linalg.norm(col) <= tol
    assert m.rmse ** 2 * n == pytest.approx(res @ res, rel=1e-8, abs=1e-20)


def test_batched_lstsq_marks_rank_deficient(rng):
    x = rng.normal(size=10)
    X = np.stack([np.column_stack([np.ones(10), x, x]), np.column_stack([np.ones(10), x, x ** 2])])
    _, _, ok = batched_lstsq(X, rng.normal(size=10))
    assert ok.tolist() == [False, True]


def test_intercept_model(rng):
    y = rng.normal(size=10)
    m = intercept_model(y)
    assert m.intercept == pytest.approx(y.mean())
    assert m.complexity == 0 and m.features == ()


def test_fit_model_complexity_and_render(rng):
    data = rng.uniform(1, 5, (10, 1))
    pool = raw_pool(data)
    m = fit_model(2 * data[:, 0] + 1, pool, [1])
    assert m.complexity == pytest.approx(3 * np.log2(3))
    assert m.to_dict()["features"] == ["x1"]


def _wide_pool(seed):
    data = np.random.default_rng(seed).uniform(1, 5, (30, 10))
    ops = OperatorSet.default()
    return data, expand_level(initial_pool(data, list(range(10)), ops), ops)


def test_c2_sisso_default_count():
    data, pool = _wide_pool(0)
    y = np.random.default_rng(1).normal(size=30)
    res = c2_sisso(y, pool, pool.complexities.max())
    assert res.n_tested == 20 + 780 + 34220
    assert [len(s) for s in res.subspaces] == [20, 40, 60]
    assert set(res.subspaces[0]) <= set(res.subspaces[1]) <= set(res.subspaces[2])


def test_c2_sisso_early_stop():
    data, pool = _wide_pool(2)
    y = pool.columns[:, 5].copy()
    res = c2_sisso(y, pool, pool.complexities.max())
    assert len(res.scans) == 1 and res.n_tested == 20
    assert res.best[0].rmse < 1e-12 * np.linalg.norm(y)


def test_c2_sisso_lambda_restricts_to_bare_variables():
    data, pool = _wide_pool(3)
    y = np.random.default_rng(4).normal(size=30)
    res = c2_sisso(y, pool, 0.5, k=5)
    for sub in res.subspaces:
        assert all(pool.complexities[i] == 0 for i in sub)
    assert res.n_eligible == 10


def test_c2_sisso_no_eligible():
    pool = raw_pool(np.random.default_rng(0).normal(size=(10, 2)))
    with pytest.raises(SissoError):
        c2_sisso(np.ones(10), pool.subset([0]), 10.0)


def test_front_candidates_non_dominated():
    data, pool = _wide_pool(5)
    y = data[:, 0] ** 2 + np.random.default_rng(6).normal(size=30) * 0.1
    res = c2_sisso(y, pool, pool.complexities.max(), k=5)
    cands = res.front_candidates()
    r, c = res.scatter()
    for m in cands:
        assert not np.any((c <= m.complexity) & (r < m.rmse - 1e-12))
    cs = [m.complexity for m in cands]
    assert cs == sorted(cs)


@given(st.integers(0, 2**31))
@settings(max_examples=40)
def test_residual_monotone(seed):
    r = np.random.default_rng(seed)
    data = r.uniform(1, 5, (15, 4))
    ops = OperatorSet.default()
    pool = expand_level(initial_pool(data, [0, 1, 2, 3], ops), ops)
    y = r.normal(size=15)
    res = c2_sisso(y, pool, pool.complexities.max(), k=int(r.integers(1, 6)), T=3)
    rm = [m.rmse for m in res.best]
    assert all(b <= a + 1e-12 for a, b in zip(rm, rm[1:]))
    assert res.n_tested == sum(s.n_tested for s in res.scans)
