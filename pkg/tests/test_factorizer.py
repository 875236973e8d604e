import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dipaf.factorizer import (
    IncompleteTableError,
    JointQTable,
    UnitQ,
    exact_unit_q,
    factor_policy,
    factored_joint_policy,
    joint_policy,
    lb_unit_q,
    lower_bound_gaps,
    random_table,
    saturated_table,
    verify_lower_bound,
    verify_theorem1,
    verify_theorem1_random,
)

UNIFORM4 = np.log(np.full((2, 2), 0.25))


def brute_unit_q(table, d, prefix_idx):
    """Direct sum over completions, written independently of the library."""
    shape = table.q.shape
    out = []
    for a in range(shape[d - 1]):
        total = 0.0
        for ix in np.ndindex(*shape):
            if tuple(ix[: d - 1]) == tuple(prefix_idx) and ix[d - 1] == a:
                total += math.exp(table.q[ix] + table.beta * table.anchor_logprob[ix])
        out.append(math.log(total))
    return np.array(out)


@pytest.fixture
def two_by_two():
    return JointQTable.from_arrays([[1.0, 0.0], [0.0, 1.0]], UNIFORM4, 0.0, alphabets=[("a", "b"), ("x", "y")])


def test_single_unit_collapses():
    t = JointQTable.from_arrays([1.0, 0.0], np.log([0.5, 0.5]), 0.0, alphabets=[("x", "y")])
    assert exact_unit_q(t, 1).values.tolist() == [1.0, 0.0]
    assert verify_theorem1(t) <= 1e-15


def test_two_by_two_unit_values(two_by_two):
    q1 = exact_unit_q(two_by_two, 1)
    assert np.allclose(q1.values, [math.log(math.e + 1)] * 2)
    assert math.isclose(q1.values[0], 1.3133, abs_tol=5e-5)
    assert exact_unit_q(two_by_two, 2, ["a"]).as_dict() == {"x": 1.0, "y": 0.0}


def test_two_by_two_lower_bound(two_by_two):
    lb = lb_unit_q(1.0, math.log(0.25), 0.0, 2)
    gaps = lower_bound_gaps(two_by_two, (0, 0))
    assert lb[0] == 1.0 and lb[0] <= exact_unit_q(two_by_two, 1).values[0]
    assert gaps[-1] == 0.0  # d = D: the bound is exact
    assert math.isclose(gaps[0], math.log(math.e + 1) - 1)


def test_two_by_two_theorem1(two_by_two):
    assert verify_theorem1(two_by_two) <= 1e-12


def test_factor_policy_examples():
    assert factor_policy(UnitQ(1, (), ("x",), np.array([4.2]))).tolist() == [1.0]
    assert np.allclose(factor_policy(UnitQ(1, (), ("x", "y"), np.array([1.0, 0.0]))), [0.7311, 0.2689], atol=5e-5)


def test_matches_independent_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(30):
        depth = int(rng.integers(1, 4))
        t = random_table(rng, depth, rng.integers(2, 5, size=3).tolist(), float(rng.choice([0, 0.1, 1])))
        ix = tuple(int(rng.integers(n)) for n in t.q.shape)
        for d in range(1, depth + 1):
            prefix = [t.alphabets[k][ix[k]] for k in range(d - 1)]
            assert np.allclose(exact_unit_q(t, d, prefix).values, brute_unit_q(t, d, ix[: d - 1]), atol=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.sampled_from([0.0, 0.1, 1.0]))
def test_lower_bound_never_exceeds_exact(seed, depth, beta):
    rng = np.random.default_rng(seed)
    t = random_table(rng, depth, rng.integers(2, 5, size=3).tolist(), beta)
    ix = tuple(int(rng.integers(n)) for n in t.q.shape)
    assert lower_bound_gaps(t, ix).min() >= -1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.sampled_from([0.0, 0.1, 1.0]))
def test_theorem1_property(seed, depth, beta):
    rng = np.random.default_rng(seed)
    t = random_table(rng, depth, rng.integers(2, 5, size=3).tolist(), beta)
    p = factored_joint_policy(t)
    assert math.isclose(p.sum(), 1.0)
    assert np.max(np.abs(p - joint_policy(t))) <= 1e-9


def test_saturation_two_by_two_margin_twenty():
    rng = np.random.default_rng(0)
    for _ in range(50):
        t, top = saturated_table(rng, (2, 2), 0.0, 20.0)
        assert lower_bound_gaps(t, top).max() <= 1e-8


def test_saturation_gap_grows_with_rivals():
    # the gap is log(1 + sum of exp(-margin_k)); 63 rivals at margin 20 exceed 1e-8
    rng = np.random.default_rng(1)
    t, top = saturated_table(rng, (4, 4, 4), 0.0, 20.0)
    assert lower_bound_gaps(t, top).max() > 1e-8
    t, top = saturated_table(rng, (4, 4, 4), 0.0, 24.0)
    assert lower_bound_gaps(t, top).max() <= 1e-8


def test_incomplete_table():
    t = JointQTable.from_entries({("a", "x"): (1.0, -1.0), ("a", "y"): (0.0, -1.0), ("b", "x"): (0.0, -1.0)}, 0.1)
    assert exact_unit_q(t, 2, ["a"]).values.shape == (2,)
    with pytest.raises(IncompleteTableError):
        exact_unit_q(t, 1)
    with pytest.raises(IncompleteTableError):
        exact_unit_q(t, 2, ["b"])
    with pytest.raises(IncompleteTableError):
        joint_policy(t)


def test_bad_prefix_and_depth(two_by_two):
    with pytest.raises(ValueError):
        exact_unit_q(two_by_two, 2)
    with pytest.raises(ValueError):
        exact_unit_q(two_by_two, 3, ["a", "x"])


def test_batch_reports_small():
    assert verify_theorem1_random(50, seed=2).ok
    r = verify_lower_bound(200, 50, seed=2)
    assert r.ok and r.min_gap >= 0
