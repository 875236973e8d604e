import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chisquare

from dipaf.anchor import HeuristicAnchor, UniformAnchor, estimate_utility
from dipaf.board import ARMY, load_map
from dipaf.search import (
    SearchConfig,
    draw_unit_choices,
    generate_candidates,
    kl_divergence,
    policy_from_q,
    restricted_anchor,
    run_pikl,
    unit_menus,
)
from dipaf.state import SPRING_MOVE, GameState, PhaseError, Unit, initial_state, legal_orders

FAST = dict(iterations=64, horizon=0, n_candidates=20)


def test_policy_uniform_anchor_cancels():
    for beta in (0.0, 0.1, 5.0):
        p = policy_from_q([1.0, 0.0], np.log([0.5, 0.5]), beta)
        assert np.allclose(p, [0.7311, 0.2689], atol=5e-5)


def test_policy_constant_q():
    p = policy_from_q([3.0, 3.0], np.log([0.9, 0.1]), 0.1)
    assert np.allclose(p, [0.5547, 0.4453], atol=5e-5)
    w = np.array([0.9 ** 0.1, 0.1 ** 0.1])
    assert np.allclose(p, w / w.sum())


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6), st.floats(-50, 50), st.floats(0, 3))
def test_policy_shift_invariant(q, c, beta):
    lt = np.log(np.linspace(1, 2, len(q)) / np.linspace(1, 2, len(q)).sum())
    a = policy_from_q(q, lt, beta)
    b = policy_from_q(np.array(q) + c, lt, beta)
    assert math.isclose(a.sum(), 1.0)
    assert np.allclose(a, b, atol=1e-9)


def test_policy_beta_zero_ignores_anchor():
    assert np.allclose(policy_from_q([0.2, 0.1], np.log([0.99, 0.01]), 0.0), policy_from_q([0.2, 0.1], [0, 0], 0))


def test_single_candidate_gets_probability_one():
    spec = load_map("mini3")
    s = initial_state(spec)
    cfg = SearchConfig(iterations=5, horizon=0, max_per_unit=1)
    r = run_pikl(s, cfg, HeuristicAnchor())
    for p, ps in r.powers.items():
        assert len(ps.candidates) == 1 and ps.policy.tolist() == [1.0]
        joints = {q: r[q].candidates[0] for q in r.powers}
        assert math.isclose(ps.mean_q[0], estimate_utility(s, joints, 1, 0).of(s, p))


def test_exhaustive_when_small():
    s = initial_state(load_map("mini3"))
    cands, menus = generate_candidates(s, "North", UniformAnchor(), SearchConfig(n_candidates=50))
    n = math.prod(len(m.orders) for m in menus)
    assert len(cands) == n == len(legal_orders(s, "North")[s.units_of("North")[0]])
    assert len({c.key() for c in cands}) == n


def test_england_opening_candidates(opening):
    anchor = HeuristicAnchor()
    cands, menus = generate_candidates(opening, "England", anchor, SearchConfig())
    assert 1 < len(cands) <= 50
    assert len({c.key() for c in cands}) == len(cands)
    pol = anchor.unit_policies(opening, "England")
    for c in cands:
        for o in c.orders:
            unit = next(u for u in pol if u.location == o.loc)
            orders, probs = pol[unit]
            better = int((probs > probs[orders.index(o)]).sum())
            assert better < 6  # within the top six, ties allowed


def test_uniform_exploration_draws():
    s = initial_state(load_map("standard"))
    menus = unit_menus(s, "Russia", HeuristicAnchor(), 6)
    rng = np.random.default_rng(0)
    draws = np.array([draw_unit_choices(menus, 1.0, rng) for _ in range(10_000)])
    for d, m in enumerate(menus):
        counts = np.bincount(draws[:, d], minlength=len(m.orders))
        assert chisquare(counts).pvalue > 1e-3


def test_search_reproducible(opening):
    cfg = SearchConfig(seed=4, **FAST)
    a = run_pikl(opening, cfg, HeuristicAnchor(), ["France", "Germany"])
    b = run_pikl(opening, cfg, HeuristicAnchor(), ["France", "Germany"])
    for p in a.powers:
        assert a[p].policy.tobytes() == b[p].policy.tobytes()
        assert [c.key() for c in a[p].candidates] == [c.key() for c in b[p].candidates]


def test_policy_invariants_and_trace(opening):
    r = run_pikl(opening, SearchConfig(trace=True, iterations=8, horizon=0, n_candidates=10), HeuristicAnchor(),
                 ["Italy"])
    ps = r["Italy"]
    assert math.isclose(ps.policy.sum(), 1.0) and math.isclose(ps.avg_policy.sum(), 1.0)
    assert len(r.trace) == 8 * len(ps.candidates)
    assert r.trace[-1]["iteration"] == 8


def _kl_by_beta(state, betas, power):
    out = []
    for b in betas:
        ps = run_pikl(state, SearchConfig(beta=b, seed=1, **FAST), HeuristicAnchor(), [power])[power]
        out.append(kl_divergence(ps.policy, restricted_anchor(ps)))
    return out


def test_kl_to_anchor_falls_as_beta_rises_to_one(opening):
    for power in ("England", "France"):
        kl = _kl_by_beta(opening, (0.0, 0.1, 1.0), power)
        assert kl[0] >= kl[1] >= kl[2] - 1e-12, kl


def test_large_beta_sharpens_past_the_anchor(opening):
    # pi ~ tau^beta * exp(Q): beyond beta = 1 the policy overshoots towards the anchor's mode,
    # so the divergence from tau grows again rather than continuing to fall
    kl1, kl10 = _kl_by_beta(opening, (1.0, 10.0), "England")
    ps = run_pikl(opening, SearchConfig(beta=10.0, seed=1, **FAST), HeuristicAnchor(), ["England"])["England"]
    assert kl10 > kl1
    assert int(np.argmax(ps.policy)) == int(np.argmax(ps.anchor_logprob))


def test_mini5_standoff_mixes_evenly():
    s = initial_state(load_map("mini5"))
    r = run_pikl(s, SearchConfig(iterations=256, horizon=0, beta=0.1), UniformAnchor())
    for p, ps in r.powers.items():
        towers = [k for k, c in enumerate(ps.candidates) if c.orders[0].type == "move"]
        assert len(towers) == 2
        split = ps.policy[towers] / ps.policy[towers].sum()
        assert abs(split[0] - 0.5) <= 0.05, (p, split)


def test_requires_move_phase(opening):
    with pytest.raises(PhaseError):
        run_pikl(opening.replace(phase="winter_adjust"), SearchConfig(**FAST), UniformAnchor())


@pytest.mark.parametrize("bad", [dict(iterations=0), dict(beta=-1), dict(nash_explore=2), dict(rollouts=0)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        SearchConfig(**bad)


def test_config_unknown_key():
    with pytest.raises(ValueError, match="unknown"):
        SearchConfig.from_mapping({"iters": 3})


@pytest.mark.parametrize("map_name", ["mini3", "mini5"])
@pytest.mark.parametrize("anchor", [UniformAnchor(), HeuristicAnchor()], ids=["uniform", "heuristic"])
@pytest.mark.parametrize("beta", [0.1, 1.0])
def test_two_power_search_is_near_equilibrium(map_name, anchor, beta):
    from dipaf.anchor import fast_projected_counts, terminal_scores
    from dipaf.lab import MatrixGame, delta_bound, exploitability

    s = initial_state(load_map(map_name))
    r = run_pikl(s, SearchConfig(iterations=256, horizon=0, beta=beta, utility_scale=100.0), anchor)
    p1, p2 = s.map.powers
    a, b = r[p1], r[p2]
    # two-power SoS sums to one, so centring on 1/2 gives a zero-sum matrix
    m = np.array([[terminal_scores(s, fast_projected_counts(s, {p1: x, p2: y}))[0] - 0.5 for y in b.candidates]
                  for x in a.candidates])
    taus = (restricted_anchor(a), restricted_anchor(b))
    game = MatrixGame(((len(taus[0]),), (len(taus[1]),)), m, taus)
    bound = beta * max(delta_bound(t) for t in taus) + 0.05
    assert max(exploitability(game, a.avg_policy, b.avg_policy)) <= bound
