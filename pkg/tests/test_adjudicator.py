import random

import pytest

from dipaf.adjudicator import (
    adjudicate_builds,
    adjudicate_moves,
    adjudicate_retreats,
    coerce_move_orders,
    disband_priority,
    resolve_moves,
    step,
)
from dipaf.board import ARMY, load_map
from dipaf.cases import bundled_cases, run_case
from dipaf.oracle import brute_force_moves
from dipaf.orders import Order, parse_short
from dipaf.state import (
    FALL_MOVE,
    FALL_RETREAT,
    SPRING_MOVE,
    WINTER_ADJUST,
    Dislodged,
    GameState,
    Unit,
    initial_state,
)

from helpers import random_orders, random_state

MINIS = [load_map(n) for n in ("mini3", "mini5", "ring7")]
CASES = bundled_cases()


@pytest.mark.parametrize("case", CASES, ids=[c["name"] for c in CASES])
def test_bundled_case(case):
    checks = run_case(case)
    assert checks
    bad = [f"step {c.step}: {c.what} ({c.detail})" for c in checks if not c.ok]
    assert not bad, bad


def test_curated_suite_has_required_cases():
    names = {c["name"] for c in CASES}
    for required in ("bounce", "cut_support", "self_dislodgement_ban", "retreat_conflict", "auto_disband",
                     "beleaguered_garrison"):
        assert required in names


def _orders(spec, table):
    return {pw: [parse_short(t, spec) for t in texts] for pw, texts in table.items()}


def _state(spec, placement, phase=SPRING_MOVE):
    units = tuple(Unit(ARMY if t[0] == "A" else "fleet", t[2:], pw) for pw, ts in placement.items() for t in ts)
    return GameState(spec, 1901, phase, units, dict(spec.start_sc_owner))


def test_simple_bounce(standard):
    s = _state(standard, {"France": ["A PAR"], "Germany": ["A MUN"]})
    res = adjudicate_moves(s, _orders(standard, {"France": ["A PAR - BUR"], "Germany": ["A MUN - BUR"]}))
    assert not any(res.succeeded.values())
    assert res.new_state.unit_at("BUR") is None
    assert "BUR" in res.bounces


def test_cut_support(standard):
    s = _state(standard, {"France": ["A PAR", "A MAR"], "Germany": ["A MUN"], "Italy": ["A PIE"]})
    res = adjudicate_moves(s, _orders(standard, {
        "France": ["A PAR - BUR", "A MAR S A PAR - BUR"],
        "Germany": ["A MUN - BUR"],
        "Italy": ["A PIE - MAR"],
    }))
    assert res.succeeded[(ARMY, "PAR")] is False
    assert res.new_state.unit_at("BUR") is None


def test_unopposed_move(standard):
    s = initial_state(standard)
    res = adjudicate_moves(s, _orders(standard, {"France": ["A PAR - BUR"]}))
    assert res.succeeded[(ARMY, "PAR")]
    assert res.new_state.unit_at("BUR").owner == "France"
    assert res.new_state.phase == FALL_MOVE


def test_retreats():
    spec = load_map("ring7")
    a = Unit(ARMY, "MAB", "Amber")
    b = Unit(ARMY, "MBC", "Blue")
    s = GameState(spec, 1901, FALL_RETREAT, (), {c: None for c in spec.supply_centers},
                  (Dislodged(a, "AMB", ("CIT",)), Dislodged(b, "CRI", ("CIT", "BLU"))))
    both = adjudicate_retreats(s, {"Amber": [Order.retreat(ARMY, "MAB", "CIT")],
                                   "Blue": [Order.retreat(ARMY, "MBC", "CIT")]})
    assert both.units == ()
    one = adjudicate_retreats(s, {"Blue": [Order.retreat(ARMY, "MBC", "BLU")]})
    assert [u.location for u in one.units] == ["BLU"]  # Amber gave no order and is disbanded
    assert one.phase == WINTER_ADJUST


def test_build_and_waive(standard):
    owners = dict(standard.start_sc_owner)
    owners["DEN"] = "Germany"
    s = GameState(standard, 1901, WINTER_ADJUST,
                  (Unit(ARMY, "DEN", "Germany"), Unit(ARMY, "MUN", "Germany"), Unit("fleet", "KIE", "Germany")),
                  owners)
    built = adjudicate_builds(s, {"Germany": [Order.build(ARMY, "BER")]})
    assert built.unit_at("BER") is not None and built.phase == SPRING_MOVE and built.year == 1902
    waived = adjudicate_builds(s, {"Germany": [Order.waive()]})
    assert waived.unit_at("BER") is None


def test_auto_disband_picks_farthest(standard):
    owners = dict(standard.start_sc_owner)
    owners["MUN"] = None
    s = GameState(standard, 1901, WINTER_ADJUST,
                  (Unit(ARMY, "BER", "Germany"), Unit(ARMY, "UKR", "Germany"), Unit("fleet", "KIE", "Germany")),
                  owners)
    assert disband_priority(s, "Germany")[0].location == "UKR"
    after = adjudicate_builds(s, {})
    assert after.unit_at("UKR") is None and len(after.units_of("Germany")) == 2


def test_phase_cycle(standard):
    s = initial_state(standard)
    s = step(s, {})
    assert s.phase == FALL_MOVE
    s = step(s, {"France": [parse_short("A PAR - BUR", standard)]})
    assert s.phase == WINTER_ADJUST
    assert s.sc_owner.get("BUR") is None  # not a centre
    s = step(s, {})
    assert (s.year, s.phase) == (1902, SPRING_MOVE)


def test_invalid_orders_become_holds(standard):
    s = initial_state(standard)
    eff, coerced = coerce_move_orders(s, {"France": [parse_short("A PAR - LON", standard),
                                                     parse_short("A PAR - BUR", standard)]})
    assert eff["PAR"].dest == "BUR"  # the illegal order is dropped, the legal one stands
    assert len(coerced) == 1
    eff, coerced = coerce_move_orders(s, {"France": [parse_short("A PAR - LON", standard)]})
    assert eff["PAR"].type == "hold" and coerced[0].power == "France"
    eff, coerced = coerce_move_orders(s, {"France": [parse_short("A PAR - PIC", standard),
                                                     parse_short("A PAR - BUR", standard)]})
    assert eff["PAR"].dest == "PIC" and "second order" in coerced[0].reason


# ------------------------------------------------------------------ properties

def _random_case(rng):
    spec = MINIS[rng.randrange(3)]
    state = random_state(spec, rng, rng.randint(1, 4))
    return state, random_orders(state, rng)


@pytest.mark.parametrize("block", range(4))
def test_oracle_agreement(block):
    rng = random.Random(block)
    for _ in range(500):
        state, orders = _random_case(rng)
        eff, _ = coerce_move_orders(state, orders)
        assert resolve_moves(state, eff)[0] == brute_force_moves(state, eff)


@pytest.mark.parametrize("block", range(4))
def test_move_invariants(block):
    rng = random.Random(100 + block)
    for _ in range(500):
        state, orders = _random_case(rng)
        res = adjudicate_moves(state, orders)
        after = res.new_state
        n_dis = len(after.dislodged)
        assert len(after.units) + n_dis == len(state.units)
        provs = [u.province for u in after.units]
        assert len(provs) == len(set(provs))
        shuffled = dict(reversed(list(orders.items())))
        again = adjudicate_moves(state, shuffled)
        assert again.new_state == after and again.succeeded == res.succeeded
        for d in after.dislodged:
            assert d.unit.province in provs  # the attacker now stands there
            assert all(r not in provs for r in d.retreats)
