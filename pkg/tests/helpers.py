"""Random positions on the small maps, shared by several test modules."""

import random

from dipaf.board import ARMY, FLEET, province_of
from dipaf.state import SPRING_MOVE, GameState, Unit, phase_options


def random_state(spec, rng: random.Random, n_units: int, n_owners: int = 3, phase: str = SPRING_MOVE) -> GameState:
    slots = [(kind, node) for node in spec.nodes for kind in (ARMY, FLEET) if spec.can_occupy(kind, node)]
    rng.shuffle(slots)
    owners = spec.powers[:n_owners]
    used, units = set(), []
    for kind, node in slots:
        p = province_of(node)
        if p in used:
            continue
        used.add(p)
        units.append(Unit(kind, node, rng.choice(owners)))
        if len(units) == n_units:
            break
    owner = {c: rng.choice((None, *owners)) for c in spec.supply_centers}
    return GameState(spec, 1901, phase, tuple(units), owner)


def random_orders(state: GameState, rng: random.Random) -> dict:
    out = {}
    for pw in sorted({u.owner for u in state.units}):
        out[pw] = [rng.choice(v) for v in phase_options(state, pw).values()]
    return out
