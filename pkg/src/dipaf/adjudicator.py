"""Simultaneous order resolution for move, retreat and adjustment phases.

Moves are resolved with the guess-and-backup scheme familiar from DATC
adjudicators: each move's success is a decision that may depend on other
moves, cycles are detected through guesses, and a cycle with two consistent
outcomes (circular movement) resolves as all-succeed.  Convoys are not
modelled.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

from .board import province_of
from .orders import (
    BUILD,
    DISBAND,
    HOLD,
    MOVE,
    RETREAT,
    SUPPORT_HOLD,
    SUPPORT_MOVE,
    WAIVE,
    JointAction,
    Order,
    render_short,
)
from .state import (
    FALL_MOVE,
    FALL_RETREAT,
    MOVE_PHASES,
    RETREAT_PHASES,
    SPRING_MOVE,
    SPRING_RETREAT,
    WINTER_ADJUST,
    Dislodged,
    GameState,
    PhaseError,
    Unit,
    adjustment_delta,
    validate_order,
)

log = logging.getLogger(__name__)

Orders = Mapping[str, "JointAction | list[Order] | tuple[Order, ...]"]


@dataclass(frozen=True)
class Coercion:
    power: str
    submitted: Order
    reason: str

    def __str__(self):
        return f"{self.power}: {render_short(self.submitted)} ({self.reason})"


@dataclass(frozen=True)
class Resolution:
    succeeded: dict[tuple[str, str], bool]
    dislodgements: tuple[tuple[Unit, str], ...]
    new_state: GameState
    coercions: tuple[Coercion, ...] = ()
    bounces: frozenset[str] = field(default_factory=frozenset)


def _orders_of(value) -> tuple[Order, ...]:
    if isinstance(value, JointAction):
        return value.orders
    return tuple(value)


def coerce_move_orders(state: GameState, orders: Orders) -> tuple[dict[str, Order], list[Coercion]]:
    """Province -> effective order for every unit; anything illegal becomes Hold."""
    effective: dict[str, Order] = {}
    coercions: list[Coercion] = []
    for power in sorted(orders):
        for order in _orders_of(orders[power]):
            verdict = validate_order(order, state, power)
            if not verdict:
                coercions.append(Coercion(power, order, verdict.reason))
                continue
            prov = province_of(order.loc)
            if prov in effective:
                coercions.append(Coercion(power, order, "second order for the same unit"))
                continue
            effective[prov] = order
    for unit in state.units:
        effective.setdefault(unit.province, Order.hold(unit.kind, unit.location))
    for c in coercions:
        log.info("coerced to hold: %s", c)
    return effective, coercions


_UNRESOLVED, _GUESSING, _RESOLVED = 0, 1, 2


class _MoveResolver:
    """Decides which moves succeed.  One instance per move phase."""

    def __init__(self, state: GameState, orders: dict[str, Order]):
        self.owner = {u.province: u.owner for u in state.units}
        self.orders = orders
        self.moves = {p: province_of(o.dest) for p, o in orders.items() if o.type == MOVE}
        self.attackers: dict[str, list[str]] = {}
        for p, q in self.moves.items():
            self.attackers.setdefault(q, []).append(p)
        self.supports: dict[str, list[str]] = {}
        for p, o in orders.items():
            if o.type in (SUPPORT_HOLD, SUPPORT_MOVE) and self._support_matches(o):
                self.supports.setdefault(o.target, []).append(p)
        self.state = {p: _UNRESOLVED for p in self.moves}
        self.result = {p: False for p in self.moves}
        self.deps: list[str] = []

    def _support_matches(self, o: Order) -> bool:
        target = self.orders.get(o.target)
        if target is None:
            return False
        if o.type == SUPPORT_HOLD:
            return target.type != MOVE
        return target.type == MOVE and province_of(target.dest) == o.dest

    # -- strengths
    def _head_to_head(self, p: str) -> str | None:
        q = self.moves[p]
        return q if self.moves.get(q) == p else None

    def support_cut(self, s: str) -> bool:
        o = self.orders[s]
        for a in self.attackers.get(s, ()):
            if self.owner[a] == self.owner[s]:
                continue
            if o.type == SUPPORT_MOVE and a == o.dest:
                # attacked from the province it supports into: cut only if dislodged
                if self.resolve(a):
                    return True
                continue
            return True
        return False

    def _support_count(self, p: str, exclude_power: str | None = None) -> int:
        n = 0
        for s in self.supports.get(p, ()):
            if exclude_power is not None and self.owner[s] == exclude_power:
                continue
            if not self.support_cut(s):
                n += 1
        return n

    def _supports_for_move(self, p: str, exclude_power: str | None = None) -> int:
        q = self.moves[p]
        n = 0
        for s in self.supports.get(p, ()):
            if self.orders[s].dest != q:
                continue
            if exclude_power is not None and self.owner[s] == exclude_power:
                continue
            if not self.support_cut(s):
                n += 1
        return n

    def attack_strength(self, p: str) -> int:
        q = self.moves[p]
        defender = q if q in self.owner else None
        if defender is not None and defender in self.moves and not self._head_to_head(p):
            if self.resolve(defender):
                defender = None
        if defender is None:
            return 1 + self._supports_for_move(p)
        if self.owner[defender] == self.owner[p]:
            return 0
        return 1 + self._supports_for_move(p, exclude_power=self.owner[defender])

    def hold_strength(self, q: str) -> int:
        if q not in self.owner:
            return 0
        if q in self.moves:
            return 0 if self.resolve(q) else 1
        return 1 + self._support_count(q)

    def defend_strength(self, p: str) -> int:
        return 1 + self._supports_for_move(p)

    def prevent_strength(self, p: str) -> int:
        h = self._head_to_head(p)
        if h is not None and self.resolve(h):
            return 0
        return 1 + self._supports_for_move(p)

    def adjudicate(self, p: str) -> bool:
        q = self.moves[p]
        attack = self.attack_strength(p)
        h = self._head_to_head(p)
        if h is not None:
            if attack <= self.defend_strength(h):
                return False
        elif attack <= self.hold_strength(q):
            return False
        for other in self.attackers[q]:
            if other != p and attack <= self.prevent_strength(other):
                return False
        return True

    # -- guess / backup
    def resolve(self, p: str) -> bool:
        st = self.state[p]
        if st == _RESOLVED:
            return self.result[p]
        if st == _GUESSING:
            if p not in self.deps:
                self.deps.append(p)
            return self.result[p]
        mark = len(self.deps)
        self.result[p] = False
        self.state[p] = _GUESSING
        first = self.adjudicate(p)
        if len(self.deps) == mark:
            if self.state[p] != _RESOLVED:
                self.result[p] = first
                self.state[p] = _RESOLVED
            return first
        if self.deps[mark] != p:
            self.deps.append(p)
            self.result[p] = first
            return first
        self._reset(mark)
        self.result[p] = True
        self.state[p] = _GUESSING
        second = self.adjudicate(p)
        if first == second:
            self._reset(mark)
            self.result[p] = first
            self.state[p] = _RESOLVED
            return first
        cycle = self.deps[mark:]
        del self.deps[mark:]
        # both guesses self-consistent: circular movement, everyone moves.
        # neither consistent cannot arise without convoys; fall back to holding.
        outcome = second and not first
        for o in cycle:
            self.result[o] = outcome
            self.state[o] = _RESOLVED
        return self.resolve(p)

    def _reset(self, mark: int) -> None:
        for o in self.deps[mark:]:
            self.state[o] = _UNRESOLVED
        del self.deps[mark:]

    def run(self) -> dict[str, bool]:
        for p in sorted(self.moves):
            self.resolve(p)
        return {p: self.result[p] for p in sorted(self.moves)}


def resolve_moves(state: GameState, effective: dict[str, Order]) -> tuple[dict[str, bool], dict[str, bool]]:
    """Return (move success by origin province, support cut by supporter)."""
    r = _MoveResolver(state, effective)
    moved = r.run()
    cut = {p: r.support_cut(p) for p, o in effective.items() if o.type in (SUPPORT_HOLD, SUPPORT_MOVE)}
    return moved, cut


def retreat_options(state: GameState, unit: Unit, attacker_origin: str | None, occupied: set[str],
                    bounces: set[str]) -> tuple[str, ...]:
    spec = state.map
    out = []
    for n in spec.adjacent(unit.kind, unit.location):
        q = province_of(n)
        if q in occupied or q == attacker_origin or q in bounces:
            continue
        out.append(n)
    return tuple(sorted(out))


def adjudicate_moves(state: GameState, orders: Orders) -> Resolution:
    if state.phase not in MOVE_PHASES:
        raise PhaseError(f"adjudicate_moves needs a move phase, got {state.phase}")
    effective, coercions = coerce_move_orders(state, orders)
    moved, cut = resolve_moves(state, effective)

    arrivals = {province_of(effective[p].dest): p for p, ok in moved.items() if ok}
    contested = {province_of(effective[p].dest) for p in moved}
    bounces = contested - set(arrivals)

    survivors: list[Unit] = []
    dislodged: list[tuple[Unit, str]] = []
    for unit in state.units:
        p = unit.province
        if moved.get(p):
            survivors.append(Unit(unit.kind, effective[p].dest, unit.owner))
        elif p in arrivals:
            dislodged.append((unit, arrivals[p]))
        else:
            survivors.append(unit)
    occupied = {u.province for u in survivors}
    pending = tuple(
        Dislodged(u, origin, retreat_options(state, u, origin, occupied, bounces)) for u, origin in dislodged
    )

    succeeded: dict[tuple[str, str], bool] = {}
    for p, o in effective.items():
        if o.type == MOVE:
            succeeded[o.actor] = moved[p]
        elif o.type in (SUPPORT_HOLD, SUPPORT_MOVE):
            succeeded[o.actor] = not cut[p] and p not in arrivals
        else:
            succeeded[o.actor] = p not in arrivals

    last = {pw: tuple(o for o in effective.values() if _owner_of(state, o) == pw) for pw in state.map.powers}
    last = {pw: tuple(sorted(v, key=lambda o: (province_of(o.loc), o.loc))) for pw, v in last.items() if v}
    retreat_phase = SPRING_RETREAT if state.phase == SPRING_MOVE else FALL_RETREAT
    interim = state.replace(units=tuple(survivors), phase=retreat_phase, dislodged=pending, last_orders=last)
    new_state = _advance_after_moves(interim) if not pending else interim
    return Resolution(succeeded, tuple(dislodged), new_state, tuple(coercions), frozenset(bounces))


def _owner_of(state: GameState, order: Order) -> str:
    return state.unit_at(order.loc).owner


def _update_ownership(state: GameState) -> dict[str, str | None]:
    owners = dict(state.sc_owner)
    for u in state.units:
        if u.province in owners:
            owners[u.province] = u.owner
    return owners


def _advance_after_moves(state: GameState) -> GameState:
    """Leave a (possibly empty) retreat phase."""
    if state.phase == SPRING_RETREAT:
        return state.replace(phase=FALL_MOVE, dislodged=())
    return state.replace(phase=WINTER_ADJUST, dislodged=(), sc_owner=_update_ownership(state))


def adjudicate_retreats(state: GameState, retreats: Orders) -> GameState:
    if state.phase not in RETREAT_PHASES:
        raise PhaseError(f"adjudicate_retreats needs a retreat phase, got {state.phase}")
    chosen: dict[str, Order] = {}
    for power in sorted(retreats):
        for order in _orders_of(retreats[power]):
            if not validate_order(order, state, power):
                log.info("ignored retreat order %s for %s", render_short(order), power)
                continue
            chosen.setdefault(order.loc, order)
    wanted: dict[str, list[Dislodged]] = {}
    for d in state.dislodged:
        o = chosen.get(d.unit.location)
        if o is not None and o.type == RETREAT:
            wanted.setdefault(province_of(o.dest), []).append(d)
    units = list(state.units)
    for dest, ds in wanted.items():
        if len(ds) == 1:
            d = ds[0]
            units.append(Unit(d.unit.kind, chosen[d.unit.location].dest, d.unit.owner))
    return _advance_after_moves(state.replace(units=tuple(units), dislodged=()))


def disband_priority(state: GameState, power: str) -> list[Unit]:
    """Units in the order they would be removed under civil disorder."""
    spec = state.map
    homes = [h for h in spec.homes.get(power, ()) if state.sc_owner.get(h) == power] or list(spec.homes.get(power, ()))
    dist = spec.province_distance

    def distance(u: Unit) -> int:
        if not homes:
            return 0
        return min(dist[u.province].get(h, 1 << 20) for h in homes)

    units = list(state.units_of(power))
    # stable sort keeps canonical order among equal distances
    return sorted(units, key=lambda u: -distance(u))


def adjudicate_builds(state: GameState, builds: Orders) -> GameState:
    return resolve_builds(state, builds)[0]


def resolve_builds(state: GameState, builds: Orders) -> tuple[GameState, list[Coercion]]:
    """Apply winter adjustments; also report what was waived or ignored."""
    if state.phase != WINTER_ADJUST:
        raise PhaseError(f"adjudicate_builds needs winter_adjust, got {state.phase}")
    units = list(state.units)
    coercions: list[Coercion] = []
    for power in state.map.powers:
        submitted = list(_orders_of(builds.get(power, ())))
        delta = adjustment_delta(state, power)
        if delta > 0:
            used: set[str] = set()
            made = 0
            for o in submitted:
                if o.type == WAIVE:
                    made += 1 if made < delta else 0
                    continue
                ok = o.type == BUILD and validate_order(o, state, power) and province_of(o.loc) not in used
                if not ok or made >= delta:
                    coercions.append(Coercion(power, o, "illegal or surplus build, waived"))
                    continue
                used.add(province_of(o.loc))
                units.append(Unit(o.unit, o.loc, power))
                made += 1
        elif delta < 0:
            owed = -delta
            gone: set[str] = set()
            for o in submitted:
                if len(gone) >= owed:
                    break
                if o.type == DISBAND and validate_order(o, state, power) and o.loc not in gone:
                    gone.add(o.loc)
                else:
                    coercions.append(Coercion(power, o, "illegal disband ignored"))
            for u in disband_priority(state, power):
                if len(gone) >= owed:
                    break
                if u.location not in gone:
                    gone.add(u.location)
            units = [u for u in units if not (u.owner == power and u.location in gone)]
        else:
            for o in submitted:
                if o.type != WAIVE:
                    coercions.append(Coercion(power, o, "no adjustment owed"))
    for c in coercions:
        log.info("adjustment coerced: %s", c)
    new = state.replace(units=tuple(units), phase=SPRING_MOVE, year=state.year + 1)
    return new, coercions


def step(state: GameState, orders: Orders) -> GameState:
    """Resolve whichever phase ``state`` is in and return the next state."""
    if state.phase in MOVE_PHASES:
        return adjudicate_moves(state, orders).new_state
    if state.phase in RETREAT_PHASES:
        return adjudicate_retreats(state, orders)
    return adjudicate_builds(state, orders)
