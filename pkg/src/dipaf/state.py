"""Game state, legality, and (de)serialization."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .board import ARMY, FLEET, KIND_LETTER, LETTER_KIND, MapSpec, load_map, province_of
from .orders import (
    BUILD,
    DISBAND,
    HOLD,
    MOVE,
    MOVE_PHASE_TYPES,
    RETREAT,
    SUPPORT_HOLD,
    SUPPORT_MOVE,
    WAIVE,
    Order,
    parse_short,
    render_short,
)

SPRING_MOVE = "spring_move"
SPRING_RETREAT = "spring_retreat"
FALL_MOVE = "fall_move"
FALL_RETREAT = "fall_retreat"
WINTER_ADJUST = "winter_adjust"
PHASES = (SPRING_MOVE, SPRING_RETREAT, FALL_MOVE, FALL_RETREAT, WINTER_ADJUST)
MOVE_PHASES = (SPRING_MOVE, FALL_MOVE)
RETREAT_PHASES = (SPRING_RETREAT, FALL_RETREAT)


class PhaseError(ValueError):
    pass


class StateError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Unit:
    kind: str
    location: str
    owner: str

    @property
    def province(self) -> str:
        return province_of(self.location)

    def __str__(self):
        return f"{self.owner} {KIND_LETTER[self.kind]} {self.location}"


@dataclass(frozen=True)
class Dislodged:
    unit: Unit
    attacker_origin: str | None
    retreats: tuple[str, ...]


def _unit_key(u: Unit):
    return (u.province, u.location, u.kind, u.owner)


@dataclass(frozen=True, eq=False)
class GameState:
    map: MapSpec
    year: int
    phase: str
    units: tuple[Unit, ...]
    sc_owner: dict[str, str | None]
    dislodged: tuple[Dislodged, ...] = ()
    last_orders: dict[str, tuple[Order, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.phase not in PHASES:
            raise StateError(f"unknown phase {self.phase!r}")
        object.__setattr__(self, "units", tuple(sorted(self.units, key=_unit_key)))
        object.__setattr__(
            self, "dislodged", tuple(sorted(self.dislodged, key=lambda d: _unit_key(d.unit)))
        )
        seen = set()
        for u in self.units:
            if u.province in seen:
                raise StateError(f"two units in {u.province}")
            if not self.map.can_occupy(u.kind, u.location):
                raise StateError(f"{u.kind} cannot stand in {u.location}")
            seen.add(u.province)
        if self.dislodged and self.phase not in RETREAT_PHASES:
            raise StateError("dislodged units outside a retreat phase")

    # -- queries
    @property
    def season(self) -> str:
        return self.phase.split("_")[0]

    @property
    def is_move_phase(self) -> bool:
        return self.phase in MOVE_PHASES

    @cached_property
    def occupant(self) -> dict[str, Unit]:
        return {u.province: u for u in self.units}

    def unit_at(self, province: str) -> Unit | None:
        return self.occupant.get(province_of(province))

    def units_of(self, power: str) -> tuple[Unit, ...]:
        return tuple(u for u in self.units if u.owner == power)

    def centers_of(self, power: str) -> tuple[str, ...]:
        return tuple(sorted(p for p, o in self.sc_owner.items() if o == power))

    def sc_counts(self) -> list[int]:
        return [len(self.centers_of(p)) for p in self.map.powers]

    def winner(self) -> str | None:
        need = self.map.win_threshold
        for p, c in zip(self.map.powers, self.sc_counts()):
            if c >= need:
                return p
        return None

    def alive(self) -> tuple[str, ...]:
        return tuple(p for p in self.map.powers if self.units_of(p) or self.centers_of(p))

    def replace(self, **changes) -> "GameState":
        data = dict(
            map=self.map, year=self.year, phase=self.phase, units=self.units,
            sc_owner=self.sc_owner, dislodged=self.dislodged, last_orders=self.last_orders,
        )
        data.update(changes)
        return GameState(**data)

    # -- serialization
    def to_dict(self) -> dict:
        return {
            "map": self.map.name,
            "year": self.year,
            "phase": self.phase,
            "units": [[u.owner, KIND_LETTER[u.kind], u.location] for u in self.units],
            "sc_owner": {k: self.sc_owner[k] for k in sorted(self.sc_owner)},
            "dislodged": [
                [d.unit.owner, KIND_LETTER[d.unit.kind], d.unit.location, d.attacker_origin, list(d.retreats)]
                for d in self.dislodged
            ],
            "last_orders": {
                p: [render_short(o) for o in self.last_orders[p]] for p in sorted(self.last_orders)
            },
        }

    @cached_property
    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    @cached_property
    def state_hash(self) -> str:
        """64-bit BLAKE2b digest of the canonical JSON, as 16 hex digits."""
        return hashlib.blake2b(self.canonical_json.encode("utf-8"), digest_size=8).hexdigest()

    def __eq__(self, other):
        return isinstance(other, GameState) and self.canonical_json == other.canonical_json

    def __hash__(self):
        return hash(self.canonical_json)

    def __repr__(self):
        return f"GameState({self.map.name} {self.year} {self.phase}, {len(self.units)} units)"


def state_from_dict(data: dict, spec: MapSpec | None = None) -> GameState:
    spec = spec or load_map(data["map"])
    units = tuple(Unit(LETTER_KIND[k], loc, owner) for owner, k, loc in data["units"])
    dislodged = tuple(
        Dislodged(Unit(LETTER_KIND[k], loc, owner), origin, tuple(retreats))
        for owner, k, loc, origin, retreats in data.get("dislodged", [])
    )
    sc_owner = {p: None for p in spec.supply_centers}
    sc_owner.update(data.get("sc_owner", {}))
    last = {p: tuple(parse_short(t, spec) for t in texts) for p, texts in data.get("last_orders", {}).items()}
    return GameState(spec, int(data["year"]), data["phase"], units, sc_owner, dislodged, last)


def load_state(path: str | Path, spec: MapSpec | None = None) -> GameState:
    return state_from_dict(json.loads(Path(path).read_text(encoding="utf-8")), spec)


def initial_state(spec: MapSpec) -> GameState:
    units = [Unit(LETTER_KIND.get(k, k), loc, power) for power, starts in spec.start_units.items() for k, loc in starts]
    return GameState(spec, spec.start_year, SPRING_MOVE, tuple(units), dict(spec.start_sc_owner))


# ----------------------------------------------------------------- legality

def _move_orders(state: GameState, unit: Unit) -> list[Order]:
    spec = state.map
    here = unit.province
    out = [Order.hold(unit.kind, unit.location)]
    out.extend(Order.move(unit.kind, unit.location, n) for n in spec.adjacent(unit.kind, unit.location))
    reach = spec.reachable_provinces(unit.kind, unit.location)
    for other in state.units:
        if other.province == here:
            continue
        if other.province in reach:
            out.append(Order.support_hold(unit.kind, unit.location, other.kind, other.province))
        dests = {province_of(n) for n in spec.adjacent(other.kind, other.location)}
        for q in sorted(dests & reach):
            if q != here:
                out.append(Order.support_move(unit.kind, unit.location, other.kind, other.province, q))
    return out


def buildable_sites(state: GameState, power: str) -> list[tuple[str, str]]:
    """(kind, node) pairs where ``power`` could build this winter."""
    spec = state.map
    out = []
    for home in spec.homes.get(power, ()):
        if state.sc_owner.get(home) != power or home in state.occupant:
            continue
        if spec.can_occupy(ARMY, home):
            out.append((ARMY, home))
        out.extend((FLEET, n) for n in spec.fleet_nodes(home))
    return out


def adjustment_delta(state: GameState, power: str) -> int:
    """Positive: builds allowed; negative: disbands owed."""
    return len(state.centers_of(power)) - len(state.units_of(power))


def _legal_cache(state: GameState) -> dict:
    cache = state.__dict__.get("_legal")
    if cache is None:
        cache = {}
        object.__setattr__(state, "_legal", cache)
    return cache


def legal_orders(state: GameState, power: str) -> dict[Unit, list[Order]]:
    """Hold, moves and supports for each of ``power``'s units, sorted by
    short text."""
    require_move_phase(state)
    return phase_options(state, power)


def phase_options(state: GameState, power: str) -> dict[Unit | None, list[Order]]:
    """Legal orders for any phase.  The winter build menu is keyed ``None``."""
    cache = _legal_cache(state)
    if power in cache:
        return cache[power]
    if state.phase in MOVE_PHASES:
        result = {u: _move_orders(state, u) for u in state.units_of(power)}
    elif state.phase in RETREAT_PHASES:
        result = {
            d.unit: [Order.disband(d.unit.kind, d.unit.location)]
            + [Order.retreat(d.unit.kind, d.unit.location, n) for n in d.retreats]
            for d in state.dislodged
            if d.unit.owner == power
        }
    else:
        delta = adjustment_delta(state, power)
        result = {}
        if delta > 0:
            result[None] = [Order.waive()] + [Order.build(k, n) for k, n in buildable_sites(state, power)]
        elif delta < 0:
            result = {u: [Order.disband(u.kind, u.location)] for u in state.units_of(power)}
    result = {u: sorted(set(v), key=render_short) for u, v in result.items()}
    cache[power] = result
    return result


def require_move_phase(state: GameState) -> None:
    if state.phase not in MOVE_PHASES:
        raise PhaseError(f"expected a move phase, got {state.phase}")


@dataclass(frozen=True)
class Verdict:
    legal: bool
    reason: str = ""

    def __bool__(self):
        return self.legal


def validate_order(order: Order, state: GameState, power: str | None = None) -> Verdict:
    """Static legality, checked from the rules rather than by list lookup."""
    spec = state.map
    if state.phase in MOVE_PHASES:
        if order.type not in MOVE_PHASE_TYPES:
            return Verdict(False, f"{order.type} is not a move-phase order")
        unit = state.unit_at(order.loc) if order.loc and order.loc in spec.nodes else None
        if unit is None or unit.location != order.loc or unit.kind != order.unit:
            return Verdict(False, f"no {order.unit} at {order.loc}")
        if power is not None and unit.owner != power:
            return Verdict(False, f"{order.loc} belongs to {unit.owner}")
        here = unit.province
        reach = spec.reachable_provinces(unit.kind, unit.location)
        if order.type == HOLD:
            return Verdict(True)
        if order.type == MOVE:
            if order.dest not in spec.adjacent(unit.kind, unit.location):
                return Verdict(False, f"{order.dest} is not adjacent for this {unit.kind}")
            return Verdict(True)
        other = state.unit_at(order.target) if order.target in spec.by_id else None
        if other is None or other.kind != order.target_unit or other.province == here:
            return Verdict(False, f"no {order.target_unit} to support in {order.target}")
        if order.type == SUPPORT_HOLD:
            if order.target not in reach:
                return Verdict(False, f"{order.target} is out of reach")
            return Verdict(True)
        if order.dest == here or order.dest not in reach:
            return Verdict(False, f"supporter cannot reach {order.dest}")
        if order.dest not in spec.reachable_provinces(other.kind, other.location):
            return Verdict(False, f"supported unit cannot reach {order.dest}")
        return Verdict(True)
    if state.phase in RETREAT_PHASES:
        if order.type not in (RETREAT, DISBAND):
            return Verdict(False, f"{order.type} is not a retreat-phase order")
        for d in state.dislodged:
            if d.unit.location == order.loc and d.unit.kind == order.unit:
                if power is not None and d.unit.owner != power:
                    return Verdict(False, f"{order.loc} belongs to {d.unit.owner}")
                if order.type == RETREAT and order.dest not in d.retreats:
                    return Verdict(False, f"{order.dest} is not a legal retreat")
                return Verdict(True)
        return Verdict(False, f"no dislodged {order.unit} at {order.loc}")
    # winter
    if order.type == WAIVE:
        return Verdict(power is None or adjustment_delta(state, power) > 0, "no builds owed")
    if order.type == BUILD:
        if power is None:
            power = spec.province(order.loc).home_of
        if power is None or adjustment_delta(state, power) <= 0:
            return Verdict(False, "no builds available")
        if (order.unit, order.loc) not in buildable_sites(state, power):
            return Verdict(False, f"cannot build {order.unit} in {order.loc}")
        return Verdict(True)
    if order.type == DISBAND:
        unit = state.unit_at(order.loc) if order.loc in spec.nodes else None
        if unit is None or unit.kind != order.unit or unit.location != order.loc:
            return Verdict(False, f"no {order.unit} at {order.loc}")
        if power is not None and unit.owner != power:
            return Verdict(False, f"{order.loc} belongs to {unit.owner}")
        if adjustment_delta(state, unit.owner) >= 0:
            return Verdict(False, "no disbands owed")
        return Verdict(True)
    return Verdict(False, f"{order.type} is not an adjustment order")
