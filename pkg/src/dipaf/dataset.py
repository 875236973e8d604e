"""Text encodings of states and per-unit tasks, and Q-weighted training records.

One record per unit of a searched power's chosen joint action.  The record's
``user`` text is the board description plus the task prompt for unit d, the
``assistant`` text is that unit's order without the actor prefix, and
``value`` is the unit Q-value (lower-bound mode).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Callable, Iterable, Sequence

import numpy as np

from .anchor import AnchorPolicy, HeuristicAnchor, default_orders
from .adjudicator import step
from .board import ARMY, FLEET, LAND, WATER, MapSpec, load_map, province_of
from .factorizer import lb_unit_q
from .orders import VERBOSE, JointAction, Order, render_actor, render_order, render_suffix
from .search import SearchConfig, SearchResult, run_pikl
from .state import MOVE_PHASES, SPRING_MOVE, GameState, Unit, initial_state, require_move_phase

CHARS_PER_TOKEN = 4
MAX_TOKENS = 2048
RECORD_KEYS = ("system", "user", "assistant", "value", "weight", "meta")

SYSTEM_PROMPT = (
    "You are an expert in the no-press Diplomacy game environment. As one of {count} powers, your task is to "
    "use your army and fleet to control the supply centers on the board. You are playing [Your Power] and "
    "observing [Game Time and Phase], [Board State], and [Last Moves] below. In the [Board State], each power "
    "will sequentially display the locations of its army and fleet. Remember, unless specified otherwise, we "
    "will omit the default attributes for areas, which include the coast, neither supply center nor home "
    "center, no troops dislodged, and not occupied by anyone."
)

_NUMBER_WORDS = ("zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
                 "eleven", "twelve")
_PHASE_WORD = {"move": "Diplomacy", "retreat": "Retreats", "adjust": "Adjustments"}


class DatasetError(ValueError):
    pass


class BudgetExceeded(DatasetError):
    pass


def system_prompt(spec: MapSpec) -> str:
    n = len(spec.powers)
    return SYSTEM_PROMPT.format(count=_NUMBER_WORDS[n] if n < len(_NUMBER_WORDS) else str(n))


# ----------------------------------------------------------------- board text

def _coast_clause(spec: MapSpec, pid: str) -> str | None:
    labels = sorted(spec.coast_names[c] for c in spec.coast_names if province_of(c) == pid)
    if not labels:
        return None
    if len(labels) == 1:
        return f"including {labels[0]} Coast"
    return f"including {', '.join(labels[:-1])} and {labels[-1]} Coast"


def _place_attrs(spec: MapSpec, node: str) -> list[str]:
    """Terrain attributes; coastal is the default and is left out."""
    prov = spec.province(node)
    if prov.terrain == LAND:
        return ["land"]
    if prov.terrain == WATER:
        return ["water"]
    if "/" not in node:
        clause = _coast_clause(spec, prov.id)
        if clause:
            return [clause]
    return []


def _with_attrs(name: str, attrs: Sequence[str]) -> str:
    return f"{name} ({', '.join(attrs)})" if attrs else name


def _unit_entry(state: GameState, unit: Unit) -> str:
    spec = state.map
    attrs = _place_attrs(spec, unit.location)
    prov = spec.province(unit.location)
    if prov.is_supply_center:
        owner = state.sc_owner.get(prov.id)
        attrs.append(f"{owner}'s supply center" if owner else "supply center")
    return _with_attrs(spec.display(unit.location), attrs)


def _empty_center_entry(state: GameState, pid: str) -> str:
    attrs = _place_attrs(state.map, pid)
    owner = state.sc_owner.get(pid)
    if owner:
        attrs.append(f"{owner}'s")
    return _with_attrs(state.map.display(pid), attrs)


def _listing(items: Iterable[str]) -> str:
    items = sorted(items)
    return ", ".join(items) if items else "None"


def _power_blocks(state: GameState, power: str) -> list[str]:
    units = state.units_of(power)
    occupied = set(state.occupant)
    blocks = []
    for kind in (ARMY, FLEET):
        entries = [_unit_entry(state, u) for u in units if u.kind == kind]
        blocks.append(f"{power}'s {kind}:\n{_listing(entries)}")
    bare = [state.map.display(p) for p in state.centers_of(power) if p not in occupied]
    blocks.append(f"{power}'s center without units:\n{_listing(bare)}")
    return blocks


def _phase_line(state: GameState) -> str:
    season, kind = state.phase.split("_")
    return f"{state.year} {season.capitalize()}: {_PHASE_WORD[kind]}"


def _order_lines(state: GameState, power: str) -> str:
    texts = sorted(render_order(o, VERBOSE, state.map) for o in state.last_orders.get(power, ()))
    return ", ".join(texts) if texts else "None"


def encode_state_text(state: GameState, power: str) -> str:
    """Board description for ``power``; blocks are separated by blank lines."""
    require_move_phase(state)
    spec = state.map
    if power not in spec.powers:
        raise DatasetError(f"unknown power {power!r}")
    occupied = set(state.occupant)
    present = [p for p in spec.powers if state.units_of(p) or state.centers_of(p)]
    others = [p for p in present if p != power]

    blocks = ["[Game Time and Phase]:", _phase_line(state), "[Board State]:", "Your Power Unit:"]
    blocks += _power_blocks(state, power)
    blocks.append("Other Power Unit:")
    for p in others:
        blocks += _power_blocks(state, p)

    free = [p for p in spec.by_id if p not in occupied]
    neutral = [_empty_center_entry(state, p) for p in free
               if spec.by_id[p].is_supply_center and state.sc_owner.get(p) is None]
    owned = [_empty_center_entry(state, p) for p in free
             if spec.by_id[p].is_supply_center and state.sc_owner.get(p) is not None]
    plain = [_with_attrs(spec.display(p), _place_attrs(spec, p)) for p in free
             if not spec.by_id[p].is_supply_center]
    blocks += ["Areas Without Unit:",
               f"unoccupied supply center:\n{_listing(neutral)}",
               f"occupied supply center:\n{_listing(owned)}",
               f"not supply center:\n{_listing(plain)}"]

    blocks += ["[Last Move]:", "Your Power Order:", f"{power}:\n{_order_lines(state, power)}"
               if state.last_orders.get(power) else "None", "Other Power Order:"]
    movers = [p for p in others if state.last_orders.get(p)]
    blocks += [f"{p}:\n{_order_lines(state, p)}" for p in movers] or ["None"]
    return "\n\n".join(blocks)


# ------------------------------------------------------------------ task text

def build_task_prompt(prev_orders: Sequence[str], unit: Unit, candidates: Sequence[Order], spec: MapSpec) -> str:
    """Task for one unit; ends right after the actor so the answer completes it."""
    if not candidates:
        raise DatasetError("a task needs at least one candidate order")
    actor = render_actor(unit.kind, unit.location, spec)
    options = sorted(render_suffix(o, spec) for o in candidates)
    return (f"In this round, the orders you have previously generated are [{', '.join(prev_orders)}]. "
            f"The candidate orders for {actor} are [{', '.join(options)}]. "
            f"The best order from candidate orders is that {actor}")


# -------------------------------------------------------------------- records

@dataclass(frozen=True)
class UnitTransition:
    state_text: str
    task_text: str
    ground_truth_text: str
    q_value: float
    meta: dict

    @property
    def weight(self) -> float:
        return math.exp(self.q_value)

    @property
    def user(self) -> str:
        return f"{self.state_text}\n\n{self.task_text}"


def format_real(x: float) -> str:
    if not math.isfinite(x):
        raise DatasetError(f"non-finite value {x!r}")
    return format(float(x), ".17g")


def record_line(tr: UnitTransition, system: str, max_chars: int | None = CHARS_PER_TOKEN * MAX_TOKENS) -> str:
    """One JSON object, fixed key order, reals with 17 significant digits."""
    size = len(system) + len(tr.user) + len(tr.ground_truth_text)
    if max_chars is not None and size > max_chars:
        raise BudgetExceeded(f"record of {size} characters exceeds the budget of {max_chars}")
    dump = lambda v: json.dumps(v, ensure_ascii=False)  # noqa: E731
    meta = json.dumps(tr.meta, ensure_ascii=False, sort_keys=True)
    return ("{" + f'"system": {dump(system)}, "user": {dump(tr.user)}, '
            f'"assistant": {dump(tr.ground_truth_text)}, "value": {dump(format_real(tr.q_value))}, '
            f'"weight": {format_real(tr.weight)}, "meta": {meta}' + "}")


def unit_candidates(result: SearchResult, power: str) -> dict[str, tuple[Unit, tuple[Order, ...]]]:
    return {m.unit.location: (m.unit, m.orders) for m in result[power].menus}


def transitions_for(state: GameState, power: str, result: SearchResult, chosen: JointAction,
                    meta: dict | None = None) -> list[UnitTransition]:
    ps = result[power]
    try:
        k = ps.candidates.index(chosen)
    except ValueError:
        raise DatasetError("the chosen joint action is not a search candidate") from None
    spec = state.map
    menus = unit_candidates(result, power)
    depth = len(chosen.orders)
    q = lb_unit_q(float(ps.mean_q[k]), float(ps.anchor_logprob[k]), result.config.beta, depth)
    state_text = encode_state_text(state, power)
    out, prev = [], []
    for d, order in enumerate(chosen.orders, start=1):
        unit, cands = menus[order.loc]
        task = build_task_prompt(prev, unit, cands, spec)
        m = {**(meta or {}), "year": state.year, "phase": state.phase, "power": power, "unit_index": d,
             "unit": f"{unit.kind} {unit.location}", "mode": "lower_bound"}
        out.append(UnitTransition(state_text, task, render_suffix(order, spec), float(q[d - 1]), m))
        prev.append(render_order(order, VERBOSE, spec))
    return out


def emit_transitions(state: GameState, power: str, result: SearchResult, chosen: JointAction, sink: IO[str],
                     meta: dict | None = None, max_chars: int | None = CHARS_PER_TOKEN * MAX_TOKENS) -> int:
    """Write one line per unit of ``chosen``; returns the number written."""
    system = system_prompt(state.map)
    rows = transitions_for(state, power, result, chosen, meta)
    lines = [record_line(tr, system, max_chars) for tr in rows]
    for line in lines:
        sink.write(line + "\n")
    return len(lines)


def read_records(lines: Iterable[str]) -> list[dict]:
    out = []
    for i, line in enumerate(lines, 1):
        if not line.strip():
            continue
        rec = json.loads(line)
        if tuple(rec) != RECORD_KEYS:
            raise DatasetError(f"line {i}: keys {tuple(rec)} differ from {RECORD_KEYS}")
        out.append(rec)
    return out


# ---------------------------------------------------------------- self-play

@dataclass(frozen=True)
class DatasetSummary:
    games: int
    phases: int
    transitions: int
    mean_abs_q: float

    def to_dict(self) -> dict:
        return {"games": self.games, "phases": self.phases, "transitions": self.transitions,
                "mean_abs_q": self.mean_abs_q}


def selfplay_generate(spec: MapSpec | str, n_games: int, config: SearchConfig, sink: IO[str],
                      anchor: AnchorPolicy | None = None, max_year: int | None = None, seed: int = 0,
                      max_chars: int | None = CHARS_PER_TOKEN * MAX_TOKENS,
                      on_phase: Callable[[GameState], None] | None = None) -> DatasetSummary:
    """Self-play where every power searches jointly each move phase and plays
    a sample of its final policy; each move phase of each power is recorded.
    ``on_phase`` sees every recorded position."""
    spec = load_map(spec) if isinstance(spec, str) else spec
    if n_games < 1:
        raise ValueError("n_games must be >= 1")
    anchor = anchor or HeuristicAnchor()
    max_year = spec.start_year + 2 if max_year is None else max_year
    phases = written = 0
    qs: list[float] = []
    for g, ss in enumerate(np.random.SeedSequence(seed).spawn(n_games)):
        rng = np.random.default_rng(ss)
        state = initial_state(spec)
        while state.winner() is None and not (state.phase == SPRING_MOVE and state.year > max_year):
            if state.phase in MOVE_PHASES:
                cfg = SearchConfig.from_mapping({**config.to_dict(), "seed": int(rng.integers(2**63)),
                                                 "trace": False})
                result = run_pikl(state, cfg, anchor)
                if on_phase:
                    on_phase(state)
                orders = {}
                for p in spec.powers:
                    if p not in result.powers:
                        orders[p] = []
                        continue
                    chosen = result.sample(p, rng)
                    meta = {"game": g, "seed": seed, "state_hash": state.state_hash}
                    rows = transitions_for(state, p, result, chosen, meta)
                    system = system_prompt(spec)
                    for tr in rows:
                        sink.write(record_line(tr, system, max_chars) + "\n")
                        qs.append(tr.q_value)
                    written += len(rows)
                    orders[p] = list(chosen.orders)
                phases += 1
            else:
                orders = {p: default_orders(state, p, anchor, rng) for p in spec.powers}
            state = step(state, orders)
    mean_abs = float(np.mean(np.abs(qs))) if qs else 0.0
    return DatasetSummary(n_games, phases, written, mean_abs)
