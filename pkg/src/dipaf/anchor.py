"""Anchor policies and the rollout utility estimator."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adjudicator import adjudicate_moves, resolve_moves, step
from .board import KIND_LETTER, province_of
from .orders import JointAction, Order, render_short
from .state import (
    MOVE_PHASES,
    RETREAT_PHASES,
    GameState,
    Unit,
    adjustment_delta,
    buildable_sites,
    legal_orders,
    require_move_phase,
)

ANCHOR_FLOOR = 1e-3
_tokens = itertools.count()


def sos_score(counts) -> np.ndarray:
    """Sum-of-squares share: C_i^2 / sum_j C_j^2."""
    c = np.asarray(counts, dtype=float)
    if c.ndim != 1 or (c < 0).any():
        raise ValueError("counts must be a non-negative vector")
    sq = c * c
    total = sq.sum()
    if total <= 0:
        raise ValueError("at least one count must be positive")
    return sq / total


def unit_label(unit: Unit) -> str:
    return f"{KIND_LETTER[unit.kind]} {unit.location}"


def _state_cache(state: GameState, name: str) -> dict:
    cache = state.__dict__.get(name)
    if cache is None:
        cache = {}
        object.__setattr__(state, name, cache)
    return cache


class AnchorPolicy:
    """Per-unit distribution over that unit's legal orders (tau)."""

    kind = "base"

    def __init__(self, floor: float = ANCHOR_FLOOR):
        if not 0 < floor <= 1:
            raise ValueError("floor must lie in (0, 1]")
        self.floor = floor
        self._token = next(_tokens)

    def raw(self, state: GameState, power: str, unit: Unit, candidates: list[Order]) -> np.ndarray:
        raise NotImplementedError

    def unit_distribution(self, state: GameState, power: str, unit: Unit, candidates: list[Order]) -> np.ndarray:
        p = np.asarray(self.raw(state, power, unit, candidates), dtype=float)
        p = p / p.sum()
        n = len(candidates)
        return (1.0 - self.floor) * p + self.floor / n

    def unit_policies(self, state: GameState, power: str) -> dict[Unit, tuple[list[Order], np.ndarray]]:
        """Legal orders and their probabilities for each of ``power``'s units."""
        cache = _state_cache(state, "_anchor")
        key = (self._token, power)
        hit = cache.get(key)
        if hit is None:
            hit = {u: (c, self.unit_distribution(state, power, u, c)) for u, c in legal_orders(state, power).items()}
            cache[key] = hit
        return hit

    def sample_joint(self, state: GameState, power: str, rng: np.random.Generator) -> JointAction:
        orders = []
        for cands, probs in self.unit_policies(state, power).values():
            orders.append(cands[_draw(rng, probs)])
        return JointAction(power, tuple(orders))

    def argmax_joint(self, state: GameState, power: str) -> JointAction:
        orders = []
        for cands, probs in self.unit_policies(state, power).values():
            orders.append(cands[_argmax_by_text(cands, probs)])
        return JointAction(power, tuple(orders))

    def describe(self) -> str:
        return self.kind


def _draw(rng: np.random.Generator, probs: np.ndarray) -> int:
    i = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"))
    return min(i, len(probs) - 1)


def _argmax_by_text(cands: list[Order], probs: np.ndarray) -> int:
    best = max(probs)
    return min((render_short(c), i) for i, c in enumerate(cands) if probs[i] == best)[1]


class UniformAnchor(AnchorPolicy):
    kind = "uniform"

    def raw(self, state, power, unit, candidates):
        return np.ones(len(candidates))


@dataclass(frozen=True)
class HeuristicWeights:
    capture: float = 2.0
    approach: float = 1.0
    support_own: float = 0.5
    temperature: float = 1.0


class HeuristicAnchor(AnchorPolicy):
    """Scores moves onto foreign centres, moves toward them, and supports of
    the power's own moves; softmax per unit."""

    kind = "heuristic"

    def __init__(self, weights: HeuristicWeights | None = None, floor: float = ANCHOR_FLOOR):
        super().__init__(floor)
        self.weights = weights or HeuristicWeights()

    def score(self, state: GameState, power: str, unit: Unit, order: Order) -> float:
        w = self.weights
        spec = state.map
        if order.type == "move":
            targets = [sc for sc in spec.supply_centers if state.sc_owner.get(sc) != power]
            s = 0.0
            if province_of(order.dest) in targets:
                s += w.capture
            if targets:
                table = spec.kind_distance[unit.kind]
                far = 1 << 20
                here = min(table.get(unit.location, {}).get(t, far) for t in targets)
                there = min(table.get(order.dest, {}).get(t, far) for t in targets)
                if there < here:
                    s += w.approach
            return s
        if order.type == "support_move":
            other = state.unit_at(order.target)
            if other is not None and other.owner == power:
                return w.support_own
        return 0.0

    def raw(self, state, power, unit, candidates):
        s = np.array([self.score(state, power, unit, o) for o in candidates]) / self.weights.temperature
        return np.exp(s - s.max())

    def describe(self):
        w = self.weights
        return f"heuristic(capture={w.capture}, approach={w.approach}, support_own={w.support_own}, T={w.temperature})"


class TableAnchor(AnchorPolicy):
    """Probabilities read from a JSON-lines table keyed by state hash, power
    and unit.  Units with no rows fall back to uniform."""

    kind = "table"

    def __init__(self, rows: dict, floor: float = ANCHOR_FLOOR, source: str = "<memory>"):
        super().__init__(floor)
        self.rows = rows
        self.source = source

    @classmethod
    def from_file(cls, path: str | Path, floor: float = ANCHOR_FLOOR) -> "TableAnchor":
        rows: dict = {}
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    r = json.loads(line)
                    key = (r["state"], r["power"], r["unit"])
                    prob = float(r["prob"])
                except (ValueError, KeyError) as exc:
                    raise ValueError(f"{path}:{n}: bad anchor row ({exc})") from exc
                if prob < 0 or not math.isfinite(prob):
                    raise ValueError(f"{path}:{n}: probability must be finite and non-negative")
                rows.setdefault(key, {})[r["order"]] = prob
        return cls(rows, floor, str(path))

    def raw(self, state, power, unit, candidates):
        table = self.rows.get((state.state_hash, power, unit_label(unit)))
        if not table:
            return np.ones(len(candidates))
        p = np.array([table.get(render_short(o), 0.0) for o in candidates])
        return p if p.sum() > 0 else np.ones(len(candidates))

    def describe(self):
        return f"table({self.source})"


def make_anchor(kind: str, path: str | None = None, **kw) -> AnchorPolicy:
    if kind == "uniform":
        return UniformAnchor(**kw)
    if kind == "heuristic":
        return HeuristicAnchor(**kw)
    if kind == "table":
        if path is None:
            raise ValueError("table anchor needs a file")
        return TableAnchor.from_file(path, **kw)
    raise ValueError(f"unknown anchor kind {kind!r}")


def anchor_joint_logprob(anchor: AnchorPolicy, state: GameState, power: str, joint: JointAction) -> float:
    """log tau(a^{1:D}|s) as a sum of per-unit log-probabilities."""
    require_move_phase(state)
    policies = anchor.unit_policies(state, power)
    by_loc = {u.location: (c, p) for u, (c, p) in policies.items()}
    if len(joint.orders) != len(by_loc):
        raise ValueError(f"joint has {len(joint.orders)} orders for {len(by_loc)} units")
    total = 0.0
    for o in joint.orders:
        cands, probs = by_loc.get(o.loc, (None, None))
        if cands is None or o not in cands:
            raise ValueError(f"illegal order {render_short(o)} in joint for {power}")
        total += math.log(probs[cands.index(o)])
    return total


# ------------------------------------------------------------------ rollouts

def default_orders(state: GameState, power: str, anchor: AnchorPolicy, rng: np.random.Generator) -> list[Order]:
    """Orders a rollout uses for ``power`` in any phase."""
    if state.phase in MOVE_PHASES:
        return list(anchor.sample_joint(state, power, rng).orders)
    if state.phase in RETREAT_PHASES:
        out = []
        for d in state.dislodged:
            if d.unit.owner == power and d.retreats:
                out.append(Order.retreat(d.unit.kind, d.unit.location, d.retreats[int(rng.integers(len(d.retreats)))]))
        return out
    delta = adjustment_delta(state, power)
    if delta <= 0:
        return []  # owed disbands fall to the civil-disorder rule
    sites = buildable_sites(state, power)
    out, used = [], set()
    for i in rng.permutation(len(sites)):
        kind, node = sites[int(i)]
        if province_of(node) in used:
            continue
        used.add(province_of(node))
        out.append(Order.build(kind, node))
        if len(out) == delta:
            break
    return out


def projected_counts(state: GameState) -> list[int]:
    """Centre counts if every occupied centre passed to its occupant now."""
    owners = dict(state.sc_owner)
    for u in state.units:
        if u.province in owners:
            owners[u.province] = u.owner
    tally = {p: 0 for p in state.map.powers}
    for o in owners.values():
        if o is not None:
            tally[o] += 1
    return [tally[p] for p in state.map.powers]


def solo_scores(state: GameState, winner: str) -> np.ndarray:
    return np.array([1.0 if p == winner else 0.0 for p in state.map.powers])


def terminal_scores(state: GameState, counts: list[int] | None = None) -> np.ndarray:
    w = state.winner()
    if w is not None:
        return solo_scores(state, w)
    counts = projected_counts(state) if counts is None else counts
    if sum(counts) == 0:
        return np.full(len(counts), 1.0 / len(counts))
    return sos_score(counts)


@dataclass(frozen=True)
class UtilityEstimate:
    values: np.ndarray
    rollouts_used: int
    horizon_reached: bool

    def of(self, state: GameState, power: str) -> float:
        return float(self.values[state.map.powers.index(power)])


def fast_projected_counts(state: GameState, joints: dict[str, JointAction]) -> list[int]:
    """Projected centre counts after one move phase, for orders known to be
    legal.  Skips validation and state construction."""
    effective = {province_of(o.loc): o for j in joints.values() for o in j.orders}
    for u in state.units:
        effective.setdefault(u.province, Order.hold(u.kind, u.location))
    moved, _ = resolve_moves(state, effective)
    owners = dict(state.sc_owner)
    for u in state.units:
        p = u.province
        where = province_of(effective[p].dest) if moved.get(p) else p
        if where in owners:
            owners[where] = u.owner
    # dislodged units' centres stay with whoever now stands there (handled above)
    tally = {p: 0 for p in state.map.powers}
    for o in owners.values():
        if o is not None:
            tally[o] += 1
    return [tally[p] for p in state.map.powers]


def play_out(state: GameState, anchor: AnchorPolicy, rng: np.random.Generator, move_phases: int,
             max_year: int | None = None) -> GameState:
    """Advance ``state`` through ``move_phases`` move phases with every power
    drawing from the anchor.  Stops early on a solo win or ``max_year``."""
    done = 0
    while True:
        if state.phase in MOVE_PHASES:
            if done >= move_phases or (max_year is not None and state.year > max_year):
                return state
            done += 1
        orders = {p: default_orders(state, p, anchor, rng) for p in state.map.powers}
        state = step(state, orders)
        if state.winner() is not None:
            return state


def estimate_utility(state: GameState, joints: dict[str, JointAction], rollouts: int = 16, horizon: int = 4,
                     seed: int | np.random.SeedSequence = 0, anchor: AnchorPolicy | None = None) -> UtilityEstimate:
    """Mean SoS after applying ``joints`` and ``horizon`` anchor move phases.

    Powers absent from ``joints`` draw from the anchor.  With ``horizon == 0``
    and every power specified the result is deterministic and one rollout is
    used.  Centres are credited to their occupant at the end of a rollout.
    """
    require_move_phase(state)
    anchor = anchor or UniformAnchor()
    missing = [p for p in state.map.powers if p not in joints]
    if horizon == 0 and not missing:
        counts = fast_projected_counts(state, joints)
        return UtilityEstimate(terminal_scores(state, counts), 1, True)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    total = np.zeros(len(state.map.powers))
    reached = True
    for child in ss.spawn(rollouts):
        rng = np.random.default_rng(child)
        orders = dict(joints)
        for p in missing:
            orders[p] = anchor.sample_joint(state, p, rng)
        nxt = adjudicate_moves(state, orders).new_state
        if horizon > 0 and nxt.winner() is None:
            nxt = play_out(nxt, anchor, rng, horizon)
        if nxt.winner() is not None:
            reached = False
        total += terminal_scores(nxt)
    return UtilityEstimate(total / rollouts, rollouts, reached)
