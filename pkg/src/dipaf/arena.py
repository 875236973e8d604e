"""Full games between agents and the 1-vs-rest tournament harness."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .adjudicator import step
from .anchor import AnchorPolicy, HeuristicAnchor, default_orders, solo_scores, sos_score
from .board import MapSpec, load_map
from .orders import Order, parse_short
from .search import SearchConfig, run_pikl
from .state import MOVE_PHASES, SPRING_MOVE, GameState, initial_state

WIN, MOST_SC, SURVIVED, DEFEATED = "win", "most_sc", "survived", "defeated"
OUTCOMES = (WIN, MOST_SC, SURVIVED, DEFEATED)
SOLO, DRAW = "solo_win", "max_year_draw"


@dataclass(frozen=True)
class AgentSpec:
    """How a seat chooses orders.

    ``anchor_only`` samples the anchor; ``pikl`` searches its own power and
    samples the final policy; ``scripted`` replays fixed orders keyed by
    ``"<year> <phase>"`` and falls back to the anchor.
    """

    kind: str = "anchor_only"
    config: SearchConfig | None = None
    script: Mapping[str, Sequence[str]] | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("anchor_only", "pikl", "scripted"):
            raise ValueError(f"unknown agent kind {self.kind!r}")
        if self.kind == "pikl" and self.config is None:
            object.__setattr__(self, "config", SearchConfig())

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == "pikl":
            c = self.config
            return f"pikl(beta={c.beta}, T={c.iterations}, N={c.n_candidates})"
        return self.kind

    def act(self, state: GameState, power: str, anchor: AnchorPolicy, rng: np.random.Generator) -> list[Order]:
        if state.phase in MOVE_PHASES and state.units_of(power):
            if self.kind == "pikl":
                cfg = replace(self.config, seed=int(rng.integers(2**63)), trace=False)
                result = run_pikl(state, cfg, anchor, [power])
                return list(result.sample(power, rng).orders)
            if self.kind == "scripted" and self.script:
                texts = self.script.get(f"{state.year} {state.phase}")
                if texts is not None:
                    return [parse_short(t, state.map) for t in texts]
        elif self.kind == "scripted" and self.script:
            texts = self.script.get(f"{state.year} {state.phase}")
            if texts is not None:
                return [parse_short(t, state.map) for t in texts]
        return default_orders(state, power, anchor, rng)


@dataclass(frozen=True)
class GameOutcome:
    powers: tuple[str, ...]
    sc_counts: tuple[int, ...]
    classification: tuple[str, ...]
    sos: tuple[float, ...]
    termination: str
    final_year: int
    winner: str | None = None

    def of(self, power: str) -> dict:
        i = self.powers.index(power)
        return {"sc": self.sc_counts[i], "class": self.classification[i], "sos": self.sos[i]}


def classify(powers: Sequence[str], counts: Sequence[int], winner: str | None) -> tuple[str, ...]:
    out = []
    top = max(counts) if counts else 0
    for p, c in zip(powers, counts):
        if p == winner:
            out.append(WIN)
        elif c == 0:
            out.append(DEFEATED)
        elif winner is None and c == top:
            out.append(MOST_SC)
        else:
            out.append(SURVIVED)
    return tuple(out)


def outcome_of(state: GameState, termination: str) -> GameOutcome:
    powers = state.map.powers
    counts = tuple(len(state.centers_of(p)) for p in powers)
    winner = state.winner() if termination == SOLO else None
    scores = solo_scores(state, winner) if winner else sos_score(counts)
    return GameOutcome(powers, counts, classify(powers, counts, winner), tuple(float(x) for x in scores),
                       termination, state.year, winner)


def play_game(spec: MapSpec, agents: Mapping[str, AgentSpec], max_year: int | None = None,
              seed: int | np.random.SeedSequence = 0, anchor: AnchorPolicy | None = None,
              state: GameState | None = None, on_step: Callable[[GameState], None] | None = None) -> GameOutcome:
    missing = [p for p in spec.powers if p not in agents]
    if missing:
        raise ValueError(f"no agent for {', '.join(missing)}")
    anchor = anchor or HeuristicAnchor()
    max_year = spec.start_year + 20 if max_year is None else max_year
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rngs = {p: np.random.default_rng(s) for p, s in zip(spec.powers, ss.spawn(len(spec.powers)))}
    state = state or initial_state(spec)
    while True:
        if state.winner() is not None:
            return outcome_of(state, SOLO)
        if state.phase == SPRING_MOVE and state.year > max_year:
            return outcome_of(state, DRAW)
        orders = {p: agents[p].act(state, p, anchor, rngs[p]) for p in spec.powers}
        state = step(state, orders)
        if on_step:
            on_step(state)


@dataclass
class Metric:
    mean: float
    se: float
    n: int

    @classmethod
    def of(cls, xs: Sequence[float]) -> "Metric":
        a = np.asarray(xs, dtype=float)
        n = len(a)
        se = float(a.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
        return cls(float(a.mean()) if n else float("nan"), se, n)

    def __str__(self):
        return f"{self.mean:.4f} ± {self.se:.4f}"


@dataclass
class TournamentResult:
    agent_a: str
    agent_b: str
    n_games: int
    metrics: dict[str, Metric]
    per_power: dict[str, dict[str, Metric]]
    seat_sos: dict[str, Metric] = field(default_factory=dict)
    outcomes: list[GameOutcome] = field(default_factory=list)
    seats: list[str] = field(default_factory=list)

    def rows(self) -> list[dict]:
        out = [{"agent_a": self.agent_a, "agent_b": self.agent_b, "games": self.n_games,
                **{f"{k}_mean": v.mean for k, v in self.metrics.items()},
                **{f"{k}_se": v.se for k, v in self.metrics.items()}}]
        for p, ms in self.per_power.items():
            out.append({"power": p, **{f"{k}_mean": v.mean for k, v in ms.items()},
                        "games": next(iter(ms.values())).n})
        return out


def _one_game(args):
    spec_name, a, b, seat, ss, max_year, anchor = args
    spec = load_map(spec_name) if isinstance(spec_name, str) else spec_name
    agents = {p: (a if p == seat else b) for p in spec.powers}
    return play_game(spec, agents, max_year, ss, anchor)


def tournament(spec: MapSpec | str, agent_a: AgentSpec, agent_b: AgentSpec, n_games: int, seed: int = 0,
               max_year: int | None = None, anchor: AnchorPolicy | None = None, workers: int = 1,
               progress: Callable[[int, GameOutcome], None] | None = None) -> TournamentResult:
    """agent_a takes one seat, rotating every game; agent_b fills the rest."""
    if n_games < 1:
        raise ValueError("n_games must be >= 1")
    spec_obj = load_map(spec) if isinstance(spec, str) else spec
    powers = spec_obj.powers
    seats = [powers[g % len(powers)] for g in range(n_games)]
    children = np.random.SeedSequence(seed).spawn(n_games)
    jobs = [(spec if isinstance(spec, str) else spec_obj, agent_a, agent_b, seats[g], children[g], max_year, anchor)
            for g in range(n_games)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outcomes = list(pool.map(_one_game, jobs))
    else:
        outcomes = []
        for g, job in enumerate(jobs):
            outcomes.append(_one_game(job))
            if progress:
                progress(g, outcomes[-1])
    return summarize(agent_a.label, agent_b.label, seats, outcomes)


def summarize(label_a: str, label_b: str, seats: list[str], outcomes: list[GameOutcome]) -> TournamentResult:
    cols = {"sos": [], **{k: [] for k in OUTCOMES}}
    per: dict[str, dict[str, list[float]]] = {}
    for seat, out in zip(seats, outcomes):
        rec = out.of(seat)
        cols["sos"].append(rec["sos"])
        for k in OUTCOMES:
            cols[k].append(1.0 if rec["class"] == k else 0.0)
        bucket = per.setdefault(seat, {"sos": [], **{k: [] for k in OUTCOMES}})
        bucket["sos"].append(rec["sos"])
        for k in OUTCOMES:
            bucket[k].append(1.0 if rec["class"] == k else 0.0)
    seat_sos = {}
    if outcomes:
        for i, p in enumerate(outcomes[0].powers):
            seat_sos[p] = Metric.of([o.sos[i] for o in outcomes])
    return TournamentResult(
        label_a, label_b, len(outcomes),
        {k: Metric.of(v) for k, v in cols.items()},
        {p: {k: Metric.of(v) for k, v in d.items()} for p, d in sorted(per.items())},
        seat_sos, outcomes, seats,
    )
