"""piKL-Hedge search over candidate joint actions."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from itertools import product
from typing import IO, Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from .anchor import AnchorPolicy, estimate_utility, fast_projected_counts, terminal_scores
from .orders import JointAction, Order, render_short
from .state import GameState, Unit, require_move_phase


@dataclass(frozen=True)
class SearchConfig:
    iterations: int = 256
    n_candidates: int = 50
    max_per_unit: int = 6
    beta: float = 0.1
    nash_explore: float = 0.1
    rollouts: int = 16
    horizon: int = 4
    seed: int = 0
    utility_scale: float = 1.0
    trace: bool = False

    def __post_init__(self):
        if self.iterations < 1 or self.n_candidates < 1 or self.max_per_unit < 1:
            raise ValueError("iterations, n_candidates and max_per_unit must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if not 0 <= self.nash_explore <= 1:
            raise ValueError("nash_explore must lie in [0, 1]")
        if self.rollouts < 1 or self.horizon < 0:
            raise ValueError("rollouts must be >= 1 and horizon >= 0")

    @classmethod
    def from_mapping(cls, data: dict) -> "SearchConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown search settings: {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


def policy_from_q(q_values, anchor_logprobs, beta: float) -> np.ndarray:
    """softmax(beta * log tau + Q)."""
    q = np.asarray(q_values, dtype=float)
    lt = np.asarray(anchor_logprobs, dtype=float)
    return softmax(beta * lt + q)


# ---------------------------------------------------------------- candidates

@dataclass(frozen=True)
class UnitMenu:
    """A unit's top orders by anchor probability."""

    unit: Unit
    orders: tuple[Order, ...]
    probs: np.ndarray          # anchor probabilities of ``orders`` (unnormalised slice)
    logprobs: np.ndarray       # log tau for each order under the full anchor


def unit_menus(state: GameState, power: str, anchor: AnchorPolicy, max_per_unit: int) -> list[UnitMenu]:
    menus = []
    for unit, (cands, probs) in anchor.unit_policies(state, power).items():
        ranked = sorted(range(len(cands)), key=lambda i: (-probs[i], render_short(cands[i])))[:max_per_unit]
        p = np.array([probs[i] for i in ranked])
        menus.append(UnitMenu(unit, tuple(cands[i] for i in ranked), p, np.log(p)))
    return menus


def draw_unit_choices(menus: Sequence[UnitMenu], eps: float, rng: np.random.Generator) -> tuple[int, ...]:
    """One index per unit: uniform over the menu with probability ``eps``,
    otherwise from the renormalised anchor."""
    out = []
    for m in menus:
        n = len(m.orders)
        if rng.random() < eps:
            out.append(int(rng.integers(n)))
        else:
            p = m.probs / m.probs.sum()
            out.append(min(int(np.searchsorted(np.cumsum(p), rng.random(), side="right")), n - 1))
    return tuple(out)


def generate_candidates(state: GameState, power: str, anchor: AnchorPolicy, config: SearchConfig,
                        rng: np.random.Generator | None = None) -> tuple[list[JointAction], list[UnitMenu]]:
    require_move_phase(state)
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    menus = unit_menus(state, power, anchor, config.max_per_unit)
    sizes = [len(m.orders) for m in menus]
    if int(np.prod(sizes, dtype=float)) <= config.n_candidates:
        picks = list(product(*(range(s) for s in sizes)))
    else:
        picks = [tuple(0 for _ in sizes)]  # menus are ranked, so index 0 is the anchor argmax
        seen = set(picks)
        budget = 50 * config.n_candidates
        while len(picks) < config.n_candidates and budget > 0:
            budget -= 1
            c = draw_unit_choices(menus, config.nash_explore, rng)
            if c not in seen:
                seen.add(c)
                picks.append(c)
    joints = [JointAction(power, tuple(m.orders[i] for m, i in zip(menus, c))) for c in picks]
    return joints, menus


def _joint_logprob(menus: list[UnitMenu], joint: JointAction) -> float:
    by_loc = {m.unit.location: m for m in menus}
    return float(sum(by_loc[o.loc].logprobs[by_loc[o.loc].orders.index(o)] for o in joint.orders))


# -------------------------------------------------------------------- search

@dataclass
class PowerSearch:
    power: str
    candidates: list[JointAction]
    menus: list[UnitMenu]
    anchor_logprob: np.ndarray
    policy: np.ndarray
    avg_policy: np.ndarray
    mean_q: np.ndarray

    @property
    def joint_q_with_anchor(self) -> np.ndarray:
        return self.mean_q + self._beta * self.anchor_logprob

    _beta: float = 0.0


@dataclass
class SearchResult:
    config: SearchConfig
    powers: dict[str, PowerSearch]
    trace: list[dict] = field(default_factory=list)

    def __getitem__(self, power: str) -> PowerSearch:
        return self.powers[power]

    def sample(self, power: str, rng: np.random.Generator, average: bool = False) -> JointAction:
        ps = self.powers[power]
        p = ps.avg_policy if average else ps.policy
        i = min(int(np.searchsorted(np.cumsum(p), rng.random(), side="right")), len(p) - 1)
        return ps.candidates[i]

    def write_trace(self, fh: IO[str]) -> int:
        for row in self.trace:
            fh.write(json.dumps(row, sort_keys=False) + "\n")
        return len(self.trace)


def _mixed(policy: np.ndarray, eps: float) -> np.ndarray:
    return (1 - eps) * policy + eps / len(policy)


def run_pikl(state: GameState, config: SearchConfig, anchor: AnchorPolicy,
             powers: Sequence[str] | None = None) -> SearchResult:
    """piKL-Hedge for ``powers`` (default: every power with units).  Powers
    not searched are modelled by the anchor."""
    require_move_phase(state)
    root = np.random.SeedSequence(config.seed)
    cand_ss, sample_ss, rollout_ss = root.spawn(3)
    cand_rng = np.random.default_rng(cand_ss)
    rng = np.random.default_rng(sample_ss)

    alive = [p for p in state.map.powers if state.units_of(p)]
    searched = [p for p in (powers if powers is not None else alive) if p in alive]
    passive = [p for p in alive if p not in searched]
    idx = {p: i for i, p in enumerate(state.map.powers)}

    runs: dict[str, PowerSearch] = {}
    for p in searched:
        cands, menus = generate_candidates(state, p, anchor, config, cand_rng)
        lt = np.array([_joint_logprob(menus, j) for j in cands])
        n = len(cands)
        runs[p] = PowerSearch(p, cands, menus, lt, np.full(n, 1.0 / n), np.zeros(n), np.zeros(n), config.beta)

    cache: dict = {}
    trace: list[dict] = []
    deterministic = config.horizon == 0

    def utility(profile: dict[str, JointAction], t: int) -> np.ndarray:
        key = tuple(profile[p].key() for p in sorted(profile))
        hit = cache.get(key) if deterministic else None
        if hit is None:
            if deterministic:
                hit = terminal_scores(state, fast_projected_counts(state, profile))
            else:
                seed = np.random.SeedSequence(rollout_ss.entropy, spawn_key=rollout_ss.spawn_key + (t,))
                hit = estimate_utility(state, profile, config.rollouts, config.horizon, seed, anchor).values
            if deterministic:
                cache[key] = hit
        return hit

    for t in range(1, config.iterations + 1):
        sampled: dict[str, JointAction] = {}
        for p in searched:
            r = runs[p]
            mix = _mixed(r.policy, config.nash_explore)
            i = min(int(np.searchsorted(np.cumsum(mix), rng.random(), side="right")), len(mix) - 1)
            sampled[p] = r.candidates[i]
        for p in passive:
            sampled[p] = anchor.sample_joint(state, p, rng)
        for p in searched:
            r = runs[p]
            u = np.empty(len(r.candidates))
            for k, cand in enumerate(r.candidates):
                profile = dict(sampled)
                profile[p] = cand
                u[k] = utility(profile, t)[idx[p]]
            u *= config.utility_scale
            r.mean_q += (u - r.mean_q) / t
        for p in searched:
            r = runs[p]
            r.policy = policy_from_q(r.mean_q, r.anchor_logprob, config.beta)
            r.avg_policy += (r.policy - r.avg_policy) / t
            if config.trace:
                for k in range(len(r.candidates)):
                    trace.append({"iteration": t, "power": p, "candidate": k,
                                  "mean_q": float(r.mean_q[k]), "prob": float(r.policy[k])})
    return SearchResult(config, runs, trace)


def kl_divergence(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    m = p > 0
    return float(np.sum(p[m] * (np.log(p[m]) - np.log(q[m]))))


def restricted_anchor(ps: PowerSearch) -> np.ndarray:
    """The anchor renormalised over the candidate set."""
    return np.exp(ps.anchor_logprob - logsumexp(ps.anchor_logprob))
