"""Two-player zero-sum games with factored actions, for checking the
anchored-Hedge bound exactly.

Each player's action is a tuple of sub-actions (one per slot).  Policies are
arrays over the flattened tuples, in C order.  Each iteration builds the
player's unit Q-values from the joint values and rebuilds the policy as the
product of per-unit softmaxes, so the factorization sits on the update path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .factorizer import JointQTable, factored_joint_policy, joint_policy

EXACT_EXPECTATION, SAMPLED = "exact_expectation", "sampled"


@dataclass(frozen=True)
class MatrixGame:
    """Zero-sum game: ``payoff[a, b]`` is player 1's payoff; player 2 gets
    the negation.  ``slots[i]`` lists the alphabet sizes of player i's tuple."""

    slots: tuple[tuple[int, ...], tuple[int, ...]]
    payoff: np.ndarray
    anchors: tuple[np.ndarray, np.ndarray]
    name: str = ""

    def __post_init__(self):
        n1, n2 = (int(np.prod(s)) for s in self.slots)
        if self.payoff.shape != (n1, n2):
            raise ValueError(f"payoff must be {n1}x{n2}, got {self.payoff.shape}")
        for i, (tau, n) in enumerate(zip(self.anchors, (n1, n2))):
            if tau.shape != (n,) or (tau <= 0).any() or not math.isclose(float(tau.sum()), 1.0, abs_tol=1e-9):
                raise ValueError(f"anchor {i + 1} must be a strictly positive distribution over {n} tuples")

    @property
    def sizes(self) -> tuple[int, int]:
        return self.payoff.shape

    def utility(self, player: int, pi1: np.ndarray, pi2: np.ndarray) -> float:
        v = float(pi1 @ self.payoff @ pi2)
        return v if player == 0 else -v


def delta_bound(anchor) -> float:
    """max over actions of log(1 / tau)."""
    tau = np.asarray(anchor, dtype=float)
    if (tau <= 0).any():
        raise ValueError("anchor has a zero-probability action")
    return float(np.max(-np.log(tau)))


def exploitability(game: MatrixGame, pi1, pi2) -> tuple[float, float]:
    """Per player: best-response value against the other's policy minus the
    value of the current policy."""
    pi1 = np.asarray(pi1, dtype=float)
    pi2 = np.asarray(pi2, dtype=float)
    row = game.payoff @ pi2          # player 1's value per pure action
    col = pi1 @ game.payoff          # player 1's value against each of 2's pure actions
    v = float(pi1 @ row)
    return float(row.max() - v), float(v - col.min())


def rock_paper_scissors(anchor=None) -> MatrixGame:
    a = np.array([[0, -1, 1], [1, 0, -1], [-1, 1, 0]], dtype=float)
    tau = np.full(3, 1 / 3) if anchor is None else np.asarray(anchor, dtype=float)
    return MatrixGame(((3,), (3,)), a, (tau, tau), "rps")


def matching_pennies(scale: float = 0.5) -> MatrixGame:
    a = scale * np.array([[1, -1], [-1, 1]], dtype=float)
    tau = np.full(2, 0.5)
    return MatrixGame(((2,), (2,)), a, (tau, tau), "matching-pennies")


def uniform_anchor(slots: Sequence[int]) -> np.ndarray:
    n = int(np.prod(slots))
    return np.full(n, 1.0 / n)


def skewed_anchor(slots: Sequence[int], rng: np.random.Generator, concentration: float = 0.5) -> np.ndarray:
    """Product of per-slot Dirichlet draws, floored so every tuple keeps mass."""
    tau = np.ones(1)
    for s in slots:
        p = rng.dirichlet(np.full(s, concentration))
        p = 0.95 * p + 0.05 / s
        tau = np.outer(tau, p).ravel()
    return tau / tau.sum()


def random_game(rng: np.random.Generator, slots1: Sequence[int], slots2: Sequence[int],
                skewed: bool = False, name: str = "") -> MatrixGame:
    n1, n2 = int(np.prod(slots1)), int(np.prod(slots2))
    a = rng.uniform(-1, 1, size=(n1, n2))
    if skewed:
        anchors = (skewed_anchor(slots1, rng), skewed_anchor(slots2, rng))
    else:
        anchors = (uniform_anchor(slots1), uniform_anchor(slots2))
    return MatrixGame((tuple(slots1), tuple(slots2)), a, anchors, name)


@dataclass
class DualAveragePolicy:
    policies: tuple[np.ndarray, np.ndarray]
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    theorem1_max: float = 0.0
    final: tuple[np.ndarray, np.ndarray] | None = None

    def write_trace(self, fh: IO[str]) -> None:
        for t, e1, e2 in self.trace:
            fh.write(json.dumps({"iteration": t, "exploitability_1": e1, "exploitability_2": e2}) + "\n")


def default_eta(game: MatrixGame, iterations: int) -> float:
    n = max(game.sizes)
    span = float(game.payoff.max() - game.payoff.min()) or 1.0
    return math.sqrt(8 * math.log(max(n, 2)) / iterations) / span


def _factored_policy(slots: tuple[int, ...], q: np.ndarray, logtau: np.ndarray, beta: float,
                     check: bool) -> tuple[np.ndarray, float]:
    table = JointQTable.from_arrays(q.reshape(slots), logtau.reshape(slots), beta)
    pi = factored_joint_policy(table).ravel()
    gap = float(np.max(np.abs(pi - joint_policy(table).ravel()))) if check else 0.0
    return pi, gap


def run_factored_pikl(game: MatrixGame, beta: float | Sequence[float], iterations: int, seed: int = 0,
                      update: str = EXACT_EXPECTATION, eta: float | None = None,
                      check_theorem1: bool = True, trace_every: int = 1) -> DualAveragePolicy:
    """Anchored Hedge for both players, factored per slot.

    After t iterations with cumulative utilities S, each player plays
    ``exp((eta S + eta t beta log tau) / (1 + eta t beta))``; this is the
    joint-policy form with Q = eta S / (1 + eta t beta) and an effective anchor
    weight eta t beta / (1 + eta t beta), which tends to beta.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if update not in (EXACT_EXPECTATION, SAMPLED):
        raise ValueError(f"unknown update {update!r}")
    betas = (float(beta), float(beta)) if np.isscalar(beta) else tuple(float(b) for b in beta)
    eta = default_eta(game, iterations) if eta is None else float(eta)
    rng = np.random.default_rng(seed)
    logtau = tuple(np.log(t) for t in game.anchors)
    cum = [np.zeros(n) for n in game.sizes]
    pis = [np.full(n, 1.0 / n) for n in game.sizes]
    avg = [np.zeros(n) for n in game.sizes]
    out = DualAveragePolicy((avg[0], avg[1]))
    worst = 0.0
    for t in range(1, iterations + 1):
        if update == EXACT_EXPECTATION:
            u1 = game.payoff @ pis[1]
            u2 = -(pis[0] @ game.payoff)
        else:
            b = rng.choice(game.sizes[1], p=pis[1])
            a = rng.choice(game.sizes[0], p=pis[0])
            u1 = game.payoff[:, b]
            u2 = -game.payoff[a, :]
        for i in (0, 1):
            avg[i] += (pis[i] - avg[i]) / t
        cum[0] += u1
        cum[1] += u2
        if trace_every and (t % trace_every == 0 or t == iterations):
            e1, e2 = exploitability(game, avg[0], avg[1])
            out.trace.append((t, e1, e2))
        for i in (0, 1):
            scale = 1.0 + eta * t * betas[i]
            q = eta * cum[i] / scale
            b_eff = eta * t * betas[i] / scale
            pis[i], gap = _factored_policy(game.slots[i], q, logtau[i], b_eff, check_theorem1)
            worst = max(worst, gap)
    out.policies = (avg[0], avg[1])
    out.final = (pis[0], pis[1])
    out.theorem1_max = worst
    return out


def moving_average(xs: Sequence[float], window: int) -> np.ndarray:
    a = np.asarray(xs, dtype=float)
    if len(a) < window:
        return a.copy()
    c = np.cumsum(np.insert(a, 0, 0.0))
    return (c[window:] - c[:-window]) / window


def trace_non_increasing(values: Sequence[float], burn_in: float = 0.1, window: int = 100,
                         tol: float = 1e-9) -> tuple[bool, float]:
    """Is the block-wise moving average non-increasing after the burn-in?
    Returns the verdict and the largest rise seen."""
    v = np.asarray(values, dtype=float)
    start = int(len(v) * burn_in)
    tail = v[start:]
    nblocks = len(tail) // window
    if nblocks < 2:
        return True, 0.0
    means = tail[: nblocks * window].reshape(nblocks, window).mean(axis=1)
    rise = float(np.max(np.diff(means), initial=0.0))
    return rise <= tol, rise


@dataclass(frozen=True)
class BoundCheck:
    game: str
    beta: float
    exploitability: tuple[float, float]
    bound: float
    rise: float
    theorem1_max: float
    tolerance: float
    rise_tolerance: float

    @property
    def within_bound(self) -> bool:
        return max(self.exploitability) <= self.bound + self.tolerance

    @property
    def settles(self) -> bool:
        return self.rise <= self.rise_tolerance

    @property
    def ok(self) -> bool:
        return self.within_bound and self.settles and self.theorem1_max <= 1e-9


SLOT_SHAPES = (((3,), (3, 3)), ((2, 2), (3,)), ((3, 3), (2, 2)), ((2, 3), (2,)), ((9,), (2, 3)))


def benchmark_games(n_random: int = 20, seed: int = 5) -> list[MatrixGame]:
    """RPS plus ``n_random`` random factored games, each once with a uniform
    and once with a skewed anchor."""
    rng = np.random.default_rng(seed)
    games = [rock_paper_scissors()]
    for k in range(n_random):
        s1, s2 = SLOT_SHAPES[k % len(SLOT_SHAPES)]
        games.append(random_game(rng, s1, s2, skewed=False, name=f"uniform-{k}"))
        games.append(random_game(rng, s1, s2, skewed=True, name=f"skewed-{k}"))
    return games


def verify_theorem2(games: Sequence[MatrixGame] | None = None, betas: Sequence[float] = (0.05, 0.1),
                    iterations: int = 10_000, tolerance: float = 0.01, rise_tolerance: float = 0.02,
                    burn_in: float = 0.1, window: int = 100) -> list[BoundCheck]:
    """Average-policy exploitability against max_i beta * delta_i, plus a
    settling check on the smoothed exploitability trace."""
    games = benchmark_games() if games is None else games
    out = []
    for g in games:
        for beta in betas:
            r = run_factored_pikl(g, beta, iterations)
            expl = exploitability(g, *r.policies)
            bound = beta * max(delta_bound(a) for a in g.anchors)
            rise = max(trace_non_increasing([x[i] for x in r.trace], burn_in, window, rise_tolerance)[1]
                       for i in (1, 2))
            out.append(BoundCheck(g.name, float(beta), expl, bound, rise, r.theorem1_max, tolerance,
                                  rise_tolerance))
    return out
