"""No-press Diplomacy engine, piKL-Hedge search and unit-level factorization."""

from .adjudicator import adjudicate_moves, adjudicate_retreats, resolve_builds, step
from .anchor import HeuristicAnchor, TableAnchor, UniformAnchor, estimate_utility, make_anchor, sos_score
from .arena import AgentSpec, play_game, tournament
from .board import MapSpec, load_map, parse_map
from .dataset import build_task_prompt, emit_transitions, encode_state_text, selfplay_generate
from .factorizer import JointQTable, exact_unit_q, factored_joint_policy, joint_policy, lb_unit_q
from .lab import exploitability, run_factored_pikl
from .orders import JointAction, Order, parse_order, render_order
from .search import SearchConfig, policy_from_q, run_pikl
from .state import GameState, initial_state, legal_orders, load_state, validate_order

__version__ = "0.1.0"

__all__ = [
    "AgentSpec", "GameState", "HeuristicAnchor", "JointAction", "JointQTable", "MapSpec", "Order",
    "SearchConfig", "TableAnchor", "UniformAnchor", "adjudicate_moves", "adjudicate_retreats",
    "build_task_prompt", "emit_transitions", "encode_state_text", "estimate_utility", "exact_unit_q",
    "exploitability", "factored_joint_policy", "initial_state", "joint_policy", "lb_unit_q", "legal_orders",
    "load_map", "load_state", "make_anchor", "parse_map", "parse_order", "play_game", "policy_from_q",
    "render_order", "resolve_builds", "run_factored_pikl", "run_pikl", "selfplay_generate", "sos_score",
    "step", "tournament", "validate_order",
]
