"""Command-line entry point: ``dipaf <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .anchor import AnchorPolicy, make_anchor
from .arena import AgentSpec, tournament
from .board import MapError, load_map
from .cases import load_case, run_case
from .dataset import encode_state_text, selfplay_generate
from .factorizer import verify_lower_bound, verify_theorem1_random
from .lab import verify_theorem2
from .orders import OrderError
from .search import SearchConfig, run_pikl
from .state import PhaseError, StateError, load_state

TEXT, LINES = "text", "lines"


class CliError(Exception):
    pass


# ------------------------------------------------------------------ helpers

def _emit(args, text_lines: Sequence[str], records: Sequence[dict]) -> None:
    if args.format == LINES:
        for r in records:
            print(json.dumps(r, ensure_ascii=False))
    else:
        for line in text_lines:
            print(line)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CliError(f"config {path}: invalid JSON ({e})") from None
    if not isinstance(data, dict):
        raise CliError(f"config {path}: expected a JSON object")
    unknown = set(data) - {"search", "anchor", "max_year", "workers", "map"}
    if unknown:
        raise CliError(f"config {path}: unknown keys {', '.join(sorted(unknown))}")
    return data


def _search_config(args, cfg: dict) -> SearchConfig:
    base = dict(cfg.get("search", {}))
    overrides = {"iterations": args.iters, "n_candidates": args.candidates, "beta": args.beta,
                 "max_per_unit": getattr(args, "max_per_unit", None), "horizon": getattr(args, "horizon", None),
                 "rollouts": getattr(args, "rollouts", None), "utility_scale": getattr(args, "utility_scale", None)}
    base.update({k: v for k, v in overrides.items() if v is not None})
    base["seed"] = args.seed
    return SearchConfig.from_mapping(base)


def _anchor(cfg: dict) -> AnchorPolicy:
    spec = dict(cfg.get("anchor", {"kind": "heuristic"}))
    kind = spec.pop("kind", "heuristic")
    path = spec.pop("path", None)
    return make_anchor(kind, path, **spec)


def _add_search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=float, help="anchor weight")
    p.add_argument("--iters", type=int, help="search iterations")
    p.add_argument("--candidates", type=int, help="candidate joint actions per power")
    p.add_argument("--max-per-unit", type=int, dest="max_per_unit")
    p.add_argument("--horizon", type=int, help="rollout depth in move phases (0 = one-step projection)")
    p.add_argument("--rollouts", type=int)
    p.add_argument("--utility-scale", type=float, dest="utility_scale")


# ----------------------------------------------------------------- commands

def cmd_map_validate(args, cfg) -> int:
    spec = load_map(Path(args.file))
    n_sc = len(spec.supply_centers)
    _emit(args, [f"OK {spec.name}: {len(spec.provinces)} provinces, {n_sc} supply centers, "
                 f"{len(spec.powers)} powers, win threshold {spec.win_threshold}"],
          [{"ok": True, "map": spec.name, "provinces": len(spec.provinces), "supply_centers": n_sc,
            "powers": list(spec.powers), "win_threshold": spec.win_threshold}])
    return 0


def cmd_adjudicate(args, cfg) -> int:
    case = load_case(args.case_file)
    checks = run_case(case)
    lines = [f"{'PASS' if c.ok else 'FAIL'} step {c.step}: {c.what}" + ("" if c.ok else f" ({c.detail})")
             for c in checks]
    failed = sum(not c.ok for c in checks)
    lines.append(f"{case['name']}: {len(checks) - failed}/{len(checks)} checks passed")
    _emit(args, lines, [{"case": c.case, "step": c.step, "check": c.what, "ok": c.ok, "detail": c.detail}
                        for c in checks])
    return 1 if failed else 0


def cmd_search(args, cfg) -> int:
    state = load_state(args.state_file)
    config = _search_config(args, cfg)
    if args.trace:
        config = replace(config, trace=True)
    powers = args.power or None
    result = run_pikl(state, config, _anchor(cfg), powers)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8", newline="\n") as fh:
            result.write_trace(fh)
    lines, records = [], []
    for p, ps in result.powers.items():
        order = sorted(range(len(ps.candidates)), key=lambda k: (-ps.policy[k], ps.candidates[k].key()))
        lines.append(f"{p}: {len(ps.candidates)} candidates")
        for k in order[: args.top]:
            text = "; ".join(ps.candidates[k].key())
            lines.append(f"  p={ps.policy[k]:.4f}  Q={ps.mean_q[k]:.4f}  logtau={ps.anchor_logprob[k]:.3f}  {text}")
        for k in order:
            records.append({"power": p, "orders": list(ps.candidates[k].key()), "prob": float(ps.policy[k]),
                            "mean_q": float(ps.mean_q[k]), "anchor_logprob": float(ps.anchor_logprob[k])})
    _emit(args, lines, records)
    return 0


def cmd_gen_data(args, cfg) -> int:
    config = _search_config(args, cfg)
    spec = load_map(args.map)
    max_year = args.max_year if args.max_year is not None else cfg.get("max_year")
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        summary = selfplay_generate(spec, args.games, config, fh, _anchor(cfg), max_year, args.seed)
    d = summary.to_dict()
    _emit(args, [f"wrote {d['transitions']} records from {d['games']} game(s), {d['phases']} move phases, "
                 f"mean |Q| {d['mean_abs_q']:.4f} -> {args.out}"], [{**d, "out": args.out}])
    return 0


def cmd_verify(args, cfg) -> int:
    if args.what == "theorem1":
        r = verify_theorem1_random(args.instances or 1000, args.seed)
        ok = r.ok
        lines = [f"{'PASS' if ok else 'FAIL'} theorem1: {r.instances} tables, max discrepancy {r.max_discrepancy:.3e}"]
        recs = [{"check": "theorem1", "ok": ok, "instances": r.instances, "max_discrepancy": r.max_discrepancy}]
    elif args.what == "lowerbound":
        r = verify_lower_bound(args.instances or 10_000, seed=args.seed)
        ok = r.ok
        lines = [f"{'PASS' if ok else 'FAIL'} lowerbound: {r.instances} tables, min gap {r.min_gap:.3e}; "
                 f"{r.saturation_instances} saturated tables, max gap {r.saturation_max_gap:.3e}"]
        recs = [{"check": "lowerbound", "ok": ok, "instances": r.instances, "min_gap": r.min_gap,
                 "saturation_max_gap": r.saturation_max_gap}]
    else:
        checks = verify_theorem2(iterations=args.iterations)
        ok = all(c.ok for c in checks)
        lines = [f"{'PASS' if c.ok else 'FAIL'} {c.game} beta={c.beta}: exploitability "
                 f"({c.exploitability[0]:.4f}, {c.exploitability[1]:.4f}) bound {c.bound:.4f}, rise {c.rise:.4f}"
                 for c in checks]
        lines.append(f"{'PASS' if ok else 'FAIL'} theorem2: {sum(c.ok for c in checks)}/{len(checks)} runs")
        recs = [{"check": "theorem2", "game": c.game, "beta": c.beta, "ok": c.ok,
                 "exploitability": list(c.exploitability), "bound": c.bound, "rise": c.rise} for c in checks]
    _emit(args, lines, recs)
    return 0 if ok else 1


def _agent(kind: str, config: SearchConfig) -> AgentSpec:
    if kind not in ("pikl", "anchor_only"):
        raise CliError(f"unknown agent {kind!r} (choose pikl or anchor_only)")
    return AgentSpec(kind, config if kind == "pikl" else None)


def cmd_tournament(args, cfg) -> int:
    config = _search_config(args, cfg)
    a, b = _agent(args.agent_a, config), _agent(args.agent_b, config)
    max_year = args.max_year if args.max_year is not None else cfg.get("max_year")
    workers = args.workers or cfg.get("workers", 1)
    res = tournament(args.map or cfg.get("map", "ring7"), a, b, args.games, args.seed, max_year, _anchor(cfg), workers)
    lines = [f"{res.agent_a} (one seat) vs {res.agent_b}, {res.n_games} games"]
    lines += [f"  {k:9s} {m}" for k, m in res.metrics.items()]
    _emit(args, lines, res.rows())
    return 0


def cmd_encode_state(args, cfg) -> int:
    state = load_state(args.state_file)
    text = encode_state_text(state, args.power)
    _emit(args, [text], [{"power": args.power, "text": text}])
    return 0


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--format", choices=(TEXT, LINES), default=TEXT)

    parser = argparse.ArgumentParser(prog="dipaf", description="No-press Diplomacy engine and piKL tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p_map = sub.add_parser("map", help="map utilities")
    map_sub = p_map.add_subparsers(dest="map_command", required=True)
    p = map_sub.add_parser("validate", parents=[common], help="parse and check a map file")
    p.add_argument("file")
    p.set_defaults(func=cmd_map_validate)

    p = sub.add_parser("adjudicate", parents=[common], help="run an adjudication case file")
    p.add_argument("case_file")
    p.set_defaults(func=cmd_adjudicate)

    p = sub.add_parser("search", parents=[common], help="run piKL-Hedge on a state file")
    p.add_argument("state_file")
    p.add_argument("--power", action="append", help="power to search (repeatable; default all)")
    p.add_argument("--top", type=int, default=5, help="candidates shown per power")
    p.add_argument("--trace", help="write the per-iteration trace here")
    _add_search_flags(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("gen-data", parents=[common], help="self-play and write training records")
    p.add_argument("map")
    p.add_argument("--games", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--max-year", type=int, dest="max_year")
    _add_search_flags(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("verify", parents=[common], help="numerical checks")
    p.add_argument("what", choices=("theorem1", "theorem2", "lowerbound"))
    p.add_argument("--instances", type=int)
    p.add_argument("--iterations", type=int, default=10_000)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("tournament", parents=[common], help="one agent on a rotating seat against the rest")
    p.add_argument("--agent-a", default="pikl", dest="agent_a")
    p.add_argument("--agent-b", default="anchor_only", dest="agent_b")
    p.add_argument("--games", type=int, default=14)
    p.add_argument("--map")
    p.add_argument("--max-year", type=int, dest="max_year")
    p.add_argument("--workers", type=int)
    _add_search_flags(p)
    p.set_defaults(func=cmd_tournament)

    p = sub.add_parser("encode-state", parents=[common], help="print the text encoding of a state")
    p.add_argument("state_file")
    p.add_argument("--power", required=True)
    p.set_defaults(func=cmd_encode_state)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return args.func(args, cfg)
    except (CliError, MapError, OrderError, PhaseError, StateError, ValueError, KeyError, OSError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"dipaf: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
