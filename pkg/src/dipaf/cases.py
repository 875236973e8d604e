"""Adjudication case files: a placement, a few phases of orders, and the
expected outcome after each.  Format described in ``docs/formats.md``."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .adjudicator import adjudicate_moves, adjudicate_retreats, resolve_builds
from .board import LETTER_KIND, load_map
from .orders import parse_short, render_short
from .state import MOVE_PHASES, RETREAT_PHASES, Dislodged, GameState, Unit


@dataclass
class CaseCheck:
    case: str
    step: int
    what: str
    ok: bool
    detail: str = ""


def _unit(text: str, owner: str) -> Unit:
    kind, loc = text.split()
    return Unit(LETTER_KIND[kind], loc, owner)


def case_state(case: dict) -> GameState:
    spec = load_map(case.get("map", "standard"))
    units = [_unit(t, pw) for pw, texts in case.get("units", {}).items() for t in texts]
    dislodged = []
    for pw, entries in case.get("dislodged", {}).items():
        for e in entries:
            dislodged.append(Dislodged(_unit(e["unit"], pw), e.get("attacker_origin"), tuple(e["retreats"])))
    owners = dict(spec.start_sc_owner)
    owners.update(case.get("sc_owner", {}))
    return GameState(spec, case.get("year", spec.start_year), case.get("phase", "spring_move"),
                     tuple(units), owners, tuple(dislodged))


def _listing(state: GameState) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for u in state.units:
        out.setdefault(u.owner, []).append(f"{'A' if u.kind == 'army' else 'F'} {u.location}")
    return {k: sorted(v) for k, v in out.items()}


def run_case(case: dict) -> list[CaseCheck]:
    name = case["name"]
    state = case_state(case)
    checks: list[CaseCheck] = []
    for i, stage in enumerate(case["steps"]):
        orders = {pw: [parse_short(t, state.map) for t in texts] for pw, texts in stage.get("orders", {}).items()}
        expect = stage.get("expect", {})
        if state.phase in MOVE_PHASES:
            res = adjudicate_moves(state, orders)
            after = res.new_state
            by_text = {}
            for pw_orders in orders.values():
                for o in pw_orders:
                    by_text[render_short(o)] = res.succeeded.get(o.actor)
            for text, want in expect.get("succeeded", {}).items():
                got = by_text.get(text)
                checks.append(CaseCheck(name, i, f"{text} succeeded={want}", got == want, f"got {got}"))
            coerced = sorted(render_short(c.submitted) for c in res.coercions)
            if "coerced" in expect:
                want = sorted(expect["coerced"])
                checks.append(CaseCheck(name, i, "coercions", coerced == want, f"got {coerced}"))
        elif state.phase in RETREAT_PHASES:
            after = adjudicate_retreats(state, orders)
        else:
            after, coercions = resolve_builds(state, orders)
            if "coerced" in expect:
                got = sorted(render_short(c.submitted) for c in coercions)
                checks.append(CaseCheck(name, i, "coercions", got == sorted(expect["coerced"]), f"got {got}"))
        if "units" in expect:
            got = _listing(after)
            want = {k: sorted(v) for k, v in expect["units"].items() if v}
            checks.append(CaseCheck(name, i, "unit placement", got == want, f"got {got}"))
        if "dislodged" in expect:
            got = sorted(f"{d.unit.owner} {'A' if d.unit.kind == 'army' else 'F'} {d.unit.location}" for d in after.dislodged)
            checks.append(CaseCheck(name, i, "dislodged units", got == sorted(expect["dislodged"]), f"got {got}"))
        if "retreats" in expect:
            got = {d.unit.location: list(d.retreats) for d in after.dislodged}
            want = {k: sorted(v) for k, v in expect["retreats"].items()}
            checks.append(CaseCheck(name, i, "retreat options", got == want, f"got {got}"))
        if "phase" in expect:
            checks.append(CaseCheck(name, i, f"phase {expect['phase']}", after.phase == expect["phase"], f"got {after.phase}"))
        if "sc_owner" in expect:
            bad = {k: after.sc_owner.get(k) for k, v in expect["sc_owner"].items() if after.sc_owner.get(k) != v}
            checks.append(CaseCheck(name, i, "centre ownership", not bad, f"mismatch {bad}"))
        state = after
    return checks


def load_case(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def bundled_cases() -> list[dict]:
    root = resources.files("dipaf.data").joinpath("cases")
    return [json.loads(p.read_text(encoding="utf-8")) for p in sorted(root.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".json")]
