"""Exhaustive move resolver used as a test oracle.

Enumerates every subset of moves that could succeed, keeps the assignments
that reproduce themselves under the strength rules, and picks the one with
the most successful moves (which selects circular movement over a standstill).
Written without recursion or guessing so it shares no control flow with the
production resolver.  Only practical for a handful of units.
"""

from __future__ import annotations

from itertools import product

from .board import province_of
from .orders import MOVE, SUPPORT_HOLD, SUPPORT_MOVE, Order


def _outcome(units: dict[str, str], orders: dict[str, Order], success: dict[str, bool]) -> dict[str, bool]:
    """Recompute every move's success assuming the others follow ``success``."""
    moving = {p: province_of(o.dest) for p, o in orders.items() if o.type == MOVE}

    # a unit is dislodged when it did not leave and someone entered
    entered = {moving[p] for p, ok in success.items() if ok}
    dislodged = {p for p in units if p in entered and not success.get(p, False)}

    def cut(s: str) -> bool:
        o = orders[s]
        if s in dislodged:
            return True
        for a, q in moving.items():
            if q != s or units[a] == units[s]:
                continue
            if o.type == SUPPORT_MOVE and a == o.dest:
                continue
            return True
        return False

    def helpers(p: str) -> list[str]:
        """Uncut, matching supports for the order at ``p``."""
        o = orders[p]
        found = []
        for s, so in orders.items():
            if so.type not in (SUPPORT_HOLD, SUPPORT_MOVE) or so.target != p or cut(s):
                continue
            if so.type == SUPPORT_HOLD and o.type != MOVE:
                found.append(s)
            elif so.type == SUPPORT_MOVE and o.type == MOVE and province_of(o.dest) == so.dest:
                found.append(s)
        return found

    out = {}
    for p, q in moving.items():
        me = units[p]
        swap = moving.get(q) == p
        occupant_stays = q in units and (swap or not success.get(q, False))
        if occupant_stays:
            if units[q] == me:
                attack = 0
            else:
                attack = 1 + sum(1 for s in helpers(p) if units[s] != units[q])
        else:
            attack = 1 + len(helpers(p))

        if swap:
            resist = 1 + len(helpers(q))
        elif q not in units:
            resist = 0
        elif q in moving:
            resist = 0 if success[q] else 1
        else:
            resist = 1 + len(helpers(q))

        rivals = []
        for r, rq in moving.items():
            if r == p or rq != q:
                continue
            rswap = moving.get(rq) == r
            rivals.append(0 if (rswap and success[rq]) else 1 + len(helpers(r)))
        out[p] = attack > resist and all(attack > v for v in rivals)
    return out


def brute_force_moves(state, effective: dict[str, Order]) -> dict[str, bool]:
    """Move success per origin province, by exhaustive consistency search."""
    units = {u.province: u.owner for u in state.units}
    movers = sorted(p for p, o in effective.items() if o.type == MOVE)
    consistent = []
    for bits in product((False, True), repeat=len(movers)):
        guess = dict(zip(movers, bits))
        if _outcome(units, effective, guess) == guess:
            consistent.append(guess)
    if not consistent:
        raise RuntimeError("no consistent resolution")
    best = max(sum(g.values()) for g in consistent)
    winners = [g for g in consistent if sum(g.values()) == best]
    if len(winners) > 1:
        raise RuntimeError(f"{len(winners)} maximal resolutions")
    return winners[0]
